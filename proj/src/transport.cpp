#include "gpos/transport.hpp"

#include "gpos/linalg.hpp"
#include "target_1d.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpos {

std::string to_string(TransportMethod m) {
  switch (m) {
    case TransportMethod::quantile_1d: return "quantile_1d";
    case TransportMethod::gaussian_linear: return "gaussian_linear";
    case TransportMethod::entropic: return "entropic";
  }
  return "unknown";
}

VectorField TransportSolution::map() const {
  VectorField f;
  auto m = model;
  f.value = [m](const Vector& x) { return m->apply(x); };
  f.jacobian = [m](const Vector& x) { return m->jacobian(x); };
  return f;
}

ScalarField TransportSolution::potential() const {
  ScalarField f;
  auto m = model;
  f.value = [m](const Vector& x) { return m->potential(x); };
  f.gradient = [m](const Vector& x) -> Vector { return m->apply(x) - x; };
  f.hessian = [m](const Vector& x) -> Matrix {
    return m->jacobian(x) - Matrix::Identity(x.size(), x.size());
  };
  return f;
}

namespace {

constexpr double kRefineTol = 1e-11;

// ---------------------------------------------------------------------------
// Monotone rearrangement in one dimension

class QuantileModel final : public TransportModel {
 public:
  explicit QuantileModel(std::unique_ptr<detail::Target1D> target) : target_(std::move(target)) {}

  int dim() const override { return 1; }

  Vector apply(const Vector& x) const override {
    require_dim(x.size(), 1, "quantile map");
    return Vector::Constant(1, map_scalar(x[0]));
  }

  Matrix jacobian(const Vector& x) const override {
    require_dim(x.size(), 1, "quantile map");
    const double h = default_fd_step(x);
    const double d = (map_scalar(x[0] + h) - map_scalar(x[0] - h)) / (2.0 * h);
    return Matrix::Constant(1, 1, d);
  }

  double potential(const Vector& x) const override {
    require_dim(x.size(), 1, "quantile potential");
    return integrate_displacement(0.0, x[0]);
  }

  Vector inverse(const Vector& y) const override {
    require_dim(y.size(), 1, "quantile inverse");
    return Vector::Constant(1, inverse_scalar(y[0]));
  }

  double map_scalar(double x) const;
  double inverse_scalar(double y) const;

 private:
  double integrate_displacement(double a, double b) const;
  double simpson(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) const;

  std::unique_ptr<detail::Target1D> target_;
};

double QuantileModel::map_scalar(double x) const {
  if (!std::isfinite(x)) throw NumericalError("quantile map: non-finite argument");
  // Match lower tails left of the origin and upper tails right of it so both
  // sides keep full relative precision.
  const bool lower = x <= 0.0;
  const double level = lower ? detail::log_ndtr(x) : detail::log_ndtr(-x);
  auto residual = [&](double y) { return lower ? target_->log_cdf(y) - level : level - target_->log_sf(y); };
  auto slope = [&](double y) {
    const double p = target_->pdf(y);
    return lower ? p / target_->cdf(y) : p / target_->sf(y);
  };

  const double guess = target_->center() + target_->scale() * x;
  double step = std::max(1.0, target_->scale());
  double lo = guess - step;
  double hi = guess + step;
  int expansions = 0;
  while (!(residual(lo) <= 0.0)) {
    lo -= step;
    step *= 2.0;
    if (++expansions > 200) throw NumericalError("quantile map: CDF inversion failed to bracket (lower)");
  }
  step = std::max(1.0, target_->scale());
  while (!(residual(hi) >= 0.0)) {
    hi += step;
    step *= 2.0;
    if (++expansions > 400) throw NumericalError("quantile map: CDF inversion failed to bracket (upper)");
  }

  double y = std::clamp(guess, lo, hi);
  for (int it = 0; it < 300; ++it) {
    const double r = residual(y);
    if (r == 0.0) return y;
    if (r < 0.0) lo = y; else hi = y;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y))) break;
    const double s = slope(y);
    double next = (std::isfinite(r) && s > 0.0 && std::isfinite(s)) ? y - r / s : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) <= 1e-16 * std::max(1.0, std::abs(y))) return next;
    y = next;
  }
  return 0.5 * (lo + hi);
}

double QuantileModel::inverse_scalar(double y) const {
  if (!std::isfinite(y)) throw NumericalError("quantile inverse: non-finite argument");
  double lo = -1.0;
  double hi = 1.0;
  int expansions = 0;
  while (map_scalar(lo) > y) {
    lo *= 2.0;
    if (++expansions > 12) throw NumericalError("quantile inverse: bracketing failure (non-injective map?)");
  }
  while (map_scalar(hi) < y) {
    hi *= 2.0;
    if (++expansions > 24) throw NumericalError("quantile inverse: bracketing failure (non-injective map?)");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (map_scalar(mid) < y) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double QuantileModel::simpson(double a, double b, double fa, double fm, double fb, double whole, double tol,
                              int depth) const {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = map_scalar(lm) - lm;
  const double frm = map_scalar(rm) - rm;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double QuantileModel::integrate_displacement(double a, double b) const {
  if (a == b) return 0.0;
  const double fa = map_scalar(a) - a;
  const double fb = map_scalar(b) - b;
  const double m = 0.5 * (a + b);
  const double fm = map_scalar(m) - m;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(a, b, fa, fm, fb, whole, 1e-12, 40);
}

// ---------------------------------------------------------------------------
// Linear Gaussian map

class LinearModel final : public TransportModel {
 public:
  LinearModel(Matrix root, Vector mean) : root_(std::move(root)), mean_(std::move(mean)) {
    lu_.compute(root_);
    invertible_ = linalg::min_eigenvalue(root_) > 1e-12 * std::max(1.0, linalg::max_abs(root_));
  }

  int dim() const override { return static_cast<int>(mean_.size()); }
  Vector apply(const Vector& x) const override {
    require_dim(x.size(), mean_.size(), "linear map");
    return mean_ + root_ * x;
  }
  Matrix jacobian(const Vector& x) const override {
    require_dim(x.size(), mean_.size(), "linear map");
    return root_;
  }
  double potential(const Vector& x) const override {
    require_dim(x.size(), mean_.size(), "linear potential");
    return mean_.dot(x) + 0.5 * x.dot((root_ - Matrix::Identity(x.size(), x.size())) * x);
  }
  Vector inverse(const Vector& y) const override {
    require_dim(y.size(), mean_.size(), "linear inverse");
    if (!invertible_) throw NumericalError("linear inverse: map is not injective (singular covariance)");
    return lu_.solve(y - mean_);
  }

 private:
  Matrix root_;
  Vector mean_;
  Eigen::PartialPivLU<Matrix> lu_;
  bool invertible_ = true;
};

}  // namespace

// ---------------------------------------------------------------------------

TransportSolution solve_quantile_1d(const DensityModel& density, const QuadratureGrid& given,
                                    QuantileGrid integration) {
  if (density.dim() != 1) throw DimensionError("solve_quantile_1d: requires dim = 1");
  require_dim(given.dim, 1, "solve_quantile_1d grid");
  auto target = detail::make_target_1d(density);
  const double nu_mean = target->mean();
  const double nu_second = target->second_moment();

  TransportSolution sol;
  sol.method = TransportMethod::quantile_1d;
  sol.dim = 1;
  sol.model = std::make_shared<QuantileModel>(std::move(target));
  if (integration == QuantileGrid::refined) {
    const auto& qm = static_cast<const QuantileModel&>(*sol.model);
    sol.source_support = build_adaptive_panel_grid_1d(
        [&](double x) {
          const double y = qm.map_scalar(x);
          return y * y;
        },
        kRefineTol);
  }
  const QuadratureGrid& grid = sol.source_support ? *sol.source_support : given;
  sol.mean_hessian = mean_potential_hessian(sol, grid);
  sol.wasserstein_sq = wasserstein_sq(sol, grid);

  const auto& m = *sol.model;
  const double push_mean = expect([&](const Vector& x) { return m.apply(x)[0]; }, grid);
  const double push_second = expect([&](const Vector& x) { return m.apply(x).squaredNorm(); }, grid);
  sol.diagnostics.pushforward_error = std::max(std::abs(push_mean - nu_mean), std::abs(push_second - nu_second));
  sol.diagnostics.converged = sol.diagnostics.pushforward_error <= 1e-6;
  if (!sol.diagnostics.converged) sol.diagnostics.note = "pushforward moments off by more than 1e-6 on this grid";
  return sol;
}

TransportSolution solve_gaussian_linear(const Matrix& covariance, const Vector& mean) {
  require_dim(covariance.rows(), mean.size(), "solve_gaussian_linear");
  require_dim(covariance.cols(), mean.size(), "solve_gaussian_linear");
  const Matrix root = linalg::sqrt_psd(covariance);
  const auto d = mean.size();

  TransportSolution sol;
  sol.method = TransportMethod::gaussian_linear;
  sol.dim = static_cast<int>(d);
  sol.model = std::make_shared<LinearModel>(root, mean);
  sol.mean_hessian = root - Matrix::Identity(d, d);
  sol.wasserstein_sq = mean.squaredNorm() + (covariance + Matrix::Identity(d, d) - 2.0 * root).trace();
  sol.wasserstein_sq = std::max(0.0, sol.wasserstein_sq);
  return sol;
}

TransportSolution solve_gaussian_linear(const DensityModel& density) {
  if (!density.has_closed_form() || density.components().size() != 1) {
    throw DomainError("solve_gaussian_linear: density is not a single Gaussian");
  }
  const auto& c = density.components().front();
  return solve_gaussian_linear(c.covariance, c.mean);
}

Matrix stein_hessian_raw(const TransportSolution& sol, const QuadratureGrid& grid) {
  require_dim(grid.dim, sol.dim, "mean_potential_hessian");
  const auto& m = *sol.model;
  return expect_matrix([&](const Vector& x) -> Matrix { return (m.apply(x) - x) * x.transpose(); }, grid, sol.dim,
                       sol.dim);
}

Matrix mean_potential_hessian(const TransportSolution& sol, const QuadratureGrid& grid) {
  return linalg::symmetrize(stein_hessian_raw(sol, grid));
}

double wasserstein_sq(const TransportSolution& sol, const QuadratureGrid& grid) {
  require_dim(grid.dim, sol.dim, "wasserstein_sq");
  const auto& m = *sol.model;
  return expect([&](const Vector& x) { return (m.apply(x) - x).squaredNorm(); }, grid);
}

InverseMap inverse_map(const TransportSolution& sol, const QuadratureGrid& grid) {
  require_dim(grid.dim, sol.dim, "inverse_map");
  InverseMap out;
  auto m = sol.model;
  out.map.value = [m](const Vector& y) { return m->inverse(y); };
  out.tolerance = is_closed_form(sol.method) ? 1e-6 : 5e-2;
  Vector x(grid.dim);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    x = grid.node(k);
    if (sol.method == TransportMethod::entropic && x.cwiseAbs().maxCoeff() > 3.0) continue;
    const Vector back = m->inverse(m->apply(x));
    out.roundtrip_error = std::max(out.roundtrip_error, (back - x).cwiseAbs().maxCoeff());
  }
  out.within_tolerance = out.roundtrip_error <= out.tolerance;
  return out;
}

double det2(const Matrix& a) {
  require_dim(a.rows(), a.cols(), "det2");
  const Matrix ia = Matrix::Identity(a.rows(), a.cols()) + a;
  const double det = a.rows() == 0 ? 1.0 : Eigen::PartialPivLU<Matrix>(ia).determinant();
  return det * std::exp(-a.trace());
}

double jacobian_lambda(const TransportSolution& sol, const Vector& x) {
  const ScalarField phi = sol.potential();
  const Vector grad = (*phi.gradient)(x);
  const Matrix hess = (*phi.hessian)(x);
  const double gen = ou_generator(phi, x);
  const double v = det2(hess) * std::exp(-gen - 0.5 * grad.squaredNorm());
  if (!std::isfinite(v)) throw NumericalError("jacobian_lambda: non-finite value");
  return v;
}

double jacobian_lambda_direct(const TransportSolution& sol, const Vector& x) {
  const Vector grad = sol.model->apply(x) - x;
  const Matrix jac = sol.model->jacobian(x);
  const double det = Eigen::PartialPivLU<Matrix>(jac).determinant();
  return det * std::exp(-x.dot(grad) - 0.5 * grad.squaredNorm());
}

}  // namespace gpos
