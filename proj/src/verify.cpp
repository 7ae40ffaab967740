#include "gpos/verify.hpp"

#include "gpos/linalg.hpp"

#include <cmath>

namespace gpos {

namespace {

// Phi^{-1}(0.95): nodes outside [-q, q] on any axis are excluded.
constexpr double kInteriorQuantile = 1.6448536269514722;
constexpr double kDiscriminantStep = 1e-3;

double positive_mass(const ChaosMoments& m) {
  if (!(m.mass > 0.0) || !std::isfinite(m.mass)) throw DomainError("moments: E[L] must be positive");
  return m.mass;
}

}  // namespace

#define GPOS_TOLERANCE_FIELDS(X)                                                                           \
  X(margin) X(entropic_margin) X(identity) X(entropic_identity) X(monge_ampere) X(entropic_monge_ampere) \
  X(wasserstein) X(entropic_wasserstein) X(inverse) X(entropic_inverse) X(discriminant_slack)           \
  X(discriminant_agreement) X(trend) X(chaos) X(convexity)

double* Tolerances::find(const std::string& name) {
#define X(f) \
  if (name == #f) return &f;
  GPOS_TOLERANCE_FIELDS(X)
#undef X
  return nullptr;
}

std::vector<std::pair<std::string, double>> Tolerances::entries() const {
  std::vector<std::pair<std::string, double>> out;
#define X(f) out.emplace_back(#f, f);
  GPOS_TOLERANCE_FIELDS(X)
#undef X
  return out;
}

double first_order_identity(const ChaosMoments& moments, const TransportSolution& sol, const QuadratureGrid& grid) {
  require_dim(sol.dim, moments.dim(), "first_order_identity");
  require_dim(grid.dim, sol.dim, "first_order_identity grid");
  const double mass = positive_mass(moments);
  const auto& model = *sol.model;
  VectorField disp;
  disp.value = [&](const Vector& x) -> Vector { return model.apply(x) - x; };
  return (expect(disp, grid) - moments.m1 / mass).norm();
}

double second_order_identity(const ChaosMoments& moments, const TransportSolution& sol, const QuadratureGrid& grid) {
  require_dim(sol.dim, moments.dim(), "second_order_identity");
  require_dim(grid.dim, sol.dim, "second_order_identity grid");
  const double mass = positive_mass(moments);
  const auto& model = *sol.model;
  const Matrix outer = expect_matrix(
      [&](const Vector& x) -> Matrix {
        const Vector g = model.apply(x) - x;
        return g * g.transpose();
      },
      grid, sol.dim, sol.dim);
  return linalg::max_abs(outer + 2.0 * sol.mean_hessian - moments.m2 / mass);
}

OperatorSides theorem_sides(const ChaosMoments& moments, const TransportSolution& sol) {
  require_dim(sol.dim, moments.dim(), "theorem_margin");
  const double mass = positive_mass(moments);
  OperatorSides s;
  s.lhs = linalg::symmetrize(0.5 / mass * (moments.m2 - moments.m1 * moments.m1.transpose() / mass));
  s.rhs = linalg::symmetrize(sol.mean_hessian);
  s.margin = linalg::min_eigenvalue(s.lhs - s.rhs);
  return s;
}

double theorem_margin(const ChaosMoments& moments, const TransportSolution& sol) {
  return theorem_sides(moments, sol).margin;
}

double proposition_margin(const ChaosMoments& moments) {
  const double mass = positive_mass(moments);
  const int d = moments.dim();
  const Matrix a = Matrix::Identity(d, d) + moments.m2 / mass - moments.m1 * moments.m1.transpose() / (mass * mass);
  return linalg::min_eigenvalue(linalg::symmetrize(a));
}

MeasureMargins measure_corollary_margin(const MomentFunctionals& mf) {
  if (!(mf.mass > 0.0)) throw DomainError("measure_corollary_margin: mass must be positive");
  const auto d = mf.m1.size();
  MeasureMargins out;
  const Matrix a = Matrix::Identity(d, d) + mf.m2 / mf.mass - mf.m1 * mf.m1.transpose() / (mf.mass * mf.mass);
  out.margin = linalg::min_eigenvalue(linalg::symmetrize(a));
  out.convexity_margin = r_convexity(make_quadratic_form(linalg::symmetrize(mf.m2 / mf.mass)), 1.0);
  return out;
}

std::vector<TrendPoint> measure_transport_margin(const PositiveMeasure& m, const std::vector<double>& ts,
                                                 const QuadratureGrid& grid, const SinkhornParams& params,
                                                 const QuadratureGrid* entropic_grid) {
  require_dim(grid.dim, m.dim(), "measure_transport_margin grid");
  std::vector<TrendPoint> out;
  for (double t : ts) {
    const RegularizedMeasure reg = ou_regularize(m, t);
    const ChaosMoments mom = analytic_moments(reg.density);
    TrendPoint p;
    p.t = t;
    if (m.dim() == 1) {
      const TransportSolution sol = solve_quantile_1d(reg.density, grid);
      p.method = sol.method;
      p.converged = sol.diagnostics.converged;
      p.margin = theorem_margin(mom, sol);
    } else {
      const TransportSolution sol = solve_entropic(reg.density, entropic_grid ? *entropic_grid : grid, params);
      p.method = sol.method;
      p.converged = sol.diagnostics.converged;
      p.margin = theorem_margin(mom, sol);
    }
    out.push_back(p);
  }
  return out;
}

MongeAmpereResult monge_ampere_residual(const DensityModel& density, const TransportSolution& sol,
                                        const QuadratureGrid& grid) {
  require_dim(density.dim(), sol.dim, "monge_ampere_residual");
  require_dim(grid.dim, sol.dim, "monge_ampere_residual grid");
  MongeAmpereResult r;
  r.argmax = Vector::Zero(sol.dim);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector x = grid.node(k);
    if (x.cwiseAbs().maxCoeff() > kInteriorQuantile) continue;
    const double v = density(sol.apply(x)) * jacobian_lambda(sol, x);
    const double e = std::abs(v - 1.0);
    if (!std::isfinite(e)) throw NumericalError("monge_ampere_residual: non-finite value");
    ++r.nodes;
    if (e > r.residual) {
      r.residual = e;
      r.argmax = x;
    }
  }
  return r;
}

DiscriminantResult discriminant_check(const DensityModel& density, const ChaosMoments& moments, const Vector& h,
                                      const QuadratureGrid& grid) {
  require_dim(h.size(), density.dim(), "discriminant_check direction");
  require_dim(moments.dim(), density.dim(), "discriminant_check moments");
  if (!(h.norm() > 0.0)) throw DomainError("discriminant_check: |h| must be positive");
  const double mass = positive_mass(moments);
  auto l = [&](double t) {
    const Vector th = t * h;
    return expect([&](const Vector& x) { return density(x) * wick_exp(th, x); }, grid);
  };
  // Central differences at dt and 2 dt, Richardson-combined.
  const double dt = kDiscriminantStep;
  const double l0 = l(0.0);
  const double lp = l(dt), lm = l(-dt);
  const double lp2 = l(2.0 * dt), lm2 = l(-2.0 * dt);
  const double d1 = (lp - lm) / (2.0 * dt), d1w = (lp2 - lm2) / (4.0 * dt);
  const double d2 = (lp - 2.0 * l0 + lm) / (dt * dt), d2w = (lp2 - 2.0 * l0 + lm2) / (4.0 * dt * dt);
  DiscriminantResult r;
  r.value = l0;
  r.first = moments.m1.dot(h) / mass;
  r.second = h.dot(moments.m2 * h) / mass;
  r.first_fd = (4.0 * d1 - d1w) / (3.0 * l0);
  r.second_fd = (4.0 * d2 - d2w) / (3.0 * l0);
  r.agreement = std::max(std::abs(r.first - r.first_fd), std::abs(r.second - r.second_fd));
  r.slack = h.squaredNorm() + r.second - r.first * r.first;
  return r;
}

}  // namespace gpos
