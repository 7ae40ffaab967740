#include "gpos/transport.hpp"

#include "gpos/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gpos {

void SinkhornParams::validate() const {
  if (!(epsilon_start > 0.0) || !(epsilon_final > 0.0)) throw DomainError("SinkhornParams: epsilon must be positive");
  if (epsilon_final > epsilon_start) throw DomainError("SinkhornParams: epsilon_final exceeds epsilon_start");
  if (!(epsilon_ratio > 0.0 && epsilon_ratio < 1.0)) throw DomainError("SinkhornParams: epsilon_ratio must be in (0, 1)");
  if (max_iterations < 1) throw DomainError("SinkhornParams: max_iterations must be >= 1");
  if (!(marginal_tol > 0.0)) throw DomainError("SinkhornParams: marginal_tol must be positive");
  if (!(relaxation >= 1.0 && relaxation < 2.0)) throw DomainError("SinkhornParams: relaxation must be in [1, 2)");
  if (!(support_floor >= 0.0 && support_floor < 1e-3)) throw DomainError("SinkhornParams: support_floor out of range");
  if (target_degree < 0) throw DomainError("SinkhornParams: target_degree must be >= 0");
  if (source == SampleSource::monte_carlo && (source_samples < 2 || target_samples < 2)) {
    throw DomainError("SinkhornParams: Monte Carlo sampling needs at least 2 samples per side");
  }
}

std::vector<double> SinkhornParams::schedule() const {
  validate();
  std::vector<double> eps;
  for (double e = epsilon_start; e > epsilon_final * (1.0 + 1e-12); e *= epsilon_ratio) eps.push_back(e);
  eps.push_back(epsilon_final);
  return eps;
}

namespace {

// Entropic map extended off the support through the dual potentials:
// T(x) = sum_j y_j p_j(x), p_j(x) proportional to exp((g_j - |x - y_j|^2 / 2) / eps).
class EntropicModel final : public TransportModel {
 public:
  EntropicModel(Matrix source, Vector f, Matrix target, Vector g, double eps)
      : source_(std::move(source)), f_(std::move(f)), target_(std::move(target)), g_(std::move(g)), eps_(eps) {}

  int dim() const override { return static_cast<int>(source_.rows()); }

  Vector apply(const Vector& x) const override {
    require_dim(x.size(), target_.rows(), "entropic map");
    const Vector p = gibbs(target_, g_, x, nullptr);
    return target_ * p;
  }

  Matrix jacobian(const Vector& x) const override {
    require_dim(x.size(), target_.rows(), "entropic map");
    const Vector p = gibbs(target_, g_, x, nullptr);
    const Vector mean = target_ * p;
    const Matrix centered = target_.colwise() - mean;
    return linalg::symmetrize(centered * p.asDiagonal() * centered.transpose() / eps_);
  }

  double potential(const Vector& x) const override {
    require_dim(x.size(), target_.rows(), "entropic potential");
    double lse = 0.0;
    gibbs(target_, g_, x, &lse);
    return eps_ * lse;
  }

  Vector inverse(const Vector& y) const override {
    require_dim(y.size(), source_.rows(), "entropic inverse");
    const Vector p = gibbs(source_, f_, y, nullptr);
    return source_ * p;
  }

 private:
  Vector gibbs(const Matrix& pts, const Vector& pot, const Vector& x, double* lse) const {
    Vector logits(pts.cols());
    for (Eigen::Index j = 0; j < pts.cols(); ++j) logits[j] = (pot[j] - 0.5 * (pts.col(j) - x).squaredNorm()) / eps_;
    const double m = logits.maxCoeff();
    Vector p = (logits.array() - m).exp();
    const double s = p.sum();
    if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("entropic map: degenerate Gibbs weights");
    if (lse) *lse = m + std::log(s);
    return p / s;
  }

  Matrix source_;
  Vector f_;
  Matrix target_;
  Vector g_;
  double eps_;
};

struct DiscreteMeasure {
  Matrix points;  // d x n
  Vector weights;
};

DiscreteMeasure prune(const Matrix& points, const Vector& raw_weights, double floor, const char* side) {
  const double total = raw_weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError(std::string("entropic: degenerate ") + side + " weights");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < raw_weights.size(); ++k) {
    if (raw_weights[k] / total > floor) keep.push_back(k);
  }
  DiscreteMeasure out;
  out.points.resize(points.rows(), static_cast<Eigen::Index>(keep.size()));
  out.weights.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.points.col(static_cast<Eigen::Index>(i)) = points.col(keep[i]);
    out.weights[static_cast<Eigen::Index>(i)] = raw_weights[keep[i]];
  }
  out.weights /= out.weights.sum();
  return out;
}

// Affine correction giving an equal-weight cloud the prescribed mean and
// covariance exactly.
void match_moments(Matrix& pts, const Vector& mean, const Matrix& cov) {
  const double n = static_cast<double>(pts.cols());
  const Vector mu = pts.rowwise().mean();
  pts.colwise() -= mu;
  const Matrix emp = pts * pts.transpose() / n;
  Eigen::LLT<Matrix> e(emp), t(cov);
  if (e.info() != Eigen::Success || t.info() != Eigen::Success) {
    throw NumericalError("entropic: degenerate sample covariance in moment matching");
  }
  const Matrix white = e.matrixL().solve(pts);
  pts = (t.matrixL() * white).colwise() + mean;
}

std::pair<DiscreteMeasure, DiscreteMeasure> build_marginals(const DensityModel& density, const QuadratureGrid& grid,
                                                            const SinkhornParams& p) {
  const int d = density.dim();
  if (p.source == SampleSource::quadrature) {
    require_dim(grid.dim, d, "solve_entropic grid");
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (density.has_closed_form() && p.target_atoms == TargetAtoms::pushforward) {
      // nu discretized directly: the grid pushed through each component.
      const auto& comps = density.components();
      const QuadratureGrid tg = p.target_degree > 0 ? build_grid(d, p.target_degree) : grid;
      const auto nt = static_cast<Eigen::Index>(tg.size());
      Matrix pts(d, nt * static_cast<Eigen::Index>(comps.size()));
      Vector tw(pts.cols());
      Eigen::Index k = 0;
      for (const auto& c : comps) {
        const Matrix chol = Eigen::LLT<Matrix>(c.covariance).matrixL();
        pts.middleCols(k, nt) = (chol * tg.nodes).colwise() + c.mean;
        tw.segment(k, nt) = c.weight * tg.weights;
        k += nt;
      }
      return {prune(grid.nodes, grid.weights, p.support_floor, "source"),
              prune(pts, tw, p.support_floor, "target")};
    }
    Vector lw(n);
    Vector x(d);
    for (Eigen::Index k = 0; k < n; ++k) {
      x = grid.nodes.col(k);
      const double v = density(x);
      if (!std::isfinite(v)) throw NumericalError("entropic: non-finite density at a node");
      if (v < 0.0) throw DomainError("entropic: negative density at a node");
      lw[k] = grid.weights[k] * v;
    }
    return {prune(grid.nodes, grid.weights, p.support_floor, "source"),
            prune(grid.nodes, lw, p.support_floor, "target")};
  }

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (p.source_samples <= static_cast<std::size_t>(d) || p.target_samples <= static_cast<std::size_t>(d)) {
    throw DomainError("entropic: Monte Carlo needs more samples than dimensions per side");
  }
  const auto ns = static_cast<Eigen::Index>(p.source_samples);
  const auto nt = static_cast<Eigen::Index>(p.target_samples);
  Matrix src(d, ns);
  for (Eigen::Index k = 0; k < ns; ++k)
    for (int i = 0; i < d; ++i) src(i, k) = normal(rng);
  match_moments(src, Vector::Zero(d), Matrix::Identity(d, d));
  Matrix tgt(d, nt);
  Vector tw = Vector::Ones(nt);
  if (density.has_closed_form()) {
    const auto& comps = density.components();
    std::vector<double> w;
    for (const auto& c : comps) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::vector<Eigen::LLT<Matrix>> chol;
    for (const auto& c : comps) chol.emplace_back(c.covariance);
    Vector z(d);
    for (Eigen::Index k = 0; k < nt; ++k) {
      const std::size_t c = pick(rng);
      for (int i = 0; i < d; ++i) z[i] = normal(rng);
      tgt.col(k) = comps[c].mean + chol[c].matrixL() * z;
    }
    const Vector m = density.target_mean();
    match_moments(tgt, m, density.target_second_moment() - m * m.transpose());
  } else {
    Vector x(d);
    for (Eigen::Index k = 0; k < nt; ++k) {
      for (int i = 0; i < d; ++i) x[i] = normal(rng);
      tgt.col(k) = x;
      tw[k] = density(x);
    }
  }
  return {prune(src, Vector::Ones(ns), 0.0, "source"), prune(tgt, tw, 0.0, "target")};
}

Matrix half_sq_dist(const Matrix& x, const Matrix& y) {
  Matrix c(x.cols(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    for (Eigen::Index i = 0; i < x.cols(); ++i) c(i, j) = 0.5 * (x.col(i) - y.col(j)).squaredNorm();
  return c;
}

// pi_ij = u_i K_ij v_j with K_ij = exp((f_i + g_j - c_ij) / eps); the
// potentials f, g carry log a, log b. Scalings are folded back into the
// potentials whenever they leave [1e-30, 1e30] and at every epsilon change.
class ScalingSolver {
 public:
  ScalingSolver(const DiscreteMeasure& a, const DiscreteMeasure& b)
      : a_(a.weights), b_(b.weights), log_a_(a.weights.array().log()), log_b_(b.weights.array().log()),
        cost_(half_sq_dist(a.points, b.points)), f_(Vector::Zero(a_.size())), g_(Vector::Zero(b_.size())) {}

  // Exact c-transform updates of f then g at the current epsilon.
  void log_updates() {
    for (Eigen::Index i = 0; i < f_.size(); ++i) {
      const auto row = (g_.transpose() - cost_.row(i)).array() / eps_;
      const double m = row.maxCoeff();
      f_[i] = eps_ * (log_a_[i] - m - std::log((row - m).exp().sum()));
    }
    for (Eigen::Index j = 0; j < g_.size(); ++j) {
      const auto col = (f_ - cost_.col(j)).array() / eps_;
      const double m = col.maxCoeff();
      g_[j] = eps_ * (log_b_[j] - m - std::log((col - m).exp().sum()));
    }
    rebuild_kernel();
  }

  void set_epsilon(double eps) {
    absorb();
    eps_ = eps;
    log_updates();
  }

  // Runs scaling iterations until the marginal error drops below tol.
  // Returns {iterations, final marginal error}.
  // An increase of the error between checks drops omega back to 1 for the
  // rest of the stage.
  std::pair<int, double> iterate(int max_iter, double tol, double omega) {
    double err = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iter; ++it) {
      kv_.noalias() = kernel_ * v_;
      update(u_, a_, kv_, log_a_, omega);
      ktu_.noalias() = kernel_.transpose() * u_;
      update(v_, b_, ktu_, log_b_, omega);
      if (!u_.allFinite() || !v_.allFinite() || u_.minCoeff() <= 0.0 || v_.minCoeff() <= 0.0) {
        fallback();
        continue;
      }
      if (u_.maxCoeff() > kAbsorb || v_.maxCoeff() > kAbsorb || u_.minCoeff() < 1.0 / kAbsorb ||
          v_.minCoeff() < 1.0 / kAbsorb) {
        absorb();
        rebuild_kernel();
        ++absorptions_;
      }
      if ((it + 1) % kCheckEvery == 0 || it + 1 == max_iter) {
        const double prev = err;
        err = marginal_error();
        if (err < tol) return {it + 1, err};
        if (omega != 1.0 && !(err < prev)) {
          omega = 1.0;
          ++relaxation_resets_;
        }
      }
    }
    return {it, err};
  }

  double marginal_error() {
    kv_.noalias() = kernel_ * v_;
    ktu_.noalias() = kernel_.transpose() * u_;
    return (u_.cwiseProduct(kv_) - a_).cwiseAbs().sum() + (v_.cwiseProduct(ktu_) - b_).cwiseAbs().sum();
  }

  // sum_ij pi_ij c_ij
  double transport_cost() const { return u_.dot(kernel_.cwiseProduct(cost_) * v_); }

  Vector source_potential() const { return f_ + eps_ * u_.array().log().matrix(); }
  Vector target_potential() const { return g_ + eps_ * v_.array().log().matrix(); }
  double epsilon() const { return eps_; }
  int fallbacks() const { return fallbacks_; }
  int absorptions() const { return absorptions_; }
  int relaxation_resets() const { return relaxation_resets_; }

 private:
  static constexpr double kAbsorb = 1e30;
  // Entries below e^-700 are zeroed; subnormals stall the matrix-vector products.
  static constexpr double kUnderflow = -700.0;
  static constexpr int kCheckEvery = 5;

  static void update(Vector& s, const Vector& w, const Vector& k, const Vector& log_w, double omega) {
    if (omega == 1.0) {
      s = w.cwiseQuotient(k);
      return;
    }
    s = ((1.0 - omega) * s.array().log() + omega * (log_w.array() - k.array().log())).exp();
  }

  void absorb() {
    if (u_.size() == 0) return;
    f_ += eps_ * u_.array().log().matrix();
    g_ += eps_ * v_.array().log().matrix();
    u_.setOnes();
    v_.setOnes();
  }

  void fallback() {
    ++fallbacks_;
    u_.setOnes();
    v_.setOnes();
    log_updates();
  }

  void rebuild_kernel() {
    kernel_.resize(cost_.rows(), cost_.cols());
    for (Eigen::Index j = 0; j < cost_.cols(); ++j)
      kernel_.col(j) = ((f_.array() + g_[j] - cost_.col(j).array()) / eps_)
                           .unaryExpr([](double e) { return e < kUnderflow ? 0.0 : std::exp(e); });
    u_ = Vector::Ones(a_.size());
    v_ = Vector::Ones(b_.size());
  }

  Vector a_, b_, log_a_, log_b_;
  Matrix cost_;
  Matrix kernel_;
  Vector f_, g_, u_, v_, kv_, ktu_;
  double eps_ = 1.0;
  int fallbacks_ = 0;
  int absorptions_ = 0;
  int relaxation_resets_ = 0;
};

}  // namespace

constexpr double kWarmStartTol = 1e-5;

TransportSolution solve_entropic(const DensityModel& density, const QuadratureGrid& grid, const SinkhornParams& p) {
  const std::vector<double> schedule = p.schedule();
  auto [src, tgt] = build_marginals(density, grid, p);

  ScalingSolver solver(src, tgt);
  SolverDiagnostics diag;
  double err = std::numeric_limits<double>::infinity();
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eps = schedule[stage];
    // Intermediate stages only warm-start the next one.
    const double tol = stage + 1 == schedule.size() ? p.marginal_tol : std::max(p.marginal_tol, kWarmStartTol);
    solver.set_epsilon(eps);
    auto [iters, e] = solver.iterate(p.max_iterations, tol, p.relaxation);
    diag.iterations += iters;
    ++diag.stages;
    err = e;
  }
  diag.marginal_error = err;
  diag.absorptions = solver.absorptions();
  diag.fallbacks = solver.fallbacks();
  diag.relaxation_resets = solver.relaxation_resets();
  diag.source_atoms = static_cast<std::size_t>(src.points.cols());
  diag.target_atoms = static_cast<std::size_t>(tgt.points.cols());
  diag.converged = err <= p.marginal_tol;
  if (!diag.converged) diag.note = "marginal tolerance not reached at the final epsilon; best iterate returned";

  TransportSolution sol;
  sol.method = TransportMethod::entropic;
  sol.dim = density.dim();
  sol.source_potential = solver.source_potential();
  sol.target_potential = solver.target_potential();
  sol.epsilon_final = solver.epsilon();
  sol.model = std::make_shared<EntropicModel>(src.points, *sol.source_potential, tgt.points, *sol.target_potential,
                                              solver.epsilon());
  sol.wasserstein_sq = 2.0 * solver.transport_cost();
  sol.diagnostics = diag;
  sol.source_support = QuadratureGrid{sol.dim, p.source == SampleSource::quadrature ? grid.degree : 0, src.points,
                                      src.weights};
  // Stein identity against the coupled source measure.
  sol.mean_hessian = mean_potential_hessian(sol, *sol.source_support);
  return sol;
}

}  // namespace gpos
