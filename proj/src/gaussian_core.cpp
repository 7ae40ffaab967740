#include "gpos/gaussian_core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gpos {

GaussianSpace::GaussianSpace(int dim) : dim_(dim) {
  if (dim < 1) throw DomainError("GaussianSpace: dim must be >= 1");
}

double GaussianSpace::inner(const Vector& h, const Vector& k) const {
  require_dim(h.size(), dim_, "GaussianSpace::inner");
  require_dim(k.size(), dim_, "GaussianSpace::inner");
  return h.dot(k);
}

double GaussianSpace::norm(const Vector& h) const { return std::sqrt(inner(h, h)); }

// ---------------------------------------------------------------------------
// Multi-indices

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int a : entries_) {
    if (a < 0) throw DomainError("MultiIndex: negative entry");
    degree_ += a;
    factorial_ *= std::tgamma(a + 1.0);
  }
}

std::string MultiIndex::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(entries_[i]);
  }
  return out;
}

namespace {
void enumerate(int dim, int remaining, std::vector<int>& prefix, std::vector<MultiIndex>& out) {
  if (static_cast<int>(prefix.size()) == dim) {
    out.emplace_back(prefix);
    return;
  }
  for (int a = 0; a <= remaining; ++a) {
    prefix.push_back(a);
    enumerate(dim, remaining - a, prefix, out);
    prefix.pop_back();
  }
}
}  // namespace

std::vector<MultiIndex> multi_indices_up_to(int dim, int max_degree) {
  if (dim < 1) throw DomainError("multi_indices_up_to: dim must be >= 1");
  if (max_degree < 0) throw DomainError("multi_indices_up_to: negative degree");
  std::vector<MultiIndex> out;
  std::vector<int> prefix;
  enumerate(dim, max_degree, prefix, out);
  return out;
}

// ---------------------------------------------------------------------------
// Hermite polynomials

double hermite_1d(int n, double t) {
  if (n < 0) throw DomainError("hermite_1d: negative order");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = t;
  for (int k = 1; k < n; ++k) {
    const double next = t * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::vector<double> hermite_table(int n, double t) {
  if (n < 0) throw DomainError("hermite_table: negative order");
  std::vector<double> h(static_cast<std::size_t>(n) + 1);
  h[0] = 1.0;
  if (n >= 1) h[1] = t;
  for (int k = 1; k < n; ++k) h[k + 1] = t * h[k] - k * h[k - 1];
  return h;
}

double hermite(const MultiIndex& alpha, const Vector& x) {
  require_dim(x.size(), static_cast<Eigen::Index>(alpha.size()), "hermite");
  double out = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) out *= hermite_1d(alpha[i], x[static_cast<Eigen::Index>(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// Gauss-Hermite rules

namespace {

struct OrthonormalEval {
  double p_n;       // scaled p_n(x)
  double p_nm1;     // scaled p_{n-1}(x)
  double log_sum;   // log sum_{k<n} p_k(x)^2 (unscaled)
};

// Orthonormal recurrence p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1),
// rescaled on the fly so large nodes of high-degree rules do not overflow.
OrthonormalEval orthonormal_eval(int n, double x) {
  double prev = 0.0;
  double cur = 1.0;
  double sum = 0.0;
  double log_scale = 0.0;  // true values = scaled * exp(log_scale)
  for (int k = 0; k < n; ++k) {
    sum += cur * cur;
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(k + 1.0);
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e100) {
      prev *= 1e-100;
      cur *= 1e-100;
      sum *= 1e-200;
      log_scale += 100.0 * std::log(10.0);
    }
  }
  return {cur, prev, std::log(sum) + 2.0 * log_scale};
}

}  // namespace

GaussHermiteRule gauss_hermite_rule(int n) {
  if (n < 1) throw DomainError("gauss_hermite_rule: degree must be >= 1");
  GaussHermiteRule rule;
  if (n == 1) {
    rule.nodes = Vector::Zero(1);
    rule.weights = Vector::Ones(1);
    return rule;
  }
  // Golub-Welsch: eigenvalues of the Jacobi matrix of the probabilists' family.
  Vector diag = Vector::Zero(n);
  Vector sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Vector x = solver.eigenvalues();

  std::vector<double> nodes(static_cast<std::size_t>(n));
  std::vector<double> log_w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double xi = x[i];
    for (int it = 0; it < 3; ++it) {
      const OrthonormalEval e = orthonormal_eval(n, xi);
      const double step = e.p_n / (std::sqrt(static_cast<double>(n)) * e.p_nm1);
      if (!std::isfinite(step)) break;
      xi -= step;
    }
    nodes[static_cast<std::size_t>(i)] = xi;
  }
  // Exact symmetry about the origin.
  for (int i = 0; i < n / 2; ++i) {
    const double m = 0.5 * (nodes[static_cast<std::size_t>(n - 1 - i)] - nodes[static_cast<std::size_t>(i)]);
    nodes[static_cast<std::size_t>(i)] = -m;
    nodes[static_cast<std::size_t>(n - 1 - i)] = m;
  }
  if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  for (int i = 0; i < n; ++i) log_w[static_cast<std::size_t>(i)] = -orthonormal_eval(n, nodes[static_cast<std::size_t>(i)]).log_sum;

  // Christoffel weights; drop those that underflow.
  const double log_max = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> kept_x, kept_w;
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(log_w[static_cast<std::size_t>(i)] - log_max);
    if (w > 0.0 && log_w[static_cast<std::size_t>(i)] > -700.0) {
      kept_x.push_back(nodes[static_cast<std::size_t>(i)]);
      kept_w.push_back(w);
    }
  }
  const double total = std::accumulate(kept_w.begin(), kept_w.end(), 0.0);
  rule.nodes = Eigen::Map<Vector>(kept_x.data(), static_cast<Eigen::Index>(kept_x.size()));
  rule.weights = Eigen::Map<Vector>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size())) / total;
  return rule;
}

namespace {

struct LegendreRule {
  static constexpr int kOrder = 8;
  Vector t, w;  // on [-1, 1]
};

const LegendreRule& legendre8() {
  static const LegendreRule rule = [] {
    constexpr int n = LegendreRule::kOrder;
    Matrix jac = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(jac);
    LegendreRule r;
    r.t = solver.eigenvalues();
    r.w = 2.0 * solver.eigenvectors().row(0).transpose().array().square();
    return r;
  }();
  return rule;
}

void check_panel_args(int panels, double half_width, const char* who) {
  if (panels < 1) throw DomainError(std::string(who) + ": panels must be >= 1");
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw DomainError(std::string(who) + ": half_width must be positive and finite");
  }
}

// Appends the weighted nodes of [a, b] to xs/ws; returns the panel estimate of int f * phi.
double panel(double a, double b, const std::function<double(double)>* f, std::vector<double>* xs,
             std::vector<double>* ws) {
  const LegendreRule& r = legendre8();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < LegendreRule::kOrder; ++i) {
    const double x = mid + half * r.t[i];
    const double w = half * r.w[i] * std::exp(-0.5 * x * x);
    if (f) acc += w * (*f)(x);
    if (xs) {
      xs->push_back(x);
      ws->push_back(w);
    }
  }
  return acc;
}

void refine(double a, double b, double whole, const std::function<double(double)>& f, double tol, int depth,
            std::vector<double>& xs, std::vector<double>& ws) {
  const double m = 0.5 * (a + b);
  const double left = panel(a, m, &f, nullptr, nullptr);
  const double right = panel(m, b, &f, nullptr, nullptr);
  if (!std::isfinite(left + right)) throw NumericalError("build_adaptive_panel_grid_1d: non-finite integrand");
  if (depth <= 0 || std::abs(left + right - whole) <= tol) {
    panel(a, m, nullptr, &xs, &ws);
    panel(m, b, nullptr, &xs, &ws);
    return;
  }
  refine(a, m, left, f, 0.5 * tol, depth - 1, xs, ws);
  refine(m, b, right, f, 0.5 * tol, depth - 1, xs, ws);
}

QuadratureGrid finish_panel_grid(std::vector<double>& xs, std::vector<double>& ws) {
  QuadratureGrid grid;
  grid.dim = 1;
  grid.degree = 0;
  grid.nodes = Eigen::Map<Matrix>(xs.data(), 1, static_cast<Eigen::Index>(xs.size()));
  grid.weights = Eigen::Map<Vector>(ws.data(), static_cast<Eigen::Index>(ws.size()));
  grid.weights /= grid.weights.sum();
  return grid;
}

}  // namespace

QuadratureGrid build_panel_grid_1d(int panels, double half_width) {
  check_panel_args(panels, half_width, "build_panel_grid_1d");
  const double h = 2.0 * half_width / panels;
  std::vector<double> xs, ws;
  for (int p = 0; p < panels; ++p) panel(-half_width + p * h, -half_width + (p + 1) * h, nullptr, &xs, &ws);
  return finish_panel_grid(xs, ws);
}

QuadratureGrid build_adaptive_panel_grid_1d(const std::function<double(double)>& f, double tol, int panels,
                                            double half_width, int max_depth) {
  check_panel_args(panels, half_width, "build_adaptive_panel_grid_1d");
  if (!(tol > 0.0)) throw DomainError("build_adaptive_panel_grid_1d: tol must be positive");
  const double h = 2.0 * half_width / panels;
  std::vector<double> xs, ws;
  for (int p = 0; p < panels; ++p) {
    const double a = -half_width + p * h;
    const double b = a + h;
    refine(a, b, panel(a, b, &f, nullptr, nullptr), f, tol / panels, max_depth, xs, ws);
  }
  return finish_panel_grid(xs, ws);
}

QuadratureGrid build_grid(int dim, int degree, std::size_t node_cap) {
  if (dim < 1) throw DomainError("build_grid: dim must be >= 1");
  if (degree < 1) throw DomainError("build_grid: degree must be >= 1");
  const double count = std::pow(static_cast<double>(degree), dim);
  if (count > static_cast<double>(node_cap)) {
    throw NumericalError("build_grid: " + std::to_string(degree) + "^" + std::to_string(dim) +
                         " nodes exceeds the node cap " + std::to_string(node_cap));
  }
  const GaussHermiteRule rule = gauss_hermite_rule(degree);
  const auto m = static_cast<std::size_t>(rule.nodes.size());
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= m;

  QuadratureGrid grid;
  grid.dim = dim;
  grid.degree = degree;
  std::vector<double> coords;
  std::vector<double> weights;
  coords.reserve(total * static_cast<std::size_t>(dim));
  weights.reserve(total);
  std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
  for (std::size_t k = 0; k < total; ++k) {
    // Last axis varies fastest, so node order is lexicographic.
    std::size_t rem = k;
    for (int i = dim - 1; i >= 0; --i) {
      idx[static_cast<std::size_t>(i)] = rem % m;
      rem /= m;
    }
    double w = 1.0;
    for (int i = 0; i < dim; ++i) w *= rule.weights[static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])];
    if (w <= 0.0) continue;
    for (int i = 0; i < dim; ++i) coords.push_back(rule.nodes[static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)])]);
    weights.push_back(w);
  }
  const auto n = static_cast<Eigen::Index>(weights.size());
  grid.nodes = Eigen::Map<Matrix>(coords.data(), dim, n);
  grid.weights = Eigen::Map<Vector>(weights.data(), n);
  grid.weights /= pairwise_sum(weights.size(), [&](std::size_t k) { return weights[k]; }, 0.0);
  return grid;
}

// ---------------------------------------------------------------------------
// Expectations

namespace {
double checked(double v, std::size_t k) {
  if (!std::isfinite(v)) throw NumericalError("expect: non-finite value at node " + std::to_string(k));
  return v;
}
}  // namespace

double expect(const ScalarFn& f, const QuadratureGrid& grid) {
  Vector x(grid.dim);
  return pairwise_sum(
      grid.size(),
      [&](std::size_t k) {
        x = grid.node(k);
        return grid.weights[static_cast<Eigen::Index>(k)] * checked(f(x), k);
      },
      0.0);
}

double expect(const ScalarField& f, const QuadratureGrid& grid) { return expect(f.value, grid); }

Vector expect(const VectorField& f, const QuadratureGrid& grid) {
  Vector x(grid.dim);
  const Vector zero = Vector::Zero(grid.dim);
  return pairwise_sum(
      grid.size(),
      [&](std::size_t k) -> Vector {
        x = grid.node(k);
        Vector v = f(x);
        require_dim(v.size(), grid.dim, "expect");
        for (Eigen::Index i = 0; i < v.size(); ++i) checked(v[i], k);
        return grid.weights[static_cast<Eigen::Index>(k)] * v;
      },
      zero);
}

Matrix expect_matrix(const MatrixFn& f, const QuadratureGrid& grid, int rows, int cols) {
  Vector x(grid.dim);
  const Matrix zero = Matrix::Zero(rows, cols);
  return pairwise_sum(
      grid.size(),
      [&](std::size_t k) -> Matrix {
        x = grid.node(k);
        Matrix v = f(x);
        if (v.rows() != rows || v.cols() != cols) throw DimensionError("expect_matrix: shape mismatch");
        for (Eigen::Index i = 0; i < v.size(); ++i) checked(v.data()[i], k);
        return grid.weights[static_cast<Eigen::Index>(k)] * v;
      },
      zero);
}

AdaptiveEstimate expect_adaptive(const ScalarFn& f, int dim, const AdaptiveOptions& opts) {
  AdaptiveEstimate est;
  int degree = std::max(1, opts.start_degree);
  est.value = expect(f, build_grid(dim, degree, opts.node_cap));
  est.degree = degree;
  est.last_change = std::numeric_limits<double>::infinity();
  while (true) {
    const int next = 2 * degree;
    if (next > opts.max_degree || std::pow(static_cast<double>(next), dim) > static_cast<double>(opts.node_cap)) {
      return est;
    }
    const double v = expect(f, build_grid(dim, next, opts.node_cap));
    est.last_change = std::abs(v - est.value) / std::max(1.0, std::abs(v));
    est.value = v;
    est.degree = next;
    degree = next;
    if (est.last_change < opts.rtol) {
      est.converged = true;
      return est;
    }
  }
}

// ---------------------------------------------------------------------------
// Wick exponential and Ornstein-Uhlenbeck

double wick_exp(const Vector& h, const Vector& x) {
  require_dim(x.size(), h.size(), "wick_exp");
  return std::exp(h.dot(x) - 0.5 * h.squaredNorm());
}

ScalarField wick_field(const Vector& h) {
  ScalarField f;
  f.value = [h](const Vector& x) { return wick_exp(h, x); };
  f.gradient = [h](const Vector& x) -> Vector { return wick_exp(h, x) * h; };
  f.hessian = [h](const Vector& x) -> Matrix { return wick_exp(h, x) * (h * h.transpose()); };
  return f;
}

double ou_apply(const ScalarFn& f, double t, const Vector& x, const QuadratureGrid& grid) {
  if (!(t >= 0.0)) throw DomainError("ou_apply: t must be >= 0");
  if (t == 0.0) return f(x);
  require_dim(x.size(), grid.dim, "ou_apply");
  const double a = std::exp(-t);
  const double b = std::sqrt(-std::expm1(-2.0 * t));
  const Vector center = a * x;
  Vector y(grid.dim);
  return pairwise_sum(
      grid.size(),
      [&](std::size_t k) {
        y = center + b * grid.node(k);
        return grid.weights[static_cast<Eigen::Index>(k)] * checked(f(y), k);
      },
      0.0);
}

double ou_generator(const ScalarField& f, const Vector& x) {
  const Vector g = f.gradient ? (*f.gradient)(x) : numeric_gradient(f.value, x);
  const Matrix h = f.hessian ? (*f.hessian)(x) : numeric_hessian(f.value, x);
  require_dim(g.size(), x.size(), "ou_generator");
  const double out = x.dot(g) - h.trace();
  if (!std::isfinite(out)) throw NumericalError("ou_generator: non-finite derivative");
  return out;
}

// ---------------------------------------------------------------------------
// Finite differences

double default_fd_step(const Vector& x) {
  const double inf_norm = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  return 1e-4 * std::max(1.0, inf_norm);
}

namespace {
double stencil(const ScalarFn& f, const Vector& x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw NumericalError("numeric_derivatives: non-finite stencil value");
  return v;
}
}  // namespace

Vector numeric_gradient(const ScalarFn& f, const Vector& x, double step) {
  const double h = step > 0.0 ? step : default_fd_step(x);
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = stencil(f, xp);
    xp[i] = x[i] - h;
    const double fm = stencil(f, xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Matrix numeric_hessian(const ScalarFn& f, const Vector& x, double step) {
  const double h = step > 0.0 ? step : default_fd_step(x);
  const Eigen::Index d = x.size();
  Matrix out(d, d);
  const double f0 = stencil(f, x);
  Vector xp = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    xp[i] = x[i] + h;
    const double fp = stencil(f, xp);
    xp[i] = x[i] - h;
    const double fm = stencil(f, xp);
    xp[i] = x[i];
    out(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      auto at = [&](double si, double sj) {
        xp[i] = x[i] + si * h;
        xp[j] = x[j] + sj * h;
        const double v = stencil(f, xp);
        xp[i] = x[i];
        xp[j] = x[j];
        return v;
      };
      out(i, j) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h);
      out(j, i) = out(i, j);
    }
  }
  return 0.5 * (out + out.transpose());
}

Matrix numeric_jacobian(const VectorFn& f, const Vector& x, double step) {
  const double h = step > 0.0 ? step : default_fd_step(x);
  const Vector f0 = f(x);
  Matrix out(f0.size(), x.size());
  Vector xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + h;
    const Vector fp = f(xp);
    xp[j] = x[j] - h;
    const Vector fm = f(xp);
    xp[j] = x[j];
    out.col(j) = (fp - fm) / (2.0 * h);
  }
  if (!out.allFinite()) throw NumericalError("numeric_jacobian: non-finite stencil value");
  return out;
}

}  // namespace gpos
