#include "gpos/chaos.hpp"

#include "gpos/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace gpos {

std::string to_string(MomentProvenance p) {
  switch (p) {
    case MomentProvenance::closed_form: return "closed_form";
    case MomentProvenance::quadrature: return "quadrature";
    case MomentProvenance::both: return "both";
  }
  return "unknown";
}

ChaosMoments make_moments(double mass, Vector m1, Matrix m2, MomentProvenance provenance) {
  require_dim(m2.rows(), m1.size(), "ChaosMoments");
  require_dim(m2.cols(), m1.size(), "ChaosMoments");
  ChaosMoments m;
  m.mass = mass;
  m.m1 = std::move(m1);
  m.m2 = linalg::symmetrize(m2);
  m.provenance = provenance;
  return m;
}

namespace {

struct MomentSums {
  double mass = 0.0;
  Vector first;
  Matrix second;  // E[L x x^T]

  MomentSums& operator+=(const MomentSums& o) {
    mass += o.mass;
    first += o.first;
    second += o.second;
    return *this;
  }
};

double max_gap(const ChaosMoments& a, const ChaosMoments& b) {
  double gap = std::abs(a.mass - b.mass);
  gap = std::max(gap, (a.m1 - b.m1).cwiseAbs().maxCoeff());
  gap = std::max(gap, linalg::max_abs(a.m2 - b.m2));
  return gap;
}

}  // namespace

ChaosMoments quadrature_moments(const DensityModel& density, const QuadratureGrid& grid) {
  require_dim(grid.dim, density.dim(), "stroock_moments");
  const int d = grid.dim;
  const MomentSums zero{0.0, Vector::Zero(d), Matrix::Zero(d, d)};
  Vector x(d);
  MomentSums acc = pairwise_sum(
      grid.size(),
      [&](std::size_t k) {
        x = grid.node(k);
        const double v = density(x);
        if (!std::isfinite(v)) throw NumericalError("stroock_moments: non-finite density at node " + std::to_string(k));
        if (v < 0.0) throw DomainError("stroock_moments: negative density at node " + std::to_string(k));
        const double wl = grid.weights[static_cast<Eigen::Index>(k)] * v;
        return MomentSums{wl, wl * x, wl * (x * x.transpose())};
      },
      zero);
  ChaosMoments m = make_moments(acc.mass, acc.first, acc.second - acc.mass * Matrix::Identity(d, d),
                                MomentProvenance::quadrature);
  m.grid_degree = grid.degree;
  return m;
}

ChaosMoments analytic_moments(const DensityModel& density) {
  if (!density.has_closed_form()) throw DomainError("analytic_moments: family has no closed form");
  const int d = density.dim();
  return make_moments(1.0, density.target_mean(), density.target_second_moment() - Matrix::Identity(d, d),
                      MomentProvenance::closed_form);
}

ChaosMoments stroock_moments(const DensityModel& density, const QuadratureGrid& grid) {
  ChaosMoments quad = quadrature_moments(density, grid);
  if (!density.has_closed_form()) return quad;
  ChaosMoments exact = analytic_moments(density);
  exact.provenance = MomentProvenance::both;
  exact.route_gap = max_gap(exact, quad);
  exact.converged = exact.route_gap <= kRouteAgreementTol;
  exact.grid_degree = grid.degree;
  return exact;
}

ChaosMoments adaptive_moments(const DensityModel& density, const AdaptiveOptions& opts) {
  int degree = std::max(1, opts.start_degree);
  ChaosMoments cur = quadrature_moments(density, build_grid(density.dim(), degree, opts.node_cap));
  cur.converged = false;
  while (true) {
    const int next = 2 * degree;
    if (next > opts.max_degree ||
        std::pow(static_cast<double>(next), density.dim()) > static_cast<double>(opts.node_cap)) {
      return cur;
    }
    ChaosMoments nxt = quadrature_moments(density, build_grid(density.dim(), next, opts.node_cap));
    const double scale = std::max({1.0, std::abs(nxt.mass), nxt.m1.cwiseAbs().maxCoeff(), linalg::max_abs(nxt.m2)});
    const bool done = max_gap(cur, nxt) < opts.rtol * scale;
    cur = std::move(nxt);
    degree = next;
    if (done) {
      cur.converged = true;
      return cur;
    }
  }
}

// ---------------------------------------------------------------------------
// Expansion

double ChaosExpansion::coefficient(const MultiIndex& alpha) const {
  auto it = std::lower_bound(terms.begin(), terms.end(), alpha,
                             [](const ChaosTerm& t, const MultiIndex& a) { return t.alpha < a; });
  if (it == terms.end() || !(it->alpha == alpha)) return 0.0;
  return it->coefficient;
}

double ChaosExpansion::parseval_sum() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.coefficient * t.coefficient * t.alpha.factorial();
  return s;
}

ChaosExpansion chaos_coefficients(const ScalarFn& f, int dim, const QuadratureGrid& grid, int max_degree) {
  require_dim(grid.dim, dim, "chaos_coefficients");
  if (max_degree < 0) throw DomainError("chaos_coefficients: negative degree");
  if (grid.degree < max_degree + 2) {
    throw DomainError("chaos_coefficients: grid degree " + std::to_string(grid.degree) + " < N + 2 = " +
                      std::to_string(max_degree + 2));
  }
  ChaosExpansion e;
  e.dim = dim;
  e.max_degree = max_degree;
  const std::vector<MultiIndex> indices = multi_indices_up_to(dim, max_degree);
  const auto count = static_cast<Eigen::Index>(indices.size());

  Vector x(dim);
  std::vector<std::vector<double>> tables(static_cast<std::size_t>(dim));
  const Vector sums = pairwise_sum(
      grid.size(),
      [&](std::size_t k) -> Vector {
        x = grid.node(k);
        const double v = f(x);
        if (!std::isfinite(v)) throw NumericalError("chaos_coefficients: non-finite value at node " + std::to_string(k));
        for (int i = 0; i < dim; ++i) tables[static_cast<std::size_t>(i)] = hermite_table(max_degree, x[i]);
        Vector row(count);
        const double wv = grid.weights[static_cast<Eigen::Index>(k)] * v;
        for (Eigen::Index j = 0; j < count; ++j) {
          const MultiIndex& a = indices[static_cast<std::size_t>(j)];
          double h = 1.0;
          for (int i = 0; i < dim; ++i) h *= tables[static_cast<std::size_t>(i)][static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
          row[j] = wv * h;
        }
        return row;
      },
      Vector::Zero(count));
  e.terms.reserve(indices.size());
  for (Eigen::Index j = 0; j < count; ++j) {
    const MultiIndex& a = indices[static_cast<std::size_t>(j)];
    e.terms.push_back({a, sums[j] / a.factorial()});
  }
  return e;
}

ChaosExpansion chaos_coefficients(const DensityModel& density, const QuadratureGrid& grid, int max_degree) {
  density.validate_on(grid);
  return chaos_coefficients([&](const Vector& x) { return density(x); }, density.dim(), grid, max_degree);
}

double reconstruct(const ChaosExpansion& expansion, const Vector& x) {
  require_dim(x.size(), expansion.dim, "reconstruct");
  std::vector<std::vector<double>> tables(static_cast<std::size_t>(expansion.dim));
  for (int i = 0; i < expansion.dim; ++i) tables[static_cast<std::size_t>(i)] = hermite_table(expansion.max_degree, x[i]);
  double s = 0.0;
  for (const auto& t : expansion.terms) {
    double h = 1.0;
    for (int i = 0; i < expansion.dim; ++i) h *= tables[static_cast<std::size_t>(i)][static_cast<std::size_t>(t.alpha[static_cast<std::size_t>(i)])];
    s += t.coefficient * h;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Quadratic forms

double QuadraticForm::operator()(const Vector& x) const {
  require_dim(x.size(), kernel.rows(), "QuadraticForm");
  return 0.5 * (x.dot(kernel * x) - kernel.trace()) + offset;
}

QuadraticForm make_quadratic_form(const Matrix& kernel, double offset) {
  require_dim(kernel.rows(), kernel.cols(), "QuadraticForm");
  if (linalg::symmetry_defect(kernel) > 1e-12 * std::max(1.0, linalg::max_abs(kernel))) {
    throw DomainError("QuadraticForm: kernel must be symmetric");
  }
  return QuadraticForm{linalg::symmetrize(kernel), offset};
}

QuadraticForm second_chaos_form(const ChaosMoments& moments) {
  if (!(moments.mass > 0.0)) throw DomainError("second_chaos_form: mass must be positive");
  return make_quadratic_form(moments.m2 / moments.mass, 0.0);
}

double r_convexity(const QuadraticForm& form, double r) { return linalg::min_eigenvalue(form.kernel) + r; }

}  // namespace gpos
