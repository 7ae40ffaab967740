#pragma once

// Wiener-chaos decomposition at finite dimension.

#include "gpos/density.hpp"
#include "gpos/gaussian_core.hpp"

#include <vector>

namespace gpos {

enum class MomentProvenance { closed_form, quadrature, both };

std::string to_string(MomentProvenance p);

// (E[L], E[grad L], E[hess L]). The last two are the first- and
// second-chaos kernels of L.
struct ChaosMoments {
  double mass = 1.0;
  Vector m1;
  Matrix m2;  // symmetric
  MomentProvenance provenance = MomentProvenance::quadrature;
  // Largest entrywise gap between the quadrature and closed-form routes
  // (0 unless provenance == both).
  double route_gap = 0.0;
  bool converged = true;
  int grid_degree = 0;

  int dim() const { return static_cast<int>(m1.size()); }
};

inline constexpr double kRouteAgreementTol = 1e-6;

ChaosMoments make_moments(double mass, Vector m1, Matrix m2, MomentProvenance provenance);

// Stein route: E[grad L] = E[L x], E[hess L] = E[L (x x^T - I)]. For
// closed-form families the analytic nu-moments are also computed and
// reported (provenance = both); `converged` is false when the two routes
// disagree by more than kRouteAgreementTol.
ChaosMoments stroock_moments(const DensityModel& density, const QuadratureGrid& grid);

// Quadrature route only.
ChaosMoments quadrature_moments(const DensityModel& density, const QuadratureGrid& grid);

// Closed-form route only (m1 = mean(nu), m2 = E_nu[x x^T] - I).
ChaosMoments analytic_moments(const DensityModel& density);

// Quadrature-route moments with per-axis degree doubled from `start_degree`
// until every entry changes by less than rtol.
ChaosMoments adaptive_moments(const DensityModel& density, const AdaptiveOptions& opts = {});

struct ChaosTerm {
  MultiIndex alpha;
  double coefficient = 0.0;
};

// L ~ sum_{|alpha| <= N} c_alpha H_alpha with c_alpha = E[L H_alpha] / alpha!.
struct ChaosExpansion {
  int dim = 0;
  int max_degree = 0;
  std::vector<ChaosTerm> terms;  // lexicographic in alpha

  double coefficient(const MultiIndex& alpha) const;
  // sum_alpha c_alpha^2 alpha!
  double parseval_sum() const;
};

inline constexpr int kDefaultChaosDegree = 8;

ChaosExpansion chaos_coefficients(const ScalarFn& f, int dim, const QuadratureGrid& grid, int max_degree);
ChaosExpansion chaos_coefficients(const DensityModel& density, const QuadratureGrid& grid,
                                  int max_degree = kDefaultChaosDegree);

double reconstruct(const ChaosExpansion& expansion, const Vector& x);

// x -> (<K x, x> - trace K) / 2 + offset, i.e. delta^2(K)/2 + offset.
struct QuadraticForm {
  Matrix kernel;
  double offset = 0.0;

  double operator()(const Vector& x) const;
  int dim() const { return static_cast<int>(kernel.rows()); }
};

QuadraticForm make_quadratic_form(const Matrix& kernel, double offset = 0.0);

// Projection on the second chaos divided by the mass: kernel m2 / mass.
QuadraticForm second_chaos_form(const ChaosMoments& moments);

// lambda_min(K) + r; the form is r-convex iff the margin is >= -tol.
double r_convexity(const QuadraticForm& form, double r);

}  // namespace gpos
