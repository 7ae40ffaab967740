#pragma once

// Numerical checks of the second-chaos operator inequality, its measure
// corollaries and the Wick-exponential discriminant bound.

#include "gpos/chaos.hpp"
#include "gpos/measures.hpp"
#include "gpos/transport.hpp"

#include <string>
#include <vector>

namespace gpos {

// Named tolerances; the names double as configuration keys.
struct Tolerances {
  double margin = 1e-8;
  double entropic_margin = 1e-3;
  double identity = 1e-5;
  double entropic_identity = 5e-2;
  double monge_ampere = 1e-6;
  double entropic_monge_ampere = 1e-1;
  double wasserstein = 1e-6;
  double entropic_wasserstein = 5e-2;
  double inverse = 1e-6;
  double entropic_inverse = 5e-2;
  double discriminant_slack = 1e-8;
  double discriminant_agreement = 1e-5;
  double trend = 1e-3;
  double chaos = 1e-8;
  double convexity = 1e-8;

  double margin_for(TransportMethod m) const { return is_closed_form(m) ? margin : entropic_margin; }
  double identity_for(TransportMethod m) const { return is_closed_form(m) ? identity : entropic_identity; }
  double monge_ampere_for(TransportMethod m) const { return is_closed_form(m) ? monge_ampere : entropic_monge_ampere; }
  double wasserstein_for(TransportMethod m) const { return is_closed_form(m) ? wasserstein : entropic_wasserstein; }
  double inverse_for(TransportMethod m) const { return is_closed_form(m) ? inverse : entropic_inverse; }

  // Pointer to the field called `name`, or nullptr.
  double* find(const std::string& name);
  std::vector<std::pair<std::string, double>> entries() const;
};

// max-norm of E[grad phi] - E[grad L] / E[L].
double first_order_identity(const ChaosMoments& moments, const TransportSolution& sol, const QuadratureGrid& grid);
// max-norm of E[<grad phi, x>^{(2)}] term: E[hess phi + grad phi grad phi^T] - E[hess L] / E[L].
double second_order_identity(const ChaosMoments& moments, const TransportSolution& sol, const QuadratureGrid& grid);

struct OperatorSides {
  Matrix lhs;  // (1 / 2m) (m2 - m1 m1^T / m)
  Matrix rhs;  // E[hess phi]
  double margin = 0.0;  // lambda_min(lhs - rhs)
};

OperatorSides theorem_sides(const ChaosMoments& moments, const TransportSolution& sol);
double theorem_margin(const ChaosMoments& moments, const TransportSolution& sol);

// lambda_min(I + m2 / m - m1 m1^T / m^2).
double proposition_margin(const ChaosMoments& moments);

struct MeasureMargins {
  double margin = 0.0;             // lambda_min(I + M2 / m(W) - M1 M1^T / m(W)^2)
  double convexity_margin = 0.0;   // 1-convexity of the form built on M2 / m(W)
};

MeasureMargins measure_corollary_margin(const MomentFunctionals& mf);

struct TrendPoint {
  double t = 0.0;
  double margin = 0.0;
  TransportMethod method = TransportMethod::gaussian_linear;
  bool converged = true;
};

// Operator margin for P_t m along a list of t values. Uses quantile transport
// in dimension one and entropic transport otherwise.
std::vector<TrendPoint> measure_transport_margin(const PositiveMeasure& m, const std::vector<double>& ts,
                                                 const QuadratureGrid& grid, const SinkhornParams& params,
                                                 const QuadratureGrid* entropic_grid = nullptr);

struct MongeAmpereResult {
  double residual = 0.0;  // sup |L(T(x)) Lambda(x) - 1| over interior nodes
  std::size_t nodes = 0;
  Vector argmax;
};

// Interior nodes: every coordinate within the central 90% of gamma_1.
MongeAmpereResult monge_ampere_residual(const DensityModel& density, const TransportSolution& sol,
                                        const QuadratureGrid& grid);

struct DiscriminantResult {
  double value = 0.0;           // l(0)
  double first = 0.0;           // l'(0) / l(0) from moments
  double second = 0.0;          // l''(0) / l(0) from moments
  double first_fd = 0.0;        // finite-difference counterparts
  double second_fd = 0.0;
  double agreement = 0.0;       // max gap between the two routes
  double slack = 0.0;           // |h|^2 + l''/l - (l'/l)^2
};

// l(t) = E[L exp(t<h, x> - t^2 |h|^2 / 2)].
DiscriminantResult discriminant_check(const DensityModel& density, const ChaosMoments& moments, const Vector& h,
                                      const QuadratureGrid& grid);

}  // namespace gpos
