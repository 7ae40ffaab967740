#pragma once

// Monge-Kantorovitch transport from gamma_d to nu = L gamma_d with
// quadratic cost |x - y|^2. Maps are represented as T = I + grad phi.

#include "gpos/density.hpp"
#include "gpos/gaussian_core.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gpos {

enum class TransportMethod { quantile_1d, gaussian_linear, entropic };

std::string to_string(TransportMethod m);

inline bool is_closed_form(TransportMethod m) { return m != TransportMethod::entropic; }

enum class SampleSource { quadrature, monte_carlo };

// Quadrature-mode target atoms: the source grid reweighted by L, or (closed-form
// families) the grid pushed through each Gaussian component of nu.
enum class TargetAtoms { reweighted, pushforward };

struct SinkhornParams {
  double epsilon_start = 1.0;
  double epsilon_final = 0.005;
  double epsilon_ratio = 0.7;
  int max_iterations = 2000;  // per epsilon stage
  double marginal_tol = 1e-7;
  // Over-relaxation exponent of the scaling updates; 1 is plain Sinkhorn.
  double relaxation = 1.0;
  // Discrete atoms lighter than this (after normalization) are dropped.
  double support_floor = 1e-14;
  SampleSource source = SampleSource::quadrature;
  // Per-axis Gauss-Hermite degree used to discretize each Gaussian component
  // of a closed-form target; 0 reuses the source grid.
  int target_degree = 0;
  TargetAtoms target_atoms = TargetAtoms::pushforward;
  std::size_t source_samples = 400;
  std::size_t target_samples = 400;
  std::uint64_t seed = 42;

  // Throws DomainError on an invalid configuration.
  void validate() const;
  // epsilon_start, epsilon_start * ratio, ..., clamped to end at epsilon_final.
  std::vector<double> schedule() const;
};

struct SolverDiagnostics {
  int iterations = 0;
  int stages = 0;
  int absorptions = 0;  // entropic: scalings folded into the duals mid-stage
  int fallbacks = 0;    // entropic: non-finite scalings repaired in log domain
  int relaxation_resets = 0;  // entropic: stages where over-relaxation was abandoned
  std::size_t source_atoms = 0;
  std::size_t target_atoms = 0;
  double marginal_error = 0.0;
  // Quadrature moments of T#gamma against nu (first and second) for the
  // closed-form solvers.
  double pushforward_error = 0.0;
  bool converged = true;
  std::string note;
};

// Evaluation contract behind a solution.
class TransportModel {
 public:
  virtual ~TransportModel() = default;
  virtual int dim() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  // dT/dx = I + hess phi.
  virtual Matrix jacobian(const Vector& x) const = 0;
  // phi(x), up to an additive constant.
  virtual double potential(const Vector& x) const = 0;
  // S(y) with S(T(x)) = x. Throws NumericalError when not injective.
  virtual Vector inverse(const Vector& y) const = 0;
};

struct TransportSolution {
  TransportMethod method = TransportMethod::gaussian_linear;
  int dim = 0;
  std::shared_ptr<const TransportModel> model;
  Matrix mean_hessian;  // E[hess phi], symmetric
  double wasserstein_sq = 0.0;
  std::optional<Vector> source_potential;  // entropic duals at the support nodes
  std::optional<Vector> target_potential;
  std::optional<double> epsilon_final;
  // Grid the solution's expectations were taken on, when it differs from the
  // caller's: the coupled source measure (entropic) or the refined panel
  // grid (quantile). Degree 0 when not a tensor Gauss-Hermite grid.
  std::optional<QuadratureGrid> source_support;
  SolverDiagnostics diagnostics;

  Vector apply(const Vector& x) const { return model->apply(x); }
  VectorField map() const;
  // phi with analytic gradient T - I and Hessian dT/dx - I.
  ScalarField potential() const;
};

enum class QuantileGrid {
  given,    // integrate on the grid passed in
  refined,  // panels refined around steep parts of T (nearly empty target gaps)
};

// With QuantileGrid::refined the expectations are taken on a panel grid built
// from the map itself; it is returned in `source_support`.
TransportSolution solve_quantile_1d(const DensityModel& density, const QuadratureGrid& grid,
                                    QuantileGrid integration = QuantileGrid::refined);

TransportSolution solve_gaussian_linear(const Matrix& covariance, const Vector& mean);
// Linear solve for uniform, wick_shift and scaled_gaussian densities.
TransportSolution solve_gaussian_linear(const DensityModel& density);

TransportSolution solve_entropic(const DensityModel& density, const QuadratureGrid& grid,
                                 const SinkhornParams& params = {});

// Stein route E[(T(x) - x) x^T] before symmetrization.
Matrix stein_hessian_raw(const TransportSolution& sol, const QuadratureGrid& grid);
// Symmetrized E[hess phi].
Matrix mean_potential_hessian(const TransportSolution& sol, const QuadratureGrid& grid);

// E[|T(x) - x|^2] on the grid.
double wasserstein_sq(const TransportSolution& sol, const QuadratureGrid& grid);

struct InverseMap {
  VectorField map;
  double roundtrip_error = 0.0;  // sup over probed nodes of |S(T(x)) - x|
  double tolerance = 0.0;
  bool within_tolerance = true;
};

// Entropic round trips are probed on nodes with |x|_inf <= 3 only.
InverseMap inverse_map(const TransportSolution& sol, const QuadratureGrid& grid);

// det(I + A) exp(-trace A), via LU of I + A. Signed.
double det2(const Matrix& a);

// det2(I + hess phi) exp(-L phi - |grad phi|^2 / 2).
double jacobian_lambda(const TransportSolution& sol, const Vector& x);
// Same value through det(I + hess phi) exp(-<x, grad phi> - |grad phi|^2 / 2).
double jacobian_lambda_direct(const TransportSolution& sol, const Vector& x);

}  // namespace gpos
