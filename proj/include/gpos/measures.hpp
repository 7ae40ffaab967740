#pragma once

// Finitely supported positive measures on R^d and their Ornstein-Uhlenbeck
// regularizations.

#include "gpos/density.hpp"
#include "gpos/gaussian_core.hpp"

#include <vector>

namespace gpos {

struct Atom {
  Vector location;
  double weight = 1.0;
};

class PositiveMeasure {
 public:
  // Weights must be positive; all locations share one dimension.
  static PositiveMeasure from_atoms(std::vector<Atom> atoms);
  // gamma_d discretized on a quadrature grid, scaled to total mass `mass`.
  static PositiveMeasure discretized_gaussian(const QuadratureGrid& grid, double mass = 1.0);
  static PositiveMeasure point_mass(const Vector& location, double weight = 1.0);

  int dim() const { return dim_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  double total_mass() const { return total_mass_; }

 private:
  PositiveMeasure() = default;
  int dim_ = 0;
  std::vector<Atom> atoms_;
  double total_mass_ = 0.0;
};

// m(W), M1 = <m, delta h>, M2 = <m, delta^2(h x k)>.
struct MomentFunctionals {
  double mass = 0.0;
  Vector m1;
  Matrix m2;
};

MomentFunctionals moment_functionals(const PositiveMeasure& m);

// P_t m renormalized to a probability density; the true mass is kept alongside.
struct RegularizedMeasure {
  DensityModel density;
  double mass = 0.0;
  double t = 0.0;
};

// Density of P_t m w.r.t. gamma_d: a Gaussian mixture with components
// N(e^{-t} a_k, (1 - e^{-2t}) I).
RegularizedMeasure ou_regularize(const PositiveMeasure& m, double t);

}  // namespace gpos
