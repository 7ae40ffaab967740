#include "gpos/measures.hpp"

#include "gpos/linalg.hpp"

#include <cmath>

namespace gpos {

PositiveMeasure PositiveMeasure::from_atoms(std::vector<Atom> atoms) {
  if (atoms.empty()) throw DomainError("PositiveMeasure: empty atom list");
  PositiveMeasure m;
  m.dim_ = static_cast<int>(atoms.front().location.size());
  if (m.dim_ < 1) throw DimensionError("PositiveMeasure: atoms must have dimension >= 1");
  for (const auto& a : atoms) {
    require_dim(a.location.size(), m.dim_, "PositiveMeasure atom");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw DomainError("PositiveMeasure: weights must be positive");
    if (!a.location.allFinite()) throw DomainError("PositiveMeasure: non-finite atom location");
    m.total_mass_ += a.weight;
  }
  m.atoms_ = std::move(atoms);
  return m;
}

PositiveMeasure PositiveMeasure::discretized_gaussian(const QuadratureGrid& grid, double mass) {
  std::vector<Atom> atoms;
  atoms.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    atoms.push_back({grid.node(k), mass * grid.weights[static_cast<Eigen::Index>(k)]});
  }
  return from_atoms(std::move(atoms));
}

PositiveMeasure PositiveMeasure::point_mass(const Vector& location, double weight) {
  return from_atoms({Atom{location, weight}});
}

MomentFunctionals moment_functionals(const PositiveMeasure& m) {
  if (m.atoms().empty()) throw DomainError("moment_functionals: empty atom list");
  const int d = m.dim();
  MomentFunctionals mf;
  mf.mass = m.total_mass();
  mf.m1 = Vector::Zero(d);
  mf.m2 = Matrix::Zero(d, d);
  for (const auto& a : m.atoms()) {
    mf.m1 += a.weight * a.location;
    mf.m2 += a.weight * (a.location * a.location.transpose() - Matrix::Identity(d, d));
  }
  mf.m2 = linalg::symmetrize(mf.m2);
  return mf;
}

RegularizedMeasure ou_regularize(const PositiveMeasure& m, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("ou_regularize: t must be positive");
  const int d = m.dim();
  const double decay = std::exp(-t);
  const double s2 = -std::expm1(-2.0 * t);
  std::vector<GaussianComponent> comps;
  comps.reserve(m.atoms().size());
  for (const auto& a : m.atoms()) {
    comps.push_back({a.weight / m.total_mass(), decay * a.location, s2 * Matrix::Identity(d, d)});
  }
  return {DensityModel::gaussian_mixture(std::move(comps)), m.total_mass(), t};
}

}  // namespace gpos
