#pragma once

#include "gpos/density.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace gpos::testing {

// Random Gaussian mixture: means in [-mean_span, mean_span], covariance
// eigenvalues in [var_lo, var_hi] with a random rotation, weights in [0.2, 1].
inline DensityModel random_mixture(std::mt19937_64& rng, int dim, int max_components, double mean_span = 2.0,
                                   double var_lo = 0.25, double var_hi = 1.5) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, max_components);
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(count(rng)));
  for (auto& c : comps) {
    c.weight = 0.2 + 0.8 * u01(rng);
    c.mean = Vector(dim);
    for (int i = 0; i < dim; ++i) c.mean[i] = mean_span * (2.0 * u01(rng) - 1.0);
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) g(i, j) = n01(rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
    Vector ev(dim);
    for (int i = 0; i < dim; ++i) ev[i] = var_lo + (var_hi - var_lo) * u01(rng);
    c.covariance = q * ev.asDiagonal() * q.transpose();
  }
  return DensityModel::gaussian_mixture(std::move(comps));
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace gpos::testing
