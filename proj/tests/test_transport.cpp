#include "gpos/transport.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace gpos;
using gpos::testing::vec;

namespace {

DensityModel sigma2() { return DensityModel::scaled_gaussian(Matrix::Constant(1, 1, 4.0), vec({0.0})); }

// Largest value of sum_i <T(x_i), x_{i+1} - x_i> over random cycles; <= 0
// for the gradient of a convex function.
double worst_cycle(const TransportSolution& sol, int dim, std::mt19937_64& rng, int cycles, int length) {
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < cycles; ++c) {
    std::vector<Vector> xs(static_cast<std::size_t>(length), Vector(dim));
    for (auto& x : xs)
      for (int i = 0; i < dim; ++i) x[i] = 1.5 * n01(rng);
    double s = 0.0;
    for (int i = 0; i < length; ++i) {
      const Vector& a = xs[static_cast<std::size_t>(i)];
      const Vector& b = xs[static_cast<std::size_t>((i + 1) % length)];
      s += sol.apply(a).dot(b - a);
    }
    worst = std::max(worst, s);
  }
  return worst;
}

}  // namespace

TEST_CASE("det2: frozen values") {
  CHECK(det2(Matrix::Zero(3, 3)) == doctest::Approx(1.0));
  CHECK(det2(Matrix::Constant(1, 1, 1.0)) == doctest::Approx(0.735759).epsilon(1e-6));
  CHECK(det2(Matrix::Constant(1, 1, 1.0)) == doctest::Approx(2.0 / std::exp(1.0)).epsilon(1e-15));
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = -0.5;
  CHECK(det2(a) == doctest::Approx(0.606531).epsilon(1e-6));
  // Signed: I + A singular or orientation-reversing.
  CHECK(det2(Matrix::Constant(1, 1, -1.0)) == doctest::Approx(0.0).scale(1.0));
  CHECK(det2(Matrix::Constant(1, 1, -3.0)) < 0.0);
}

TEST_CASE("gaussian linear map for sigma = 2") {
  const auto sol = solve_gaussian_linear(sigma2());
  CHECK(sol.apply(vec({1.5}))[0] == doctest::Approx(3.0));
  CHECK(sol.mean_hessian(0, 0) == doctest::Approx(1.0));
  CHECK(sol.wasserstein_sq == doctest::Approx(1.0).epsilon(1e-15));
  // Lambda(x) = 2 e^{-1} e^{1 - 3 x^2 / 2}; Lambda(1) = 2 e^{-1.5}
  CHECK(jacobian_lambda(sol, vec({1.0})) == doctest::Approx(0.446260).epsilon(1e-6));
  CHECK(jacobian_lambda(sol, vec({1.0})) == doctest::Approx(2.0 * std::exp(-1.5)).epsilon(1e-14));
  CHECK(jacobian_lambda_direct(sol, vec({0.3})) == doctest::Approx(jacobian_lambda(sol, vec({0.3}))).epsilon(1e-13));
  CHECK(sol.model->potential(vec({2.0})) == doctest::Approx(2.0));  // x^2 / 2
}

TEST_CASE("gaussian linear map for a general covariance") {
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 0.8;
  const Vector mean = vec({0.3, -1.0});
  const auto sol = solve_gaussian_linear(cov, mean);
  const Matrix root = sol.model->jacobian(vec({0.0, 0.0}));
  CHECK((root * root - cov).norm() < 1e-12);
  CHECK((root - root.transpose()).norm() < 1e-14);
  const Vector y = sol.apply(vec({0.4, 0.9}));
  CHECK((sol.model->inverse(y) - vec({0.4, 0.9})).norm() < 1e-12);
  CHECK_THROWS_AS(solve_gaussian_linear(DensityModel::gaussian_mixture({{1, vec({0}), Matrix::Identity(1, 1)},
                                                                        {1, vec({1}), Matrix::Identity(1, 1)}})),
                  DomainError);
}

TEST_CASE("quantile map reproduces the linear map for sigma = 2") {
  const auto q = solve_quantile_1d(sigma2(), build_grid(1, 80));
  const auto l = solve_gaussian_linear(sigma2());
  for (double x : {-6.0, -1.0, 0.0, 0.4, 3.0, 7.5}) {
    CHECK(q.apply(vec({x}))[0] == doctest::Approx(l.apply(vec({x}))[0]).epsilon(1e-12).scale(1.0));
  }
  CHECK(q.diagnostics.converged);
  CHECK(q.mean_hessian(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(q.wasserstein_sq == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(jacobian_lambda(q, vec({1.0})) == doctest::Approx(2.0 * std::exp(-1.5)).epsilon(1e-6));
  CHECK(q.model->potential(vec({2.0})) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(q.model->inverse(vec({3.0}))[0] == doctest::Approx(1.5).epsilon(1e-10));
  REQUIRE(q.source_support);
  CHECK(q.source_support->degree == 0);
}

TEST_CASE("quantile map on the given grid when refinement is off") {
  const QuadratureGrid g = build_grid(1, 80);
  const auto q = solve_quantile_1d(sigma2(), g, QuantileGrid::given);
  CHECK_FALSE(q.source_support);
  CHECK(q.mean_hessian(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("quantile map of a separated mixture resolves the gap") {
  const auto d = DensityModel::gaussian_mixture(
      {{0.5, vec({-2.5}), Matrix::Constant(1, 1, 0.1)}, {0.5, vec({2.5}), Matrix::Constant(1, 1, 0.1)}});
  const auto q = solve_quantile_1d(d, build_grid(1, 80));
  CHECK(q.diagnostics.converged);
  CHECK(q.diagnostics.pushforward_error < 1e-9);
  CHECK(q.apply(vec({-1e-3}))[0] < 0.0);
  CHECK(q.apply(vec({1e-3}))[0] > 0.0);
  // monotone
  double prev = -1e300;
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    const double y = q.apply(vec({x}))[0];
    CHECK(y >= prev);
    prev = y;
  }
}

TEST_CASE("quantile map tails keep precision") {
  const auto d = DensityModel::wick_shift(vec({0.75}));
  const auto q = solve_quantile_1d(d, build_grid(1, 40));
  for (double x : {-30.0, -12.0, 12.0, 30.0}) CHECK(q.apply(vec({x}))[0] == doctest::Approx(x + 0.75).epsilon(1e-12));
  CHECK_THROWS_AS(solve_quantile_1d(DensityModel::uniform(2), build_grid(2, 4)), DimensionError);
}

TEST_CASE("transport maps are cyclically monotone") {
  std::mt19937_64 rng(11);
  const auto q = solve_quantile_1d(gpos::testing::random_mixture(rng, 1, 4), build_grid(1, 80));
  CHECK(worst_cycle(q, 1, rng, 200, 5) <= 1e-12);
  Matrix cov(2, 2);
  cov << 1.7, -0.4, -0.4, 0.6;
  const auto l = solve_gaussian_linear(cov, vec({0.2, 0.1}));
  CHECK(worst_cycle(l, 2, rng, 200, 6) <= 1e-12);
}

TEST_CASE("potential gradient equals T - I") {
  std::mt19937_64 rng(3);
  const auto q = solve_quantile_1d(gpos::testing::random_mixture(rng, 1, 3), build_grid(1, 80));
  const auto phi = q.potential();
  REQUIRE(phi.gradient);
  for (double x : {-1.3, 0.2, 2.1}) {
    const double fd = numeric_gradient(phi.value, vec({x}))[0];
    CHECK(fd == doctest::Approx(q.apply(vec({x}))[0] - x).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("inverse maps round trip") {
  std::mt19937_64 rng(5);
  const auto q = solve_quantile_1d(gpos::testing::random_mixture(rng, 1, 3), build_grid(1, 60));
  const auto inv = inverse_map(q, build_grid(1, 30));
  CHECK(inv.within_tolerance);
  CHECK(inv.roundtrip_error < 1e-8);
}

TEST_CASE("sinkhorn parameters") {
  SinkhornParams p;
  const auto s = p.schedule();
  CHECK(s.front() == 1.0);
  CHECK(s.back() == 0.005);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] < s[i - 1]);
  p.epsilon_final = -1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.epsilon_ratio = 1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.target_degree = -2;
  CHECK_THROWS_AS(p.validate(), DomainError);
}
