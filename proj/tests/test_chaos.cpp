#include "gpos/chaos.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gpos;
using gpos::testing::vec;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace

TEST_CASE("wick exponential h = 1 has chaos coefficients 1/n!") {
  const auto d = DensityModel::wick_shift(vec({1.0}));
  const auto e = chaos_coefficients(d, build_grid(1, 40), 10);
  REQUIRE(e.terms.size() == 11);
  for (const auto& t : e.terms) CHECK(std::abs(t.coefficient - 1.0 / factorial(t.alpha[0])) <= 1e-8);
}

TEST_CASE("two-dimensional wick exponential factorizes") {
  const Vector h = vec({0.6, -0.9});
  const auto e = chaos_coefficients(DensityModel::wick_shift(h), build_grid(2, 30), 6);
  for (const auto& t : e.terms) {
    const double want = std::pow(h[0], t.alpha[0]) * std::pow(h[1], t.alpha[1]) / t.alpha.factorial();
    CHECK(t.coefficient == doctest::Approx(want).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("Parseval: sum c_alpha^2 alpha! approaches E[L^2]") {
  // E[rho(delta h)^2] = exp(|h|^2)
  const Vector h = vec({0.7, 0.4});
  const auto e = chaos_coefficients(DensityModel::wick_shift(h), build_grid(2, 40), 18);
  CHECK(e.parseval_sum() == doctest::Approx(std::exp(h.squaredNorm())).epsilon(1e-10));
}

TEST_CASE("OU semigroup scales the n-th chaos by exp(-n t)") {
  const auto d = DensityModel::wick_shift(vec({1.0}));
  const QuadratureGrid inner = build_grid(1, 40);
  const QuadratureGrid outer = build_grid(1, 30);
  const auto base = chaos_coefficients(d, outer, 8);
  for (double t : {0.2, 0.7}) {
    const auto pt = chaos_coefficients([&](const Vector& x) { return ou_apply([&](const Vector& y) { return d(y); }, t, x, inner); },
                                       1, outer, 8);
    for (std::size_t i = 0; i < pt.terms.size(); ++i) {
      const int n = pt.terms[i].alpha.degree();
      CHECK(std::abs(pt.terms[i].coefficient - std::exp(-n * t) * base.terms[i].coefficient) <= 1e-6);
    }
  }
}

TEST_CASE("reconstruction of a polynomial is exact") {
  auto f = [](const Vector& x) { return 1.0 + 2.0 * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1] * x[1]; };
  const auto e = chaos_coefficients(f, 2, build_grid(2, 8), 4);
  for (const Vector& x : {vec({0.3, -1.2}), vec({2.0, 0.5})}) CHECK(reconstruct(e, x) == doctest::Approx(f(x)).epsilon(1e-12));
  CHECK(e.coefficient(MultiIndex({1, 1})) == doctest::Approx(-1.0));
  CHECK(e.coefficient(MultiIndex({0, 3})) == doctest::Approx(0.5));
  CHECK(e.coefficient(MultiIndex({5, 5})) == 0.0);
}

TEST_CASE("chaos grid must resolve degree N + 2") {
  CHECK_THROWS_AS(chaos_coefficients(DensityModel::uniform(1), build_grid(1, 9), 8), DomainError);
  CHECK_THROWS_AS(chaos_coefficients(DensityModel::uniform(1), build_panel_grid_1d(10), 2), DomainError);
}

TEST_CASE("stroock moments: quadrature and closed form agree") {
  std::mt19937_64 rng(7);
  for (int d = 1; d <= 3; ++d) {
    const auto density = gpos::testing::random_mixture(rng, d, 3, 1.5, 0.4, 1.2);
    const auto m = stroock_moments(density, build_grid(d, d == 3 ? 24 : 60));
    CHECK(m.provenance == MomentProvenance::both);
    CHECK(m.converged);
    CHECK(m.route_gap < 1e-8);
    const auto a = analytic_moments(density);
    CHECK((m.m1 - a.m1).norm() < 1e-12);
  }
}

TEST_CASE("sigma = 2 moments: m1 = 0, m2 = 3") {
  const auto d = DensityModel::scaled_gaussian(Matrix::Constant(1, 1, 4.0), vec({0.0}));
  const auto q = quadrature_moments(d, build_grid(1, 120));
  CHECK(q.mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(q.m1[0]) < 1e-12);
  CHECK(q.m2(0, 0) == doctest::Approx(3.0).epsilon(1e-10));
  const auto ad = adaptive_moments(d);
  CHECK(ad.converged);
  CHECK(ad.m2(0, 0) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("point expressions only get the quadrature route") {
  const QuadratureGrid g = build_grid(1, 60);
  const auto d = DensityModel::wick_shift(vec({0.5})).scaled(3.0, g);
  const auto m = stroock_moments(d, g);
  CHECK(m.provenance == MomentProvenance::quadrature);
  CHECK(m.m1[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(analytic_moments(d), DomainError);
}

TEST_CASE("quadratic forms and r-convexity") {
  Matrix k(2, 2);
  k << 2.0, 0.5, 0.5, 1.0;
  const QuadraticForm f = make_quadratic_form(k, 0.25);
  const Vector x = vec({1.0, -2.0});
  CHECK(f(x) == doctest::Approx(0.5 * (x.dot(k * x) - k.trace()) + 0.25));
  const double lmin = (3.0 - std::sqrt(2.0)) / 2.0;
  CHECK(r_convexity(f, 1.0) == doctest::Approx(lmin + 1.0));
  CHECK(r_convexity(make_quadratic_form(Matrix::Constant(1, 1, -2.0)), 1.0) == doctest::Approx(-1.0));

  const auto mom = analytic_moments(DensityModel::scaled_gaussian(Matrix::Constant(1, 1, 4.0), vec({0.0})));
  CHECK(second_chaos_form(mom).kernel(0, 0) == doctest::Approx(3.0));
}
