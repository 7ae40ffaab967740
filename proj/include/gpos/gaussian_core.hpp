#pragma once

// Finite-dimensional Gaussian space (R^d, R^d, gamma_d): Hermite basis,
// tensorized Gauss-Hermite quadrature, Wick exponentials, the
// Ornstein-Uhlenbeck semigroup (Mehler form) and its generator.

#include "gpos/types.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace gpos {

inline constexpr std::size_t kDefaultNodeCap = 10'000'000;

class GaussianSpace {
 public:
  explicit GaussianSpace(int dim);

  int dim() const { return dim_; }

  // Cameron-Martin inner product; Euclidean at finite dimension.
  double inner(const Vector& h, const Vector& k) const;
  double norm(const Vector& h) const;

 private:
  int dim_;
};

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries);

  std::size_t size() const { return entries_.size(); }
  int operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<int>& entries() const { return entries_; }

  int degree() const { return degree_; }
  double factorial() const { return factorial_; }

  // "a_1;a_2;...;a_d"
  std::string to_string() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex& a, const MultiIndex& b) { return a.entries_ <=> b.entries_; }

 private:
  std::vector<int> entries_;
  int degree_ = 0;
  double factorial_ = 1.0;
};

// All multi-indices in `dim` variables with total degree <= max_degree,
// in lexicographic order of their entries.
std::vector<MultiIndex> multi_indices_up_to(int dim, int max_degree);

// Probabilists' Hermite polynomial h_n(t): h_0 = 1, h_1 = t,
// h_{k+1} = t h_k - k h_{k-1}.
double hermite_1d(int n, double t);

// All h_0(t) .. h_n(t).
std::vector<double> hermite_table(int n, double t);

// H_alpha(x) = prod_i h_{alpha_i}(x_i).
double hermite(const MultiIndex& alpha, const Vector& x);

struct GaussHermiteRule {
  Vector nodes;
  Vector weights;  // sum to 1 (normalized to the standard normal weight)
};

// n-point Gauss-Hermite rule for the weight e^{-t^2/2}/sqrt(2 pi).
GaussHermiteRule gauss_hermite_rule(int n);

struct QuadratureGrid {
  int dim = 0;
  int degree = 0;  // points per axis
  Matrix nodes;    // dim x count, node k is column k
  Vector weights;  // positive, sum to 1

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
  Eigen::Ref<const Vector> node(std::size_t k) const { return nodes.col(static_cast<Eigen::Index>(k)); }
};

QuadratureGrid build_grid(int dim, int degree, std::size_t node_cap = kDefaultNodeCap);

// One-dimensional composite rule: `panels` equal panels on [-half_width,
// half_width], 8-point Gauss-Legendre in each, weighted by the standard normal
// density and renormalized. Not polynomially exact (degree is 0), but it
// resolves maps with steep interior transitions that defeat Gauss-Hermite.
QuadratureGrid build_panel_grid_1d(int panels, double half_width = 10.0);

// Panel rule refined by bisection wherever the 8-point estimate of the
// integral of f against the normal density disagrees with its two halves by
// more than `tol` (absolute, per panel). Depth is capped at `max_depth`.
QuadratureGrid build_adaptive_panel_grid_1d(const std::function<double(double)>& f, double tol, int panels = 64,
                                            double half_width = 10.0, int max_depth = 30);

using ScalarFn = std::function<double(const Vector&)>;
using VectorFn = std::function<Vector(const Vector&)>;
using MatrixFn = std::function<Matrix(const Vector&)>;

struct ScalarField {
  ScalarFn value;
  std::optional<VectorFn> gradient;
  std::optional<MatrixFn> hessian;

  double operator()(const Vector& x) const { return value(x); }
};

struct VectorField {
  VectorFn value;
  std::optional<MatrixFn> jacobian;

  Vector operator()(const Vector& x) const { return value(x); }
};

namespace detail {
// Eigen expressions collapse to their plain matrix type.
template <class X>
auto plain(X&& x) {
  if constexpr (requires { x.eval(); }) {
    return x.eval();
  } else {
    return x;
  }
}

template <class T, class Leaf>
T pairwise_range(std::size_t lo, std::size_t hi, const Leaf& leaf, const T& zero) {
  constexpr std::size_t kBlock = 64;
  if (hi - lo <= kBlock) {
    T acc = zero;
    for (std::size_t k = lo; k < hi; ++k) acc += leaf(k);
    return acc;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  T left = pairwise_range(lo, mid, leaf, zero);
  left += pairwise_range(mid, hi, leaf, zero);
  return left;
}
}  // namespace detail

// Deterministic pairwise reduction of `leaf(k)` over k in [0, n).
template <class Zero, class Leaf>
auto pairwise_sum(std::size_t n, const Leaf& leaf, const Zero& zero) {
  using T = std::remove_cvref_t<decltype(detail::plain(leaf(std::size_t{0})))>;
  return detail::pairwise_range<T>(0, n, leaf, T(zero));
}

// sum_k w_k f(node_k). Throws NumericalError on a non-finite value.
double expect(const ScalarFn& f, const QuadratureGrid& grid);
double expect(const ScalarField& f, const QuadratureGrid& grid);
Vector expect(const VectorField& f, const QuadratureGrid& grid);
Matrix expect_matrix(const MatrixFn& f, const QuadratureGrid& grid, int rows, int cols);

struct AdaptiveOptions {
  int start_degree = 8;
  double rtol = 1e-9;
  std::size_t node_cap = kDefaultNodeCap;
  int max_degree = 4096;
};

struct AdaptiveEstimate {
  double value = 0.0;
  int degree = 0;
  double last_change = 0.0;
  bool converged = false;
};

// Doubles the per-axis degree until successive values differ by less than
// rtol (relative). Hitting the node cap is reported through `converged`.
AdaptiveEstimate expect_adaptive(const ScalarFn& f, int dim, const AdaptiveOptions& opts = {});

// rho(delta h)(x) = exp(<h,x> - |h|^2 / 2)
double wick_exp(const Vector& h, const Vector& x);
ScalarField wick_field(const Vector& h);

// Mehler form of the Ornstein-Uhlenbeck semigroup:
// P_t f(x) = E_y[f(e^{-t} x + sqrt(1 - e^{-2t}) y)].
double ou_apply(const ScalarFn& f, double t, const Vector& x, const QuadratureGrid& grid);

// Lf = <x, grad f> - laplacian f. Uses analytic derivatives when present.
double ou_generator(const ScalarField& f, const Vector& x);

// Central differences, step 1e-4 * max(1, |x|_inf) unless given.
double default_fd_step(const Vector& x);
Vector numeric_gradient(const ScalarFn& f, const Vector& x, double step = 0.0);
Matrix numeric_hessian(const ScalarFn& f, const Vector& x, double step = 0.0);
Matrix numeric_jacobian(const VectorFn& f, const Vector& x, double step = 0.0);

}  // namespace gpos
