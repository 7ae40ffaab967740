#pragma once

#include "gpos/gaussian_core.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gpos {

enum class DensityFamily { uniform, wick_shift, scaled_gaussian, gaussian_mixture, point_expression };

std::string to_string(DensityFamily f);

// One component N(mean, covariance) of the measure nu = L gamma_d, with
// mixture weight.
struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
};

// A positive density L with respect to gamma_d, normalized so that E[L] = 1.
// Every family except point_expression has nu = L gamma_d equal to a finite
// Gaussian mixture, which gives closed-form moments and CDFs.
class DensityModel {
 public:
  static DensityModel uniform(int dim);
  static DensityModel wick_shift(const Vector& h);
  static DensityModel scaled_gaussian(const Matrix& covariance, const Vector& mean);
  static DensityModel gaussian_mixture(std::vector<GaussianComponent> components);
  // `raw` need not be normalized; its mass is computed on `grid`.
  static DensityModel point_expression(int dim, ScalarFn raw, const QuadratureGrid& grid, std::string label = {});

  int dim() const { return dim_; }
  DensityFamily family() const { return family_; }
  const std::string& label() const { return label_; }

  double operator()(const Vector& x) const;
  double log_value(const Vector& x) const;
  ScalarField field() const;

  // Raw mass E[raw] before normalization (1 for closed-form families).
  double raw_mass() const { return raw_mass_; }

  bool has_closed_form() const { return family_ != DensityFamily::point_expression; }
  // nu as a Gaussian mixture; empty for point_expression.
  const std::vector<GaussianComponent>& components() const { return components_; }

  // nu-mean and E_nu[x x^T] (closed-form families only).
  Vector target_mean() const;
  Matrix target_second_moment() const;

  // E[L^2] < inf: every component covariance has eigenvalues < 2.
  bool certifies_l2() const;
  // E[L log L] < inf.
  bool certifies_entropy() const;

  // The same density multiplied by c > 0 before normalization (point_expression).
  DensityModel scaled(double c, const QuadratureGrid& grid) const;

  // Hard error if L < 0 or non-finite at a node; reports the quadrature mass.
  double validate_on(const QuadratureGrid& grid) const;

  // Density of nu with respect to Lebesgue measure, 1D closed forms.
  double target_pdf_1d(double y) const;
  double target_cdf_1d(double y) const;
  double target_sf_1d(double y) const;

 private:
  struct Compiled {
    double log_weight;
    Vector mean;
    Eigen::LLT<Matrix> chol;
    double log_det_half;
    double sigma_1d;
  };

  DensityModel() = default;
  void compile();

  int dim_ = 0;
  DensityFamily family_ = DensityFamily::uniform;
  std::string label_;
  std::vector<GaussianComponent> components_;
  std::vector<Compiled> compiled_;
  Vector shift_;  // wick_shift only
  std::shared_ptr<const ScalarFn> raw_;
  double raw_mass_ = 1.0;
  double raw_scale_ = 1.0;
};

}  // namespace gpos
