#pragma once

#include "gpos/density.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace gpos::detail {

// Distribution of nu = L gamma_1 on the real line.
class Target1D {
 public:
  virtual ~Target1D() = default;
  virtual double pdf(double y) const = 0;
  virtual double cdf(double y) const = 0;
  virtual double sf(double y) const = 0;
  virtual double log_cdf(double y) const { return std::log(cdf(y)); }
  virtual double log_sf(double y) const { return std::log(sf(y)); }
  virtual double mean() const = 0;
  virtual double second_moment() const = 0;
  // A point and scale near the bulk, used to seed brackets.
  virtual double center() const = 0;
  virtual double scale() const = 0;
};

// Closed-form Gaussian-mixture target.
class MixtureTarget1D final : public Target1D {
 public:
  explicit MixtureTarget1D(DensityModel density);
  double pdf(double y) const override { return density_.target_pdf_1d(y); }
  double cdf(double y) const override { return density_.target_cdf_1d(y); }
  double sf(double y) const override { return density_.target_sf_1d(y); }
  double log_cdf(double y) const override;
  double log_sf(double y) const override;
  double mean() const override { return mean_; }
  double second_moment() const override { return second_; }
  double center() const override { return mean_; }
  double scale() const override { return scale_; }

 private:
  DensityModel density_;
  double mean_, second_, scale_;
  std::vector<double> log_weights_, means_, sigmas_;
};

// Target tabulated by composite 8-point Gauss-Legendre panels on [-R, R];
// mass outside the window is treated as zero.
class TabulatedTarget1D final : public Target1D {
 public:
  TabulatedTarget1D(DensityModel density, double radius = 16.0, double panel_width = 0.01);
  double pdf(double y) const override;
  double cdf(double y) const override;
  double sf(double y) const override;
  double mean() const override { return mean_; }
  double second_moment() const override { return second_; }
  double center() const override { return mean_; }
  double scale() const override { return scale_; }
  double total_mass() const { return total_; }

 private:
  double raw_pdf(double y) const;
  double integrate(double a, double b) const;

  DensityModel density_;
  double radius_, width_;
  std::vector<double> cum_;   // cum_[k] = mass of panels [0, k)
  std::vector<double> rcum_;  // rcum_[k] = mass of panels [k, n)
  double total_ = 1.0, mean_ = 0.0, second_ = 1.0, scale_ = 1.0;
};

// log Phi(z), accurate far into the lower tail.
double log_ndtr(double z);

std::unique_ptr<Target1D> make_target_1d(const DensityModel& density);

}  // namespace gpos::detail
