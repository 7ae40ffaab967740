#include "target_1d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace gpos::detail {

namespace {

constexpr std::array<double, 4> kGlNodes = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                            0.9602898564975363};
constexpr std::array<double, 4> kGlWeights = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                              0.1012285362903763};

template <class F>
double gauss_legendre(const F& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
    s += kGlWeights[i] * (f(mid - half * kGlNodes[i]) + f(mid + half * kGlNodes[i]));
  }
  return s * half;
}

}  // namespace

MixtureTarget1D::MixtureTarget1D(DensityModel density) : density_(std::move(density)) {
  mean_ = density_.target_mean()[0];
  second_ = density_.target_second_moment()(0, 0);
  scale_ = std::sqrt(std::max(second_ - mean_ * mean_, 1e-300));
  for (const auto& c : density_.components()) {
    log_weights_.push_back(std::log(c.weight));
    means_.push_back(c.mean[0]);
    sigmas_.push_back(std::sqrt(c.covariance(0, 0)));
  }
}

namespace {
double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : v) s += std::exp(t - m);
  return m + std::log(s);
}
}  // namespace

double log_ndtr(double z) {
  if (z > -30.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // Asymptotic series of the Mills ratio.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double MixtureTarget1D::log_cdf(double y) const {
  std::vector<double> t(means_.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = log_weights_[k] + log_ndtr((y - means_[k]) / sigmas_[k]);
  return log_sum_exp(t);
}

double MixtureTarget1D::log_sf(double y) const {
  std::vector<double> t(means_.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = log_weights_[k] + log_ndtr((means_[k] - y) / sigmas_[k]);
  return log_sum_exp(t);
}

TabulatedTarget1D::TabulatedTarget1D(DensityModel density, double radius, double panel_width)
    : density_(std::move(density)), radius_(radius), width_(panel_width) {
  const auto n = static_cast<std::size_t>(std::ceil(2.0 * radius_ / width_));
  width_ = 2.0 * radius_ / static_cast<double>(n);
  std::vector<double> panel(n);
  double m1 = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = -radius_ + static_cast<double>(k) * width_;
    const double b = a + width_;
    panel[k] = integrate(a, b);
    m1 += gauss_legendre([&](double y) { return y * raw_pdf(y); }, a, b);
    m2 += gauss_legendre([&](double y) { return y * y * raw_pdf(y); }, a, b);
  }
  cum_.assign(n + 1, 0.0);
  rcum_.assign(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) cum_[k + 1] = cum_[k] + panel[k];
  for (std::size_t k = n; k-- > 0;) rcum_[k] = rcum_[k + 1] + panel[k];
  total_ = cum_[n];
  if (!(total_ > 0.0) || !std::isfinite(total_)) {
    throw NumericalError("quantile transport: target CDF is not integrable");
  }
  mean_ = m1 / total_;
  second_ = m2 / total_;
  scale_ = std::sqrt(std::max(second_ - mean_ * mean_, 1e-300));
}

double TabulatedTarget1D::raw_pdf(double y) const {
  const double v = density_(Vector::Constant(1, y));
  if (!std::isfinite(v) || v < 0.0) throw NumericalError("quantile transport: invalid density value in CDF table");
  return v * std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi);
}

double TabulatedTarget1D::integrate(double a, double b) const {
  return gauss_legendre([&](double y) { return raw_pdf(y); }, a, b);
}

double TabulatedTarget1D::pdf(double y) const {
  if (y <= -radius_ || y >= radius_) return 0.0;
  return raw_pdf(y) / total_;
}

double TabulatedTarget1D::cdf(double y) const {
  if (y <= -radius_) return 0.0;
  if (y >= radius_) return 1.0;
  const auto k = std::min(cum_.size() - 2, static_cast<std::size_t>((y + radius_) / width_));
  const double a = -radius_ + static_cast<double>(k) * width_;
  return (cum_[k] + integrate(a, y)) / total_;
}

double TabulatedTarget1D::sf(double y) const {
  if (y <= -radius_) return 1.0;
  if (y >= radius_) return 0.0;
  const auto k = std::min(cum_.size() - 2, static_cast<std::size_t>((y + radius_) / width_));
  const double b = -radius_ + static_cast<double>(k + 1) * width_;
  return (rcum_[k + 1] + integrate(y, b)) / total_;
}

std::unique_ptr<Target1D> make_target_1d(const DensityModel& density) {
  if (density.dim() != 1) throw DimensionError("quantile transport requires dim = 1");
  if (density.has_closed_form()) return std::make_unique<MixtureTarget1D>(density);
  auto t = std::make_unique<TabulatedTarget1D>(density);
  if (std::abs(t->total_mass() - 1.0) > 1e-6) {
    throw NumericalError("quantile transport: CDF inversion failure, target mass on the window is " +
                         std::to_string(t->total_mass()) + " (non-integrable tail?)");
  }
  return t;
}

}  // namespace gpos::detail
