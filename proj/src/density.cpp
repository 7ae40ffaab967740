#include "gpos/density.hpp"

#include "gpos/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gpos {

std::string to_string(DensityFamily f) {
  switch (f) {
    case DensityFamily::uniform: return "uniform";
    case DensityFamily::wick_shift: return "wick_shift";
    case DensityFamily::scaled_gaussian: return "scaled_gaussian";
    case DensityFamily::gaussian_mixture: return "gaussian_mixture";
    case DensityFamily::point_expression: return "point_expression";
  }
  return "unknown";
}

DensityModel DensityModel::uniform(int dim) {
  if (dim < 1) throw DomainError("uniform: dim must be >= 1");
  DensityModel m;
  m.dim_ = dim;
  m.family_ = DensityFamily::uniform;
  m.label_ = "uniform";
  m.components_.push_back({1.0, Vector::Zero(dim), Matrix::Identity(dim, dim)});
  m.compile();
  return m;
}

DensityModel DensityModel::wick_shift(const Vector& h) {
  if (h.size() < 1) throw DimensionError("wick_shift: empty shift");
  if (!h.allFinite()) throw DomainError("wick_shift: non-finite shift");
  DensityModel m;
  m.dim_ = static_cast<int>(h.size());
  m.family_ = DensityFamily::wick_shift;
  m.label_ = "wick_shift";
  m.shift_ = h;
  m.components_.push_back({1.0, h, Matrix::Identity(h.size(), h.size())});
  m.compile();
  return m;
}

DensityModel DensityModel::scaled_gaussian(const Matrix& covariance, const Vector& mean) {
  require_dim(covariance.rows(), mean.size(), "scaled_gaussian");
  require_dim(covariance.cols(), mean.size(), "scaled_gaussian");
  DensityModel m;
  m.dim_ = static_cast<int>(mean.size());
  m.family_ = DensityFamily::scaled_gaussian;
  m.label_ = "scaled_gaussian";
  m.components_.push_back({1.0, mean, covariance});
  m.compile();
  return m;
}

DensityModel DensityModel::gaussian_mixture(std::vector<GaussianComponent> components) {
  if (components.empty()) throw DomainError("gaussian_mixture: no components");
  const auto d = components.front().mean.size();
  double total = 0.0;
  for (const auto& c : components) {
    require_dim(c.mean.size(), d, "gaussian_mixture mean");
    require_dim(c.covariance.rows(), d, "gaussian_mixture covariance");
    require_dim(c.covariance.cols(), d, "gaussian_mixture covariance");
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw DomainError("gaussian_mixture: weights must be positive");
    total += c.weight;
  }
  for (auto& c : components) c.weight /= total;
  DensityModel m;
  m.dim_ = static_cast<int>(d);
  m.family_ = DensityFamily::gaussian_mixture;
  m.label_ = "gaussian_mixture";
  m.components_ = std::move(components);
  m.compile();
  return m;
}

DensityModel DensityModel::point_expression(int dim, ScalarFn raw, const QuadratureGrid& grid, std::string label) {
  if (dim < 1) throw DomainError("point_expression: dim must be >= 1");
  require_dim(grid.dim, dim, "point_expression grid");
  DensityModel m;
  m.dim_ = dim;
  m.family_ = DensityFamily::point_expression;
  m.label_ = label.empty() ? "point_expression" : std::move(label);
  m.raw_ = std::make_shared<const ScalarFn>(std::move(raw));
  m.raw_mass_ = 1.0;
  m.raw_scale_ = 1.0;
  const double mass = m.validate_on(grid);
  if (!(mass > 0.0)) throw DomainError("point_expression: density has zero mass on the grid");
  m.raw_mass_ = mass;
  m.raw_scale_ = 1.0 / mass;
  return m;
}

void DensityModel::compile() {
  compiled_.clear();
  for (const auto& c : components_) {
    if (!c.covariance.allFinite() || !c.mean.allFinite()) throw DomainError("density: non-finite parameters");
    if (linalg::symmetry_defect(c.covariance) > 1e-12 * std::max(1.0, linalg::max_abs(c.covariance))) {
      throw DomainError("density: covariance is not symmetric");
    }
    Compiled cc;
    cc.log_weight = std::log(c.weight);
    cc.mean = c.mean;
    cc.chol.compute(linalg::symmetrize(c.covariance));
    if (cc.chol.info() != Eigen::Success || linalg::min_eigenvalue(c.covariance) <= 0.0) {
      throw DomainError("density: covariance must be positive definite");
    }
    const Matrix& l = cc.chol.matrixLLT();
    double ld = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) ld += std::log(l(i, i));
    cc.log_det_half = ld;
    cc.sigma_1d = dim_ == 1 ? std::sqrt(c.covariance(0, 0)) : 0.0;
    compiled_.push_back(std::move(cc));
  }
}

double DensityModel::log_value(const Vector& x) const {
  require_dim(x.size(), dim_, "DensityModel");
  switch (family_) {
    case DensityFamily::uniform:
      return 0.0;
    case DensityFamily::wick_shift:
      return shift_.dot(x) - 0.5 * shift_.squaredNorm();
    case DensityFamily::point_expression: {
      const double v = (*raw_)(x) * raw_scale_;
      return std::log(v);
    }
    default:
      break;
  }
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(compiled_.size());
  for (std::size_t k = 0; k < compiled_.size(); ++k) {
    const auto& c = compiled_[k];
    const Vector z = c.chol.matrixL().solve(x - c.mean);
    terms[k] = c.log_weight - c.log_det_half - 0.5 * z.squaredNorm();
    best = std::max(best, terms[k]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - best);
  return best + std::log(s) + 0.5 * x.squaredNorm();
}

double DensityModel::operator()(const Vector& x) const {
  if (family_ == DensityFamily::uniform) {
    require_dim(x.size(), dim_, "DensityModel");
    return 1.0;
  }
  if (family_ == DensityFamily::point_expression) {
    require_dim(x.size(), dim_, "DensityModel");
    return (*raw_)(x) * raw_scale_;
  }
  return std::exp(log_value(x));
}

ScalarField DensityModel::field() const {
  ScalarField f;
  auto self = std::make_shared<const DensityModel>(*this);
  f.value = [self](const Vector& x) { return (*self)(x); };
  return f;
}

Vector DensityModel::target_mean() const {
  if (!has_closed_form()) throw DomainError("target_mean: no closed form for point_expression");
  Vector m = Vector::Zero(dim_);
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

Matrix DensityModel::target_second_moment() const {
  if (!has_closed_form()) throw DomainError("target_second_moment: no closed form for point_expression");
  Matrix s = Matrix::Zero(dim_, dim_);
  for (const auto& c : components_) s += c.weight * (c.covariance + c.mean * c.mean.transpose());
  return linalg::symmetrize(s);
}

bool DensityModel::certifies_l2() const {
  if (!has_closed_form()) return false;
  for (const auto& c : components_) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(c.covariance), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().maxCoeff() >= 2.0) return false;
  }
  return true;
}

bool DensityModel::certifies_entropy() const { return has_closed_form(); }

DensityModel DensityModel::scaled(double c, const QuadratureGrid& grid) const {
  if (!(c > 0.0)) throw DomainError("scaled: factor must be positive");
  auto self = std::make_shared<const DensityModel>(*this);
  return point_expression(dim_, [self, c](const Vector& x) { return c * (*self)(x); }, grid,
                          "scaled(" + label_ + ")");
}

double DensityModel::validate_on(const QuadratureGrid& grid) const {
  require_dim(grid.dim, dim_, "validate_on");
  Vector x(dim_);
  return pairwise_sum(
      grid.size(),
      [&](std::size_t k) {
        x = grid.node(k);
        const double v = (*this)(x);
        if (!std::isfinite(v)) throw NumericalError("density: non-finite value at node " + std::to_string(k));
        if (v < 0.0) throw DomainError("density: negative value at node " + std::to_string(k));
        return grid.weights[static_cast<Eigen::Index>(k)] * v;
      },
      0.0);
}

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}

double DensityModel::target_pdf_1d(double y) const {
  if (dim_ != 1 || !has_closed_form()) throw DomainError("target_pdf_1d: requires a 1D closed-form density");
  double p = 0.0;
  for (const auto& c : compiled_) {
    const double z = (y - c.mean[0]) / c.sigma_1d;
    p += std::exp(c.log_weight) * kInvSqrt2Pi / c.sigma_1d * std::exp(-0.5 * z * z);
  }
  return p;
}

double DensityModel::target_cdf_1d(double y) const {
  if (dim_ != 1 || !has_closed_form()) throw DomainError("target_cdf_1d: requires a 1D closed-form density");
  double p = 0.0;
  for (const auto& c : compiled_) {
    const double z = (y - c.mean[0]) / c.sigma_1d;
    p += std::exp(c.log_weight) * 0.5 * std::erfc(-z / std::numbers::sqrt2);
  }
  return p;
}

double DensityModel::target_sf_1d(double y) const {
  if (dim_ != 1 || !has_closed_form()) throw DomainError("target_sf_1d: requires a 1D closed-form density");
  double p = 0.0;
  for (const auto& c : compiled_) {
    const double z = (y - c.mean[0]) / c.sigma_1d;
    p += std::exp(c.log_weight) * 0.5 * std::erfc(z / std::numbers::sqrt2);
  }
  return p;
}

}  // namespace gpos
