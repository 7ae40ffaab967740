#include "gpos/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace gpos::linalg {

Matrix symmetrize(const Matrix& a) {
  require_dim(a.rows(), a.cols(), "symmetrize");
  return 0.5 * (a + a.transpose());
}

double min_eigenvalue(const Matrix& a) {
  require_dim(a.rows(), a.cols(), "min_eigenvalue");
  if (a.size() == 0) throw DimensionError("min_eigenvalue: empty matrix");
  if (a.rows() == 1) return a(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(a), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

Matrix sqrt_psd(const Matrix& a, double tol) {
  require_dim(a.rows(), a.cols(), "sqrt_psd");
  if (symmetry_defect(a) > tol * std::max(1.0, max_abs(a))) {
    throw DomainError("sqrt_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(a));
  const Vector& ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  Vector root(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tol * scale) throw DomainError("sqrt_psd: matrix is not positive semi-definite");
    root[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  const Matrix& q = solver.eigenvectors();
  return symmetrize(q * root.asDiagonal() * q.transpose());
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double symmetry_defect(const Matrix& a) {
  require_dim(a.rows(), a.cols(), "symmetry_defect");
  return max_abs(a - a.transpose());
}

}  // namespace gpos::linalg
