#pragma once

#include "gpos/types.hpp"

namespace gpos::linalg {

// (A + A^T) / 2
Matrix symmetrize(const Matrix& a);

// Smallest eigenvalue of the symmetric part of a square matrix.
double min_eigenvalue(const Matrix& a);

// Principal square root of a symmetric PSD matrix. Eigenvalues in
// [-tol*scale, 0) are clamped to zero; anything below throws DomainError.
Matrix sqrt_psd(const Matrix& a, double tol = 1e-12);

// max_ij |a_ij|
double max_abs(const Matrix& a);

// max_ij |a_ij - a_ji|
double symmetry_defect(const Matrix& a);

}  // namespace gpos::linalg
