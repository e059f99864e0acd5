#pragma once

#include <Eigen/Dense>

#include "mcigle/errors.hpp"

namespace mcigle {

// Dense double-precision storage used across all analytic modules. Row-major
// so that sample-per-row data blocks map directly onto the update algebra.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Throws InputError if any entry of m is NaN/Inf. `what` names the offender.
void require_finite(const Eigen::Ref<const Matrix>& m, const char* what);

// Unique minimizer of ||Y - X W||_F^2 + gamma ||W||_F^2 via the normal
// equations (X^T X + gamma I) W = X^T Y.
//
// gamma == 0 is accepted only when X^T X is invertible; a singular system
// raises NumericError instead of returning a pseudo-solution.
Matrix ridge_solve(const Matrix& X, const Matrix& Y, double gamma);

// Rank-one inverse update: given A_inv = A^-1 returns (A + u v^T)^-1 using
//   A^-1 - (A^-1 u v^T A^-1) / (1 + v^T A^-1 u).
// Raises NumericError when the denominator is within tolerance of zero.
Matrix sherman_morrison_update(const Matrix& A_inv, const Vector& u, const Vector& v);

// Block inverse update: given A_inv = A^-1 and a data block U with one sample
// per row (m x d), returns (beta A + U^T U)^-1 solved through the m x m
// capacitance system only, never by inverting a d x d matrix.
Matrix woodbury_block_update(const Matrix& A_inv, const Matrix& U, double beta);

}  // namespace mcigle
