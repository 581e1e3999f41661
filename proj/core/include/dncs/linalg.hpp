#pragma once

#include <complex>

#include <Eigen/Dense>

namespace dncs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

namespace linalg {

/// Largest eigenvalue modulus.
double spectral_radius(const Matrix& A);

/// Largest real part over the spectrum.
double spectral_abscissa(const Matrix& A);

inline Matrix symmetrize(const Matrix& A) { return 0.5 * (A + A.transpose()); }

/// Smallest eigenvalue of the symmetric part of A.
double min_symmetric_eigenvalue(const Matrix& A);

/// Matrix exponential exp(A).
Matrix expm(const Matrix& A);

/// Solves X = A^T X A + Q for Schur-stable A (Smith doubling). Throws
/// UnstableSystem when rho(A) >= 1.
Matrix solve_stein(const Matrix& A, const Matrix& Q);

/// Solves X A + A^T X = Q through the Kronecker form. Throws IllPosedLyapunov
/// when some eigenvalue pair satisfies lambda_i + lambda_j = 0.
Matrix solve_continuous_lyapunov(const Matrix& A, const Matrix& Q);

/// Block-diagonal concatenation.
Matrix block_diagonal(const Matrix& a, const Matrix& b);

/// Relative distance ||A - B|| / max(||B||, floor).
inline double relative_error(const Matrix& A, const Matrix& B, double floor = 1e-300) {
  return (A - B).norm() / std::max(B.norm(), floor);
}

}  // namespace linalg
}  // namespace dncs
