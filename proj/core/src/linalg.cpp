#include "dncs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "dncs/errors.hpp"

namespace dncs::linalg {

double spectral_radius(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_abscissa(const Matrix& A) {
  if (A.size() == 0) return -std::numeric_limits<double>::infinity();
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().real().maxCoeff();
}

double min_symmetric_eigenvalue(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(A), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

Matrix expm(const Matrix& A) { return A.exp(); }

Matrix solve_stein(const Matrix& A, const Matrix& Q) {
  if (spectral_radius(A) >= 1.0) {
    throw UnstableSystem("Stein equation requires a Schur-stable matrix");
  }
  Matrix X = symmetrize(Q);
  Matrix Ak = A;
  for (int k = 0; k < 80; ++k) {
    const Matrix increment = Ak.transpose() * X * Ak;
    X += increment;
    if (increment.norm() <= std::numeric_limits<double>::epsilon() * X.norm() ||
        !increment.allFinite()) {
      break;
    }
    Ak = Ak * Ak;
  }
  return symmetrize(X);
}

Matrix solve_continuous_lyapunov(const Matrix& A, const Matrix& Q) {
  const Index n = A.rows();
  const Eigen::VectorXcd lambda = Eigen::EigenSolver<Matrix>(A, false).eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      if (std::abs(lambda(i) + lambda(j)) <= 1e-12 * scale) {
        throw IllPosedLyapunov("Lyapunov operator singular: eigenvalue pair sums to zero");
      }
    }
  }
  // vec(X A + A^T X) = (A^T (x) I + I (x) A^T) vec(X)
  const Matrix I = Matrix::Identity(n, n);
  Matrix L = Matrix::Zero(n * n, n * n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      L.block(i * n, j * n, n, n) += A(j, i) * I;
      if (i == j) L.block(i * n, j * n, n, n) += A.transpose();
    }
  }
  const Eigen::FullPivLU<Matrix> lu(L);
  if (!lu.isInvertible()) {
    throw IllPosedLyapunov("Lyapunov operator numerically singular");
  }
  const Vector q = Eigen::Map<const Vector>(Q.data(), n * n);
  Vector x = lu.solve(q);
  x += lu.solve(q - L * x);  // one refinement sweep
  return symmetrize(Eigen::Map<const Matrix>(x.data(), n, n));
}

Matrix block_diagonal(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace dncs::linalg
