#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dncs/errors.hpp"
#include "dncs/synthesis.hpp"

namespace dncs::synthesis {

namespace {

struct Problem {
  const Matrix& A;
  const Matrix& B;
  const Matrix& Q;
  const Matrix& N;
  const Matrix& R;
};

bool all_finite(const Matrix& M) { return M.allFinite(); }

/// LU of D^-1 S D^-1 with D = sqrt|diag S|, so the singularity test does not
/// depend on the relative scale of the input channels.
class EquilibratedLu {
 public:
  explicit EquilibratedLu(const Matrix& S) : d_(S.rows()) {
    for (Index i = 0; i < S.rows(); ++i) {
      const double a = std::abs(S(i, i));
      d_(i) = a > 0.0 ? 1.0 / std::sqrt(a) : 1.0;
    }
    lu_.compute(d_.asDiagonal() * S * d_.asDiagonal());
  }
  double rcond() const { return lu_.rcond(); }
  Matrix solve(const Matrix& rhs) const {
    return d_.asDiagonal() * lu_.solve(d_.asDiagonal() * rhs);
  }

 private:
  Vector d_;
  Eigen::PartialPivLU<Matrix> lu_;
};

/// F = -(R + B'PB)^-1 (B'PA + N'); false when the pivot block is singular.
bool gain_from(const Problem& p, const Matrix& P, Matrix& F) {
  const EquilibratedLu lu(linalg::symmetrize(p.R + p.B.transpose() * P * p.B));
  if (!(lu.rcond() > 1e-14)) return false;
  F = -lu.solve(p.B.transpose() * P * p.A + p.N.transpose());
  return all_finite(F);
}

double relative_residual(const Problem& p, const Matrix& P) {
  return dare_residual(p.A, p.B, p.Q, p.N, p.R, P).norm() / (1.0 + P.norm());
}

Matrix closed_loop_weight(const Problem& p, const Matrix& F) {
  return linalg::symmetrize(p.Q + p.N * F + F.transpose() * p.N.transpose() +
                            F.transpose() * p.R * F);
}

/// Structure-preserving doubling on an invertible R.
bool sda(const Problem& p, const Matrix& R_inv_source, int iterations, Matrix& P_out) {
  const Index n = p.A.rows();
  const EquilibratedLu rlu(R_inv_source);
  if (!(rlu.rcond() > 1e-15)) return false;
  Matrix Ak = p.A - p.B * rlu.solve(p.N.transpose());
  Matrix G = linalg::symmetrize(p.B * rlu.solve(p.B.transpose()));
  Matrix H = linalg::symmetrize(p.Q - p.N * rlu.solve(p.N.transpose()));
  const Matrix I = Matrix::Identity(n, n);
  for (int k = 0; k < iterations; ++k) {
    const Eigen::PartialPivLU<Matrix> lu(I + G * H);
    if (!(lu.rcond() > 1e-15)) return false;
    const Matrix X1 = lu.solve(Ak);
    const Matrix X2 = lu.solve(G);
    const Matrix Hn = linalg::symmetrize(H + Ak.transpose() * H * X1);
    const Matrix Gn = linalg::symmetrize(G + Ak * X2 * Ak.transpose());
    const Matrix An = Ak * X1;
    if (!all_finite(Hn) || !all_finite(Gn) || !all_finite(An)) return false;
    const double change = (Hn - H).norm();
    H = Hn;
    G = Gn;
    Ak = An;
    if (change <= 1e-14 * (1.0 + H.norm()) || Ak.norm() <= 1e-300) break;
  }
  P_out = H;
  return all_finite(P_out);
}

/// Newton (Hewer) refinement: each step solves a Stein equation for the
/// closed loop of the current gain. Converges on the residual; gives up once
/// the iterate stops moving without meeting it.
bool newton(const Problem& p, Matrix& P, const DareOptions& opts, DareSolution& out,
            bool& pivot_failure) {
  int stalls = 0;
  Matrix F;
  for (int it = 0; it < opts.newton_iterations; ++it) {
    if (!gain_from(p, P, F)) {
      pivot_failure = true;
      return false;
    }
    const Matrix Acl = p.A + p.B * F;
    if (linalg::spectral_radius(Acl) >= 1.0) return false;
    Matrix next;
    try {
      next = linalg::symmetrize(linalg::solve_stein(Acl, closed_loop_weight(p, F)));
    } catch (const Error&) {
      return false;
    }
    if (!all_finite(next)) return false;
    const double step = (next - P).norm();
    P = next;
    out.iterations += 1;
    const double res = relative_residual(p, P);
    if (res <= opts.tolerance) return true;
    if (step <= 1e-13 * (1.0 + P.norm())) {
      if (++stalls >= 3) return false;
    } else {
      stalls = 0;
    }
  }
  return false;
}

/// Riccati value iteration with a pseudo-inverse pivot, run until the gain it
/// induces is stabilizing.
bool fixed_point(const Problem& p, int iterations, Matrix& P) {
  P = p.Q;
  for (int k = 0; k < iterations; ++k) {
    const Matrix S = linalg::symmetrize(p.R + p.B.transpose() * P * p.B);
    const Matrix K = p.B.transpose() * P * p.A + p.N.transpose();
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(S);
    const Matrix next =
        linalg::symmetrize(p.A.transpose() * P * p.A + p.Q - K.transpose() * cod.solve(K));
    if (!all_finite(next)) return false;
    P = next;
    if (k % 16 == 15) {
      Matrix F;
      if (gain_from(p, P, F) && linalg::spectral_radius(p.A + p.B * F) < 1.0) return true;
    }
  }
  return false;
}

/// Lifts eigenvalues of R that are negligible against the problem scale, so
/// that doubling can run when the input weight is singular.
Matrix regularized(const Problem& p) {
  const double scale = std::max({p.R.norm(), (p.B.transpose() * p.Q * p.B).norm(), 1e-300});
  const double floor = 1e-10 * scale;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(p.R));
  Vector lambda = es.eigenvalues();
  bool changed = false;
  for (Index i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda(i)) < floor) {
      lambda(i) = floor;
      changed = true;
    }
  }
  if (!changed) return linalg::symmetrize(p.R);
  return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Matrix dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N,
                     const Matrix& R, const Matrix& P) {
  const Matrix S = R + B.transpose() * P * B;
  const Matrix K = B.transpose() * P * A + N.transpose();
  return A.transpose() * P * A - P + Q - K.transpose() * S.partialPivLu().solve(K);
}

DareSolution dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N_in,
                  const Matrix& R, const DareOptions& opts) {
  const Index n = A.rows(), m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m) {
    throw std::invalid_argument("dare: dimension mismatch");
  }
  const Matrix N = N_in.size() == 0 ? Matrix::Zero(n, m) : N_in;
  if (N.rows() != n || N.cols() != m) throw std::invalid_argument("dare: N has wrong shape");
  const Matrix Qs = linalg::symmetrize(Q);
  const Matrix Rs = linalg::symmetrize(R);
  const Problem p{A, B, Qs, N, Rs};

  DareSolution out;
  bool pivot_failure = false;
  bool solved = false;
  Matrix P;

  if (sda(p, regularized(p), opts.sda_iterations, P)) {
    out.route = "sda+newton";
    solved = newton(p, P, opts, out, pivot_failure);
  }
  if (!solved && linalg::spectral_radius(A) < 1.0) {
    out.route = "newton";
    out.iterations = 0;
    try {
      P = linalg::solve_stein(A, Qs);
      solved = newton(p, P, opts, out, pivot_failure);
    } catch (const Error&) {
    }
  }
  if (!solved && fixed_point(p, opts.fixed_point_iterations, P)) {
    out.route = "fixed-point+newton";
    out.iterations = 0;
    solved = newton(p, P, opts, out, pivot_failure);
  }
  if (!solved) {
    if (pivot_failure) throw IndefiniteCost("R + B'PB singular along the Riccati iteration");
    throw NotStabilizable("no stabilizing Riccati solution found");
  }

  out.P = P;
  if (!gain_from(p, P, out.F)) throw IndefiniteCost("R + B'PB singular at the solution");
  out.residual = relative_residual(p, P);
  out.closed_loop_rho = linalg::spectral_radius(A + B * out.F);
  if (!(out.closed_loop_rho < 1.0)) {
    std::ostringstream os;
    os << "closed loop spectral radius " << out.closed_loop_rho << " >= 1";
    throw NotStabilizable(os.str());
  }
  return out;
}

Matrix dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N,
                  const Matrix& R) {
  return dare(A, B, Q, N, R).P;
}

}  // namespace dncs::synthesis
