#pragma once

#include <string>

#include "dncs/linalg.hpp"
#include "dncs/sampled.hpp"

/// Discrete-time LQR and H-infinity state feedback on a lifted sampled system.
namespace dncs::synthesis {

struct DareOptions {
  double tolerance = 1e-9;  ///< residual <= tolerance * (1 + ||P||)
  int sda_iterations = 80;
  int newton_iterations = 120;
  int fixed_point_iterations = 20000;
};

/// Stabilizing solution of
///   P = A'PA - (A'PB + N)(R + B'PB)^-1 (B'PA + N') + Q
/// together with the gain F = -(R + B'PB)^-1 (B'PA + N') applied as u = F x.
struct DareSolution {
  Matrix P;
  Matrix F;
  double residual = 0.0;       ///< ||residual|| / (1 + ||P||)
  double closed_loop_rho = 0.0;
  int iterations = 0;
  std::string route;           ///< "sda+newton", "newton", "fixed-point+newton"
};

/// Throws NotStabilizable when no stabilizing solution is found and
/// IndefiniteCost when R + B'PB becomes singular.
DareSolution dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N,
                  const Matrix& R, const DareOptions& opts = {});

/// Convenience wrapper returning P only.
Matrix dare_solve(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N,
                  const Matrix& R);

/// Unscaled residual matrix of the Riccati equation at P.
Matrix dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N,
                     const Matrix& R, const Matrix& P);

struct LqrResult {
  Matrix F;  ///< u = F z
  Matrix P;
  double residual = 0.0;
  double closed_loop_rho = 0.0;

  /// Optimal cost from z0: z0' P z0.
  double cost(const Vector& z0) const { return z0.dot(P * z0); }
};

LqrResult lqr_design(const sampled::DiscretizedSystem& disc);

/// LQR on an arbitrary (A, B, Q, N, R) with the same certification.
LqrResult lqr_design(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N,
                     const Matrix& R);

struct HinfResult {
  Matrix F;  ///< u = F z
  Matrix P;
  double gamma = 0.0;
  double certified_norm = 0.0;  ///< hinf_norm of the closed loop, < gamma
  double H1_min_eig = 0.0;
  double H3_min_eig = 0.0;
  int sign = -1;                ///< u = sign * H1^-1 (H5_u + H2 H3^-1 H4) z
  std::string note;
};

/// Throws GammaInfeasible naming the failed check.
HinfResult hinf_design(const sampled::DiscretizedSystem& disc, double gamma);

struct GammaSearch {
  double gamma_star = 0.0;
  HinfResult design;
  int evaluations = 0;
  double lower_bracket = 0.0;  ///< largest lattice value found infeasible
};

/// Bisection over the lattice (1 + tol)^j, so the result does not depend on
/// how the brackets were obtained. Throws NoFeasibleGamma.
GammaSearch gamma_min(const sampled::DiscretizedSystem& disc, double tol);

/// sup over the unit circle of sigma_max(C (zI - A)^-1 B + D). Throws
/// UnstableSystem when rho(A) >= 1.
double hinf_norm(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D);

}  // namespace dncs::synthesis
