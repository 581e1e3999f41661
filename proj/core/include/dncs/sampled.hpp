#pragma once

#include <vector>

#include "dncs/linalg.hpp"

/// Exact zero-order-hold discretization of a linear system and its quadratic
/// cost when the held input arrives after a constant delay d = q h + r.
namespace dncs::sampled {

/// x' = A1 x + B1u u(t - d) + B1w w,  y = C1 x + D1u u(t - d) + D1w w.
struct CtsSystem {
  Matrix A1, B1u, B1w, C1, D1u, D1w;

  Index nx() const { return A1.rows(); }
  Index nu() const { return B1u.cols(); }
  Index nw() const { return B1w.cols(); }
  Index ny() const { return C1.rows(); }
  /// Throws std::invalid_argument on inconsistent dimensions. Empty output
  /// and disturbance blocks are allowed.
  void validate() const;
};

/// Integrand [x; u]' [Q1 N1; N1' R1] [x; u].
struct CtsCost {
  Matrix Q1, N1, R1;

  Matrix stacked() const;
};

struct PhiGamma {
  Matrix Phi;    ///< exp(alpha A1)
  Matrix Gamma;  ///< int_0^alpha exp(A1 s) ds
};

/// Both blocks from one exponential of [[A1, I], [0, 0]] alpha.
PhiGamma phi_gamma(const Matrix& A1, double alpha);

/// Solution of P A1 + A1' P = Q1, M = A1^-T (N1 - P B1u),
/// U = R1 - B1u' M - M' B1u.
struct PMU {
  Matrix P, M, U;
  double residual = 0.0;  ///< largest relative residual of the three identities
};

PMU solve_pmu(const CtsSystem& sys, const CtsCost& cost);

/// Cost of one interval of length b with x(0) = x0 and a constant input:
/// [x0; u]' Psi(b) [x0; u].
Matrix psi_blocks(const PMU& pmu, const CtsSystem& sys, double b);

struct DelaySplit {
  int q = 0;
  double r = 0.0;
};

/// q = max{k : k h < d}, r = d - q h, so 0 < r <= h for d > 0. Delays within
/// 1e-9 h of a multiple of h are snapped to it.
DelaySplit split_delay(double h, double d);

/// Lifted discrete system over z_k = [x_k; u_{k-q-1}; ...; u_{k-1}]
/// (z_k = x_k when d = 0) with stage cost [z; u]' [Q2 N2; N2' R2] [z; u].
/// The output samples the right limit: y_k = C1 x_k + D1u u(kh+) + D1w w_k.
struct DiscretizedSystem {
  Matrix A2, B2u, B2w, C2, D2u, D2w;
  Matrix Q2, N2, R2;
  double h = 0.0;
  double d = 0.0;
  int q = 0;
  double r = 0.0;
  Index nx = 0;
  Index nu = 0;

  Index nz() const { return A2.rows(); }
  /// Number of stored past inputs (q + 1 for d > 0, else 0).
  Index history_slots() const { return d > 0.0 ? q + 1 : 0; }
  Matrix cost_matrix() const;
};

DiscretizedSystem discretize(const CtsSystem& sys, const CtsCost& cost, double h, double d);

/// Independent reference for the discrete cost: propagates the exact
/// trajectory on a sub-grid of h/1000 and integrates the stage cost with
/// composite Simpson. `history` holds u_{-q-1}..u_{-1} (oldest first, q+1
/// entries when d > 0), `inputs` holds u_0..u_{N-1}, `disturbances` is
/// empty or holds w_0..w_{N-1}. The horizon is N steps.
struct QuadratureResult {
  double cost = 0.0;
  std::vector<Vector> states;  ///< x(kh), k = 0..N
};

QuadratureResult quadrature_cost_oracle(const CtsSystem& sys, const CtsCost& cost, double h,
                                        double d, const std::vector<Vector>& history,
                                        const std::vector<Vector>& inputs, const Vector& x0,
                                        const std::vector<Vector>& disturbances = {},
                                        int substeps = 1000);

}  // namespace dncs::sampled
