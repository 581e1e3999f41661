#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "dncs/errors.hpp"
#include "dncs/sampled.hpp"
#include "oracles.hpp"

namespace {

using namespace dncs;
using namespace dncs::sampled;
namespace t = dncs::testing;

struct RandomProblem {
  CtsSystem sys;
  CtsCost cost;
};

RandomProblem random_problem(std::mt19937_64& rng, Index nx, Index nu, Index nw = 0,
                             bool cross = true) {
  RandomProblem p;
  p.sys.A1 = t::random_stable(rng, nx);
  p.sys.B1u = t::random_matrix(rng, nx, nu);
  p.sys.B1w = t::random_matrix(rng, nx, nw);
  p.sys.C1 = t::random_matrix(rng, 2, nx);
  p.sys.D1u = t::random_matrix(rng, 2, nu);
  p.sys.D1w = t::random_matrix(rng, 2, nw);
  const Matrix W = t::random_psd(rng, nx + nu, nx + nu) + 0.1 * Matrix::Identity(nx + nu, nx + nu);
  p.cost.Q1 = W.topLeftCorner(nx, nx);
  p.cost.N1 = cross ? Matrix(W.topRightCorner(nx, nu)) : Matrix::Zero(nx, nu);
  p.cost.R1 = W.bottomRightCorner(nu, nu);
  return p;
}

std::vector<Vector> random_inputs(std::mt19937_64& rng, size_t count, Index nu) {
  std::vector<Vector> u;
  for (size_t k = 0; k < count; ++k) u.push_back(t::random_matrix(rng, nu, 1));
  return u;
}

TEST(PhiGamma, NilpotentAndEmptyInterval) {
  const Matrix Z = Matrix::Zero(3, 3);
  auto pg = phi_gamma(Z, 0.7);
  EXPECT_LT((pg.Phi - Matrix::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((pg.Gamma - 0.7 * Matrix::Identity(3, 3)).norm(), 1e-15);
  std::mt19937_64 rng(1);
  pg = phi_gamma(t::random_matrix(rng, 3, 3), 0.0);
  EXPECT_LT((pg.Phi - Matrix::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT(pg.Gamma.norm(), 1e-15);
}

TEST(PhiGamma, ScalarMatchesSeries) {
  const auto pg = phi_gamma(Matrix::Constant(1, 1, -1.0), 1.0);
  EXPECT_NEAR(pg.Phi(0, 0), t::series_exp(-1.0, 1.0), 1e-12);
  EXPECT_NEAR(pg.Gamma(0, 0), t::series_exp_integral(-1.0, 1.0), 1e-12);
  EXPECT_NEAR(pg.Phi(0, 0), 0.36788, 5e-6);
  EXPECT_NEAR(pg.Gamma(0, 0), 0.63212, 5e-6);
}

TEST(PhiGamma, IdentityPhiEqualsIPlusAGamma) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix A = t::random_matrix(rng, 4, 4);
    const auto pg = phi_gamma(A, 0.3);
    EXPECT_LT((pg.Phi - Matrix::Identity(4, 4) - A * pg.Gamma).norm(), 1e-12 * pg.Phi.norm());
  }
}

TEST(Pmu, ZeroStateCost) {
  std::mt19937_64 rng(3);
  CtsSystem sys{t::random_stable(rng, 3), t::random_matrix(rng, 3, 2), Matrix(3, 0), Matrix(),
                Matrix(), Matrix()};
  CtsCost cost{Matrix::Zero(3, 3), Matrix::Zero(3, 2), Matrix::Identity(2, 2)};
  const auto pmu = solve_pmu(sys, cost);
  EXPECT_LT(pmu.P.norm(), 1e-14);
  EXPECT_LT(pmu.M.norm(), 1e-14);
  EXPECT_LT((pmu.U - cost.R1).norm(), 1e-14);
}

TEST(Pmu, ScalarAlgebra) {
  CtsSystem sys{Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0), Matrix(1, 0),
                Matrix(), Matrix(), Matrix()};
  CtsCost cost{Matrix::Constant(1, 1, 2.0), Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.0)};
  const auto pmu = solve_pmu(sys, cost);
  EXPECT_NEAR(pmu.P(0, 0), -1.0, 1e-14);
  // M = A^-T (N - P B) = -1 * (0 + 1), U = R - 2 B M = 1 + 2.
  EXPECT_NEAR(pmu.M(0, 0), -1.0, 1e-14);
  EXPECT_NEAR(pmu.U(0, 0), 3.0, 1e-14);
}

TEST(Pmu, RandomResidual) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, 3, 2);
    const auto pmu = solve_pmu(p.sys, p.cost);
    const Matrix& A = p.sys.A1;
    const Matrix& B = p.sys.B1u;
    const double r1 = linalg::relative_error(pmu.P * A + A.transpose() * pmu.P, p.cost.Q1);
    const double r2 = linalg::relative_error(A.transpose() * pmu.M, p.cost.N1 - pmu.P * B);
    const double r3 = linalg::relative_error(
        pmu.U, p.cost.R1 - B.transpose() * pmu.M - pmu.M.transpose() * B);
    EXPECT_LE(std::max({r1, r2, r3}), 1e-10);
    EXPECT_LE(pmu.residual, 1e-10);
  }
}

TEST(Pmu, SingularDriftIsIllPosed) {
  CtsSystem sys{Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix(2, 0), Matrix(), Matrix(),
                Matrix()};
  CtsCost cost{Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Identity(2, 2)};
  EXPECT_THROW(solve_pmu(sys, cost), IllPosedLyapunov);
}

TEST(Psi, EmptyInterval) {
  std::mt19937_64 rng(5);
  const auto p = random_problem(rng, 2, 1);
  EXPECT_LT(psi_blocks(solve_pmu(p.sys, p.cost), p.sys, 0.0).norm(), 1e-14);
}

TEST(Psi, MatchesQuadratureAndIsPsd) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, 2, 1);
    const Matrix Psi = psi_blocks(solve_pmu(p.sys, p.cost), p.sys, 0.1);
    EXPECT_LT((Psi - Psi.transpose()).norm(), 1e-13 * Psi.norm());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(linalg::symmetrize(Psi)).eigenvalues()(0),
              -1e-12 * Psi.norm());
    const Vector x0 = t::random_matrix(rng, 2, 1);
    const Vector u = t::random_matrix(rng, 1, 1);
    const auto ref = t::rk4_delayed_zoh(p.sys.A1, p.sys.B1u, Matrix(2, 0),
                                        p.cost.stacked(), 0.1, 0.0, {}, {u}, x0);
    Vector xu(3);
    xu << x0, u;
    EXPECT_NEAR(xu.dot(Psi * xu), ref.cost, 1e-8 * std::abs(ref.cost));
  }
}

TEST(Psi, AdditiveOverSplitIntervals) {
  std::mt19937_64 rng(7);
  const auto p = random_problem(rng, 3, 2);
  const auto pmu = solve_pmu(p.sys, p.cost);
  const double b1 = 0.07, b2 = 0.11;
  const Vector x0 = t::random_matrix(rng, 3, 1);
  const Vector u = t::random_matrix(rng, 2, 1);
  auto quad = [](const Matrix& Psi, const Vector& x, const Vector& v) {
    Vector xu(x.size() + v.size());
    xu << x, v;
    return xu.dot(Psi * xu);
  };
  const auto pg = phi_gamma(p.sys.A1, b1);
  const Vector x1 = pg.Phi * x0 + pg.Gamma * p.sys.B1u * u;
  const double whole = quad(psi_blocks(pmu, p.sys, b1 + b2), x0, u);
  const double split = quad(psi_blocks(pmu, p.sys, b1), x0, u) + quad(psi_blocks(pmu, p.sys, b2), x1, u);
  EXPECT_NEAR(whole, split, 1e-10 * std::abs(whole));
}

TEST(SplitDelay, Cases) {
  auto s = split_delay(0.1, 0.25);
  EXPECT_EQ(s.q, 2);
  EXPECT_NEAR(s.r, 0.05, 1e-15);
  s = split_delay(0.1, 0.1);
  EXPECT_EQ(s.q, 0);
  EXPECT_DOUBLE_EQ(s.r, 0.1);
  s = split_delay(0.1, 0.0);
  EXPECT_EQ(s.q, 0);
  EXPECT_EQ(s.r, 0.0);
  s = split_delay(0.02, 0.06);
  EXPECT_EQ(s.q, 2);
  EXPECT_DOUBLE_EQ(s.r, 0.02);
  s = split_delay(0.02, 0.14);
  EXPECT_EQ(s.q, 6);
  EXPECT_DOUBLE_EQ(s.r, 0.02);
}

TEST(Discretize, ZeroDelayFields) {
  std::mt19937_64 rng(8);
  const auto p = random_problem(rng, 3, 2, 1);
  const auto disc = discretize(p.sys, p.cost, 0.1, 0.0);
  const auto pg = phi_gamma(p.sys.A1, 0.1);
  EXPECT_EQ(disc.nz(), 3);
  EXPECT_EQ(disc.history_slots(), 0);
  EXPECT_LT((disc.A2 - pg.Phi).norm(), 1e-14);
  EXPECT_LT((disc.B2u - pg.Gamma * p.sys.B1u).norm(), 1e-14);
  EXPECT_LT((disc.B2w - pg.Gamma * p.sys.B1w).norm(), 1e-14);
  EXPECT_LT((disc.C2 - p.sys.C1).norm(), 1e-15);
  EXPECT_LT((disc.D2u - p.sys.D1u).norm(), 1e-15);
  EXPECT_LT((disc.D2w - p.sys.D1w).norm(), 1e-15);
}

TEST(Discretize, FullStepDelay) {
  std::mt19937_64 rng(9);
  const auto p = random_problem(rng, 3, 2);
  const auto disc = discretize(p.sys, p.cost, 0.1, 0.1);
  const auto pg = phi_gamma(p.sys.A1, 0.1);
  EXPECT_EQ(disc.q, 0);
  EXPECT_DOUBLE_EQ(disc.r, 0.1);
  EXPECT_EQ(disc.nz(), 5);
  EXPECT_LT((disc.A2.block(0, 3, 3, 2) - pg.Gamma * p.sys.B1u).norm(), 1e-13);
  EXPECT_LT(disc.B2u.topRows(3).norm(), 1e-15);
  EXPECT_LT((disc.B2u.bottomRows(2) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(Discretize, InvalidSampling) {
  std::mt19937_64 rng(10);
  const auto p = random_problem(rng, 2, 1);
  EXPECT_THROW(discretize(p.sys, p.cost, 0.0, 0.0), InvalidSampling);
  EXPECT_THROW(discretize(p.sys, p.cost, -0.1, 0.0), InvalidSampling);
  EXPECT_THROW(discretize(p.sys, p.cost, 0.1, -0.01), InvalidSampling);
}

// Iterates the lifted system and compares states and cost with the RK4
// delayed-hold oracle. Returns the worst relative errors.
std::pair<double, double> lifted_vs_oracle(const RandomProblem& p, double h, double d, int steps,
                                           std::mt19937_64& rng) {
  const auto disc = discretize(p.sys, p.cost, h, d);
  const Index nx = p.sys.nx(), nu = p.sys.nu();
  const auto history = random_inputs(rng, static_cast<size_t>(disc.history_slots()), nu);
  const auto inputs = random_inputs(rng, static_cast<size_t>(steps), nu);
  const Vector x0 = t::random_matrix(rng, nx, 1);
  const auto ref = t::rk4_delayed_zoh(p.sys.A1, p.sys.B1u, Matrix(nx, 0), p.cost.stacked(), h, d,
                                      history, inputs, x0, {}, 500);
  Vector z(disc.nz());
  z.head(nx) = x0;
  for (Index s = 0; s < disc.history_slots(); ++s) z.segment(nx + s * nu, nu) = history[static_cast<size_t>(s)];
  const Matrix W = disc.cost_matrix();
  double cost = 0.0, scale = 0.0, state_err = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Vector& u = inputs[static_cast<size_t>(k)];
    Vector zu(z.size() + nu);
    zu << z, u;
    cost += zu.dot(W * zu);
    z = disc.A2 * z + disc.B2u * u;
    scale = std::max(scale, ref.states[static_cast<size_t>(k + 1)].norm());
    state_err = std::max(state_err, (z.head(nx) - ref.states[static_cast<size_t>(k + 1)]).norm());
  }
  return {state_err / scale, std::abs(cost - ref.cost) / std::abs(ref.cost)};
}

TEST(Discretize, MatchesDelayedHoldSimulation) {
  std::mt19937_64 rng(12);
  const auto p = random_problem(rng, 3, 1);
  const auto disc = discretize(p.sys, p.cost, 0.1, 0.25);
  EXPECT_EQ(disc.q, 2);
  EXPECT_NEAR(disc.r, 0.05, 1e-15);
  const auto [state_err, cost_err] = lifted_vs_oracle(p, 0.1, 0.25, 50, rng);
  EXPECT_LE(state_err, 1e-9);
  EXPECT_LE(cost_err, 1e-8);
}

TEST(Discretize, ExactOverDelayRatios) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<Index> nx_dist(1, 4), nu_dist(1, 2);
  for (int trial = 0; trial < 8; ++trial) {
    const auto p = random_problem(rng, nx_dist(rng), nu_dist(rng));
    for (double ratio : {0.0, 0.3, 1.0, 1.7, 3.2}) {
      const auto [state_err, cost_err] = lifted_vs_oracle(p, 0.1, ratio * 0.1, 15, rng);
      EXPECT_LE(state_err, 1e-8) << "trial " << trial << " ratio " << ratio;
      EXPECT_LE(cost_err, 1e-8) << "trial " << trial << " ratio " << ratio;
    }
  }
}

TEST(Discretize, HistoryShiftsOneSlot) {
  std::mt19937_64 rng(14);
  const Index nx = 2, nu = 2;
  const auto p = random_problem(rng, nx, nu);
  const auto disc = discretize(p.sys, p.cost, 0.1, 0.32);
  ASSERT_EQ(disc.history_slots(), 4);
  // Slot s (oldest first) carrying a one-hot input moves to slot s - 1.
  for (Index s = 0; s < disc.history_slots(); ++s) {
    for (Index c = 0; c < nu; ++c) {
      Vector z = Vector::Zero(disc.nz());
      z(nx + s * nu + c) = 1.0;
      const Vector next = disc.A2 * z;
      Vector expected_tail = Vector::Zero(disc.nz() - nx);
      if (s > 0) expected_tail((s - 1) * nu + c) = 1.0;
      EXPECT_EQ(next.tail(disc.nz() - nx), expected_tail) << "slot " << s;
    }
  }
  const Vector u = Vector::Ones(nu);
  const Vector next = disc.B2u * u;
  EXPECT_EQ(next.tail(nu), u);
  EXPECT_EQ(next.segment(nx, disc.nz() - nx - nu), Vector::Zero(disc.nz() - nx - nu));
}

TEST(Discretize, OutputUsesRightLimitInput) {
  std::mt19937_64 rng(15);
  const auto p = random_problem(rng, 2, 1, 1);
  for (double d : {0.0, 0.05, 0.23}) {
    const auto disc = discretize(p.sys, p.cost, 0.1, d);
    Vector z = t::random_matrix(rng, disc.nz(), 1);
    const Vector u = t::random_matrix(rng, 1, 1);
    const Vector w = t::random_matrix(rng, 1, 1);
    const Vector applied = d > 0.0 ? Vector(z.segment(2, 1)) : u;
    const Vector y = disc.C2 * z + disc.D2u * u + disc.D2w * w;
    const Vector expected = p.sys.C1 * z.head(2) + p.sys.D1u * applied + p.sys.D1w * w;
    EXPECT_LT((y - expected).norm(), 1e-14 * (1.0 + expected.norm())) << "d = " << d;
  }
}

TEST(Discretize, CostMatrixIsPsd) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_problem(rng, 3, 2, 0, false);
    for (double d : {0.0, 0.04, 0.1, 0.27}) {
      const Matrix W = discretize(p.sys, p.cost, 0.1, d).cost_matrix();
      const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(linalg::symmetrize(W)).eigenvalues()(0);
      EXPECT_GE(lo, -1e-10 * W.norm());
    }
  }
}

TEST(Discretize, SmallDelayApproachesZeroDelayWithLag) {
  std::mt19937_64 rng(17);
  const auto p = random_problem(rng, 2, 1);
  const auto d0 = discretize(p.sys, p.cost, 0.1, 0.0);
  const auto dp = discretize(p.sys, p.cost, 0.1, 1e-7);
  ASSERT_EQ(dp.q, 0);
  EXPECT_LT((dp.A2.topLeftCorner(2, 2) - d0.A2).norm(), 1e-12);
  EXPECT_LT(dp.A2.block(0, 2, 2, 1).norm(), 1e-6);
  EXPECT_LT((dp.B2u.topRows(2) - d0.B2u).norm(), 1e-6);
  EXPECT_LT((dp.Q2.topLeftCorner(2, 2) - d0.Q2).norm(), 1e-6 * d0.Q2.norm());
  const auto dq = discretize(p.sys, p.cost, 0.1, 1e-8);
  const double gap_p = (dp.R2 - d0.R2).norm(), gap_q = (dq.R2 - d0.R2).norm();
  EXPECT_LT(gap_p, 1e-5 * d0.R2.norm());
  EXPECT_LT(gap_q, 0.2 * gap_p);
}

TEST(Quadrature, ZeroStateAndInputs) {
  std::mt19937_64 rng(18);
  const auto p = random_problem(rng, 2, 1);
  const auto res = quadrature_cost_oracle(p.sys, p.cost, 0.1, 0.13, {Vector::Zero(1), Vector::Zero(1)},
                                          {Vector::Zero(1), Vector::Zero(1)}, Vector::Zero(2));
  EXPECT_EQ(res.cost, 0.0);
}

TEST(Quadrature, SingleIntervalMatchesPsi) {
  CtsSystem sys{Matrix::Constant(1, 1, -0.7), Matrix::Constant(1, 1, 1.3), Matrix(1, 0), Matrix(),
                Matrix(), Matrix()};
  CtsCost cost{Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 0.3), Matrix::Constant(1, 1, 0.5)};
  const Matrix Psi = psi_blocks(solve_pmu(sys, cost), sys, 0.2);
  const Vector x0 = Vector::Constant(1, 0.8), u = Vector::Constant(1, -1.1);
  Vector xu(2);
  xu << x0, u;
  const auto res = quadrature_cost_oracle(sys, cost, 0.2, 0.0, {}, {u}, x0);
  EXPECT_NEAR(res.cost, xu.dot(Psi * xu), 1e-8 * std::abs(res.cost));
}

TEST(Quadrature, ConvergedInStepSize) {
  std::mt19937_64 rng(19);
  const auto p = random_problem(rng, 3, 2);
  const auto hist = random_inputs(rng, 2, 2);
  const auto in = random_inputs(rng, 6, 2);
  const Vector x0 = t::random_matrix(rng, 3, 1);
  const auto coarse = quadrature_cost_oracle(p.sys, p.cost, 0.1, 0.17, hist, in, x0, {}, 1000);
  const auto fine = quadrature_cost_oracle(p.sys, p.cost, 0.1, 0.17, hist, in, x0, {}, 2000);
  EXPECT_LT(std::abs(coarse.cost - fine.cost), 1e-10 * std::abs(fine.cost));
}

}  // namespace
