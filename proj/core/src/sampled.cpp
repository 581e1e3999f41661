#include "dncs/sampled.hpp"

#include <cmath>
#include <stdexcept>

#include "dncs/errors.hpp"

namespace dncs::sampled {

namespace {

Matrix or_zero(const Matrix& M, Index rows, Index cols) {
  if (M.size() == 0) return Matrix::Zero(rows, cols);
  return M;
}

void expect_shape(const Matrix& M, Index rows, Index cols, const char* name) {
  if (M.size() == 0 && (rows == 0 || cols == 0)) return;
  if (M.rows() != rows || M.cols() != cols) {
    throw std::invalid_argument(std::string("dimension mismatch in ") + name);
  }
}

}  // namespace

void CtsSystem::validate() const {
  const Index n = A1.rows();
  if (A1.cols() != n) throw std::invalid_argument("A1 must be square");
  if (B1u.rows() != n) throw std::invalid_argument("B1u row count must match A1");
  if (B1w.size() != 0 && B1w.rows() != n) throw std::invalid_argument("B1w row count must match A1");
  if (C1.size() != 0) {
    expect_shape(C1, C1.rows(), n, "C1");
    if (D1u.size() != 0) expect_shape(D1u, C1.rows(), nu(), "D1u");
    if (D1w.size() != 0) expect_shape(D1w, C1.rows(), nw(), "D1w");
  }
}

Matrix CtsCost::stacked() const {
  const Index n = Q1.rows(), m = R1.rows();
  Matrix W(n + m, n + m);
  const Matrix N = or_zero(N1, n, m);
  W << Q1, N, N.transpose(), R1;
  return W;
}

PhiGamma phi_gamma(const Matrix& A1, double alpha) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("phi_gamma: alpha must be finite");
  const Index n = A1.rows();
  Matrix aug = Matrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = A1 * alpha;
  aug.topRightCorner(n, n) = Matrix::Identity(n, n) * alpha;
  const Matrix E = linalg::expm(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, n)};
}

PMU solve_pmu(const CtsSystem& sys, const CtsCost& cost) {
  sys.validate();
  const Index n = sys.nx(), m = sys.nu();
  expect_shape(cost.Q1, n, n, "Q1");
  expect_shape(cost.R1, m, m, "R1");
  const Matrix N1 = or_zero(cost.N1, n, m);
  expect_shape(N1, n, m, "N1");

  const Eigen::FullPivLU<Matrix> lu(sys.A1.transpose());
  if (!lu.isInvertible()) throw IllPosedLyapunov("A1 is singular");

  PMU out;
  out.P = linalg::symmetrize(linalg::solve_continuous_lyapunov(sys.A1, cost.Q1));
  out.M = lu.solve(N1 - out.P * sys.B1u);
  out.U = linalg::symmetrize(cost.R1 - sys.B1u.transpose() * out.M -
                             out.M.transpose() * sys.B1u);

  const double r1 = linalg::relative_error(out.P * sys.A1 + sys.A1.transpose() * out.P, cost.Q1,
                                           out.P.norm() * sys.A1.norm() + 1e-300);
  const double r2 = linalg::relative_error(out.P * sys.B1u + sys.A1.transpose() * out.M, N1,
                                           out.P.norm() * sys.B1u.norm() + 1e-300);
  const double r3 = linalg::relative_error(
      sys.B1u.transpose() * out.M + out.M.transpose() * sys.B1u + out.U, cost.R1,
      cost.R1.norm() + out.M.norm() * sys.B1u.norm() + 1e-300);
  out.residual = std::max({r1, r2, r3});
  return out;
}

Matrix psi_blocks(const PMU& pmu, const CtsSystem& sys, double b) {
  if (!(b >= 0.0)) throw std::invalid_argument("psi_blocks: b must be nonnegative");
  const Index n = sys.nx(), m = sys.nu();
  const PhiGamma pg = phi_gamma(sys.A1, b);
  const Matrix& Phi = pg.Phi;
  const Matrix GB = pg.Gamma * sys.B1u;
  const Matrix& P = pmu.P;
  const Matrix& M = pmu.M;

  const Matrix psi1 = Phi.transpose() * P * Phi - P;
  const Matrix psi3 = Phi.transpose() * P * GB + Phi.transpose() * M - M;
  const Matrix psi2 = GB.transpose() * P * GB + M.transpose() * GB + GB.transpose() * M + b * pmu.U;

  Matrix Psi(n + m, n + m);
  Psi << psi1, psi3, psi3.transpose(), psi2;
  return linalg::symmetrize(Psi);
}

DelaySplit split_delay(double h, double d) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidSampling("sampling period must be positive");
  if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidSampling("delay must be nonnegative");
  if (d == 0.0) return {0, 0.0};
  const double ratio = d / h;
  const double k = std::round(ratio);
  if (k >= 1.0 && std::abs(ratio - k) <= 1e-9) return {static_cast<int>(k) - 1, h};
  const double q = std::floor(ratio);
  return {static_cast<int>(q), d - q * h};
}

Matrix DiscretizedSystem::cost_matrix() const {
  Matrix W(nz() + nu, nz() + nu);
  W << Q2, N2, N2.transpose(), R2;
  return W;
}

DiscretizedSystem discretize(const CtsSystem& sys, const CtsCost& cost, double h, double d) {
  const DelaySplit split = split_delay(h, d);
  const PMU pmu = solve_pmu(sys, cost);
  const Index nx = sys.nx(), nu = sys.nu(), nw = sys.nw(), ny = sys.ny();
  const Matrix B1w = or_zero(sys.B1w, nx, nw);
  const Matrix D1u = or_zero(sys.D1u, ny, nu);
  const Matrix D1w = or_zero(sys.D1w, ny, nw);

  DiscretizedSystem out;
  out.h = h;
  out.d = d;
  out.q = split.q;
  out.r = split.r;
  out.nx = nx;
  out.nu = nu;
  const PhiGamma full = phi_gamma(sys.A1, h);

  if (d == 0.0) {
    const Matrix Psi = psi_blocks(pmu, sys, h);
    out.A2 = full.Phi;
    out.B2u = full.Gamma * sys.B1u;
    out.B2w = full.Gamma * B1w;
    out.C2 = or_zero(sys.C1, ny, nx);
    out.D2u = D1u;
    out.D2w = D1w;
    out.Q2 = Psi.topLeftCorner(nx, nx);
    out.N2 = Psi.topRightCorner(nx, nu);
    out.R2 = Psi.bottomRightCorner(nu, nu);
    return out;
  }

  const int q = split.q;
  const double r = split.r;
  const Index nz = nx + (q + 1) * nu;
  const PhiGamma at_r = phi_gamma(sys.A1, r);
  const PhiGamma rest = phi_gamma(sys.A1, h - r);
  const Matrix gamma1 = rest.Phi * at_r.Gamma * sys.B1u;
  const Matrix gamma0 = rest.Gamma * sys.B1u;

  out.A2 = Matrix::Zero(nz, nz);
  out.B2u = Matrix::Zero(nz, nu);
  out.A2.topLeftCorner(nx, nx) = full.Phi;
  out.A2.block(0, nx, nx, nu) = gamma1;
  if (q == 0) {
    out.B2u.topRows(nx) = gamma0;
    out.B2u.bottomRows(nu).setIdentity();
  } else {
    out.A2.block(0, nx + nu, nx, nu) = gamma0;
    for (int j = 0; j < q; ++j) {
      out.A2.block(nx + j * nu, nx + (j + 1) * nu, nu, nu).setIdentity();
    }
    out.B2u.bottomRows(nu).setIdentity();
  }
  out.B2w = Matrix::Zero(nz, nw);
  out.B2w.topRows(nx) = full.Gamma * B1w;

  out.C2 = Matrix::Zero(ny, nz);
  if (ny > 0) {
    out.C2.leftCols(nx) = or_zero(sys.C1, ny, nx);
    out.C2.block(0, nx, ny, nu) = D1u;
  }
  out.D2u = Matrix::Zero(ny, nu);
  out.D2w = D1w;

  // Stage cost over [kh, kh+h]: first r seconds on u_{k-q-1}, then h-r on the
  // next input, starting from the propagated state.
  const Index nv = nz + nu;
  const Index next_input = q == 0 ? nz : nx + nu;
  Matrix E0 = Matrix::Zero(nx + nu, nv);
  E0.leftCols(nx + nu).setIdentity();
  Matrix Phi1 = Matrix::Zero(nx + nu, nv);
  Phi1.topLeftCorner(nx, nx) = at_r.Phi;
  Phi1.block(0, nx, nx, nu) = at_r.Gamma * sys.B1u;
  Phi1.block(nx, next_input, nu, nu).setIdentity();

  const Matrix W = E0.transpose() * psi_blocks(pmu, sys, r) * E0 +
                   Phi1.transpose() * psi_blocks(pmu, sys, h - r) * Phi1;
  const Matrix Ws = linalg::symmetrize(W);
  out.Q2 = Ws.topLeftCorner(nz, nz);
  out.N2 = Ws.topRightCorner(nz, nu);
  out.R2 = Ws.bottomRightCorner(nu, nu);
  return out;
}

QuadratureResult quadrature_cost_oracle(const CtsSystem& sys, const CtsCost& cost, double h,
                                        double d, const std::vector<Vector>& history,
                                        const std::vector<Vector>& inputs, const Vector& x0,
                                        const std::vector<Vector>& disturbances, int substeps) {
  const DelaySplit split = split_delay(h, d);
  const Index nx = sys.nx(), nu = sys.nu(), nw = sys.nw();
  const Index slots = d > 0.0 ? split.q + 1 : 0;
  if (static_cast<Index>(history.size()) != slots) {
    throw std::invalid_argument("quadrature oracle: history must hold q+1 inputs when d > 0");
  }
  if (!disturbances.empty() && disturbances.size() != inputs.size()) {
    throw std::invalid_argument("quadrature oracle: disturbance sequence length mismatch");
  }
  const Matrix W = cost.stacked();
  const Matrix B1w = or_zero(sys.B1w, nx, nw);

  auto input_at = [&](long j) -> const Vector& {
    return j < 0 ? history[static_cast<size_t>(j + slots)] : inputs[static_cast<size_t>(j)];
  };

  QuadratureResult out;
  Vector x = x0;
  out.states.push_back(x);
  Vector xu(nx + nu);
  auto integrand = [&](const Vector& state, const Vector& u) {
    xu << state, u;
    return xu.dot(W * xu);
  };

  for (size_t k = 0; k < inputs.size(); ++k) {
    const Vector wk = disturbances.empty() ? Vector::Zero(nw) : disturbances[k];
    struct Segment {
      double length;
      long input;
    };
    std::vector<Segment> segments;
    const long kk = static_cast<long>(k);
    if (d == 0.0) {
      segments.push_back({h, kk});
    } else {
      segments.push_back({split.r, kk - split.q - 1});
      if (h - split.r > 0.0) segments.push_back({h - split.r, kk - split.q});
    }
    for (const Segment& seg : segments) {
      const Vector& v = input_at(seg.input);
      long n = static_cast<long>(std::ceil(substeps * seg.length / h / 2.0)) * 2;
      n = std::max(n, 2L);
      const double tau = seg.length / static_cast<double>(n);
      const PhiGamma pg = phi_gamma(sys.A1, tau);
      const Vector drive = pg.Gamma * (sys.B1u * v + B1w * wk);
      double acc = integrand(x, v);
      for (long j = 1; j <= n; ++j) {
        x = pg.Phi * x + drive;
        const double g = integrand(x, v);
        acc += (j == n ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0)) * g;
      }
      out.cost += acc * tau / 3.0;
    }
    out.states.push_back(x);
  }
  return out;
}

}  // namespace dncs::sampled
