#include "dncs/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "dncs/errors.hpp"

namespace dncs::synthesis {

namespace {

using cplx = std::complex<double>;

double min_eig(const Matrix& S) {
  if (S.size() == 0) return std::numeric_limits<double>::infinity();
  return linalg::min_symmetric_eigenvalue(S);
}

/// Frequency response evaluator on a Hessenberg realization: each point costs
/// O(n^2) per input column.
class FrequencyResponse {
 public:
  FrequencyResponse(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D)
      : D_(D) {
    const Eigen::HessenbergDecomposition<Matrix> hd(A);
    H_ = hd.matrixH();
    const Matrix Qm = hd.matrixQ();
    B_ = Qm.transpose() * B;
    C_ = C * Qm;
  }

  double sigma_max(double theta) const {
    const Index n = H_.rows(), nb = B_.cols();
    const cplx z = std::polar(1.0, theta);
    ComplexMatrix G = D_.cast<cplx>();
    if (n > 0) {
      ComplexMatrix M = -H_.cast<cplx>();
      M.diagonal().array() += z;
      ComplexMatrix X = B_.cast<cplx>();
      // Gaussian elimination with adjacent-row pivoting on the Hessenberg form.
      for (Index k = 0; k + 1 < n; ++k) {
        if (std::abs(M(k + 1, k)) > std::abs(M(k, k))) {
          M.row(k).swap(M.row(k + 1));
          X.row(k).swap(X.row(k + 1));
        }
        if (M(k + 1, k) == cplx(0.0)) continue;
        const cplx l = M(k + 1, k) / M(k, k);
        M.row(k + 1).tail(n - k) -= l * M.row(k).tail(n - k);
        X.row(k + 1) -= l * X.row(k);
      }
      for (Index c = 0; c < nb; ++c) {
        for (Index i = n - 1; i >= 0; --i) {
          cplx s = X(i, c);
          for (Index j = i + 1; j < n; ++j) s -= M(i, j) * X(j, c);
          X(i, c) = s / M(i, i);
        }
      }
      G += C_.cast<cplx>() * X;
    }
    if (G.size() == 0) return 0.0;
    if (G.rows() == 1 || G.cols() == 1) return G.norm();
    return Eigen::JacobiSVD<ComplexMatrix>(G).singularValues()(0);
  }

 private:
  Matrix H_, B_, C_, D_;
};

double golden_max(const FrequencyResponse& fr, double a, double b) {
  constexpr double g = 0.6180339887498949;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = fr.sigma_max(c), fd = fr.sigma_max(d);
  for (int it = 0; it < 80 && (b - a) > 1e-15; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = fr.sigma_max(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = fr.sigma_max(d);
    }
  }
  return std::max(fc, fd);
}

LqrResult certify_lqr(const DareSolution& sol, const Matrix& B, const Matrix& R) {
  LqrResult out;
  out.P = linalg::symmetrize(sol.P);
  out.F = sol.F;
  out.residual = sol.residual;
  out.closed_loop_rho = sol.closed_loop_rho;
  if (out.residual > 1e-9) throw NotStabilizable("DARE residual above tolerance");
  if (min_eig(out.P) < -1e-9 * (1.0 + out.P.norm())) {
    throw IndefiniteCost("Riccati solution is not positive semidefinite");
  }
  if (!(min_eig(R + B.transpose() * out.P * B) > 0.0)) {
    throw IndefiniteCost("R + B'PB is not positive definite");
  }
  return out;
}

}  // namespace

double hinf_norm(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D) {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() ||
      D.cols() != B.cols()) {
    throw std::invalid_argument("hinf_norm: dimension mismatch");
  }
  if (n > 0 && linalg::spectral_radius(A) >= 1.0) {
    throw UnstableSystem("hinf_norm requires a Schur-stable A");
  }
  const FrequencyResponse fr(A, B, C, D);
  constexpr int kGrid = 4096;
  constexpr double pi = std::numbers::pi;
  const double spacing = pi / (kGrid - 1);

  std::vector<double> thetas;
  thetas.reserve(kGrid + n);
  for (int k = 0; k < kGrid; ++k) thetas.push_back(spacing * k);
  if (n > 0) {
    const Eigen::VectorXcd poles = A.eigenvalues();
    for (Index i = 0; i < poles.size(); ++i) thetas.push_back(std::abs(std::arg(poles(i))));
  }
  std::vector<std::pair<double, double>> samples;
  samples.reserve(thetas.size());
  for (double t : thetas) samples.emplace_back(fr.sigma_max(t), t);
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  double best = samples.front().first;
  const size_t refine = std::min<size_t>(samples.size(), 4);
  for (size_t i = 0; i < refine; ++i) {
    const double t = samples[i].second;
    const double a = std::max(0.0, t - spacing), b = std::min(pi, t + spacing);
    best = std::max(best, golden_max(fr, a, b));
  }
  return best;
}

LqrResult lqr_design(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& N,
                     const Matrix& R) {
  return certify_lqr(dare(A, B, Q, N, R), B, R);
}

LqrResult lqr_design(const sampled::DiscretizedSystem& disc) {
  return lqr_design(disc.A2, disc.B2u, disc.Q2, disc.N2, disc.R2);
}

HinfResult hinf_design(const sampled::DiscretizedSystem& disc, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("hinf_design: gamma must be positive");
  }
  const Index nz = disc.nz(), nu = disc.B2u.cols(), nw = disc.B2w.cols();
  const Index ny = disc.C2.rows();
  const Matrix& A = disc.A2;
  const Matrix& Bu = disc.B2u;
  const Matrix& Bw = disc.B2w;
  const Matrix C = ny > 0 ? disc.C2 : Matrix::Zero(1, nz);
  const Matrix Du = ny > 0 ? disc.D2u : Matrix::Zero(1, nu);
  const Matrix Dw = ny > 0 ? disc.D2w : Matrix::Zero(1, nw);
  const double g2 = gamma * gamma;
  const Matrix Iw = Matrix::Identity(nw, nw);

  std::ostringstream os;
  const double h3_static = min_eig(g2 * Iw - Dw.transpose() * Dw);
  if (!(h3_static > 0.0)) {
    os << "gamma^2 I - D2w'D2w not positive definite (min eig " << h3_static << ")";
    throw GammaInfeasible("H3", os.str());
  }

  Matrix B(nz, nu + nw), D(C.rows(), nu + nw);
  B << Bu, Bw;
  D << Du, Dw;
  Matrix R = D.transpose() * D;
  R.bottomRightCorner(nw, nw) -= g2 * Iw;
  const Matrix Q = C.transpose() * C;
  const Matrix N = C.transpose() * D;

  Matrix P;
  try {
    P = linalg::symmetrize(dare(A, B, Q, N, R).P);
  } catch (const Error& e) {
    throw GammaInfeasible("riccati", e.what());
  }
  if (min_eig(P) < -1e-9 * (1.0 + P.norm())) throw GammaInfeasible("P_psd", "P not PSD");

  const Matrix H2 = Bu.transpose() * P * Bw + Du.transpose() * Dw;
  const Matrix H3 = linalg::symmetrize(g2 * Iw - Dw.transpose() * Dw - Bw.transpose() * P * Bw);
  const Matrix H4 = Bw.transpose() * P * A + Dw.transpose() * C;
  HinfResult out;
  out.gamma = gamma;
  out.P = P;
  out.H3_min_eig = min_eig(H3);
  if (!(out.H3_min_eig > 0.0)) {
    os << "H3 min eigenvalue " << out.H3_min_eig;
    throw GammaInfeasible("H3", os.str());
  }
  const Eigen::LDLT<Matrix> h3(H3);
  const Matrix H1 = linalg::symmetrize(Bu.transpose() * P * Bu + Du.transpose() * Du +
                                       H2 * h3.solve(H2.transpose()));
  out.H1_min_eig = min_eig(H1);
  if (!(out.H1_min_eig > 0.0)) {
    os << "H1 min eigenvalue " << out.H1_min_eig;
    throw GammaInfeasible("H1", os.str());
  }
  const Matrix H5u = Bu.transpose() * P * A + Du.transpose() * C;
  const Matrix F_dist = H1.ldlt().solve(H5u + H2 * h3.solve(H4));

  std::string failure_condition = "stability";
  for (int sign : {-1, +1}) {
    const Matrix F = sign * F_dist;
    const Matrix Acl = A + Bu * F;
    const double rho = linalg::spectral_radius(Acl);
    std::ostringstream note;
    if (rho >= 1.0) {
      note << "sign " << sign << " rejected: closed-loop rho " << rho << ". ";
      out.note += note.str();
      continue;
    }
    const double norm = hinf_norm(Acl, Bw, C + Du * F, Dw);
    if (!(norm < gamma)) {
      failure_condition = "certificate";
      note << "sign " << sign << " rejected: closed-loop norm " << norm << " >= gamma. ";
      out.note += note.str();
      continue;
    }
    if (out.F.size() == 0) {
      out.F = F;
      out.sign = sign;
      out.certified_norm = norm;
    }
    break;
  }
  if (out.F.size() == 0) throw GammaInfeasible(failure_condition, out.note);
  if (out.sign == -1) out.note += "sign +1 not applied.";
  return out;
}

GammaSearch gamma_min(const sampled::DiscretizedSystem& disc, double tol) {
  if (!(tol > 0.0) || !(tol < 1.0)) throw std::invalid_argument("gamma_min: tol in (0, 1)");
  const double step = std::log1p(tol);
  auto lattice = [&](long j) { return std::exp(static_cast<double>(j) * step); };
  GammaSearch out;
  auto attempt = [&](double g, HinfResult* keep) {
    ++out.evaluations;
    try {
      HinfResult r = hinf_design(disc, g);
      if (keep) *keep = std::move(r);
      return true;
    } catch (const GammaInfeasible&) {
      return false;
    }
  };

  const Index ny = disc.C2.rows();
  const double dw_norm = ny > 0 && disc.D2w.size() > 0
                             ? Eigen::JacobiSVD<Matrix>(disc.D2w).singularValues()(0)
                             : 0.0;

  // Upper bracket from the LQR design of the same output cost.
  double reference = 0.0;
  try {
    const Matrix C = ny > 0 ? disc.C2 : Matrix::Zero(1, disc.nz());
    const Matrix Du = ny > 0 ? disc.D2u : Matrix::Zero(1, disc.nu);
    const Matrix Dw = ny > 0 ? disc.D2w : Matrix::Zero(1, disc.B2w.cols());
    const LqrResult lqr = lqr_design(disc.A2, disc.B2u, C.transpose() * C, C.transpose() * Du,
                                     Du.transpose() * Du);
    reference = hinf_norm(disc.A2 + disc.B2u * lqr.F, disc.B2w, C + Du * lqr.F, Dw);
  } catch (const Error&) {
    reference = 0.0;
  }
  double upper = 2.0 * std::max({reference, dw_norm, 1e-12});
  bool found = false;
  for (int k = 0; k <= 60; ++k) {
    if (attempt(upper, nullptr)) {
      found = true;
      break;
    }
    upper *= 2.0;
  }
  if (!found) throw NoFeasibleGamma("no feasible gamma after 60 doublings");

  long j_hi = static_cast<long>(std::ceil(std::log(upper) / step));
  while (!attempt(lattice(j_hi), &out.design)) ++j_hi;

  long j_lo;
  if (dw_norm > 0.0) {
    j_lo = static_cast<long>(std::floor(std::log(dw_norm) / step));
    while (lattice(j_lo) > dw_norm) --j_lo;
  } else {
    double lower = 0.5 * lattice(j_hi);
    for (int k = 0; k < 60 && attempt(lower, nullptr); ++k) lower *= 0.5;
    j_lo = static_cast<long>(std::floor(std::log(lower) / step));
  }
  if (j_lo >= j_hi) j_lo = j_hi - 1;

  while (j_hi - j_lo > 1) {
    const long mid = j_lo + (j_hi - j_lo) / 2;
    HinfResult candidate;
    if (attempt(lattice(mid), &candidate)) {
      j_hi = mid;
      out.design = std::move(candidate);
    } else {
      j_lo = mid;
    }
  }
  out.gamma_star = lattice(j_hi);
  out.lower_bracket = lattice(j_lo);
  return out;
}

}  // namespace dncs::synthesis
