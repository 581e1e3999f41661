#include "dncs/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dncs/errors.hpp"

namespace dncs::distributed {

namespace {

constexpr double kStructuralZero = 1e-12;

Index sum_before(const std::vector<Index>& sizes, Index i) {
  return std::accumulate(sizes.begin(), sizes.begin() + i, Index{0});
}

Matrix selector(const std::vector<Index>& sizes, Index i) {
  const Index total = std::accumulate(sizes.begin(), sizes.end(), Index{0});
  Matrix E = Matrix::Zero(total, sizes[static_cast<size_t>(i)]);
  E.block(sum_before(sizes, i), 0, sizes[static_cast<size_t>(i)], sizes[static_cast<size_t>(i)])
      .setIdentity();
  return E;
}

/// Frobenius norm of everything outside the diagonal blocks.
double off_block_norm(const Matrix& M, const std::vector<Index>& rows,
                      const std::vector<Index>& cols) {
  Matrix masked = M;
  Index r0 = 0, c0 = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    masked.block(r0, c0, rows[i], cols[i]).setZero();
    r0 += rows[i];
    c0 += cols[i];
  }
  return masked.norm();
}

/// Finest contiguous partition such that no entry above `thr` couples two
/// different blocks.
ModeDims infer_dims(const Matrix& A, const Matrix& Bu, const Matrix& Bw, double thr_a,
                    double thr_u, double thr_w) {
  const Index nx = A.rows(), nu = Bu.cols(), nw = Bw.cols();
  ModeDims dims;
  Index a = 0, b = 0, c = 0;
  while (a < nx) {
    Index ea = a + 1, eb = b, ec = c;
    bool grew = true;
    while (grew) {
      grew = false;
      Index na = ea, nb = eb, nc = ec;
      for (Index i = a; i < ea; ++i) {
        for (Index j = 0; j < nx; ++j) {
          if (std::abs(A(i, j)) > thr_a || std::abs(A(j, i)) > thr_a) na = std::max(na, j + 1);
        }
        for (Index j = 0; j < nu; ++j) {
          if (std::abs(Bu(i, j)) > thr_u) nb = std::max(nb, j + 1);
        }
        for (Index j = 0; j < nw; ++j) {
          if (std::abs(Bw(i, j)) > thr_w) nc = std::max(nc, j + 1);
        }
      }
      for (Index j = b; j < eb; ++j) {
        for (Index i = 0; i < nx; ++i) {
          if (std::abs(Bu(i, j)) > thr_u) na = std::max(na, i + 1);
        }
      }
      for (Index j = c; j < ec; ++j) {
        for (Index i = 0; i < nx; ++i) {
          if (std::abs(Bw(i, j)) > thr_w) na = std::max(na, i + 1);
        }
      }
      if (na != ea || nb != eb || nc != ec) {
        ea = na;
        eb = nb;
        ec = nc;
        grew = true;
      }
    }
    if (ea == nx) {
      eb = nu;
      ec = nw;
    }
    dims.nx.push_back(ea - a);
    dims.nu.push_back(eb - b);
    dims.nw.push_back(ec - c);
    a = ea;
    b = eb;
    c = ec;
  }
  return dims;
}

Pattern block_pattern(const Matrix& M, const std::vector<Index>& rows,
                      const std::vector<Index>& cols) {
  const double thr = kStructuralZero * M.norm();
  Pattern p = Pattern::Zero(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  Index r0 = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    Index c0 = 0;
    for (size_t j = 0; j < cols.size(); ++j) {
      const auto blk = M.block(r0, c0, rows[i], cols[j]);
      p(static_cast<Index>(i), static_cast<Index>(j)) =
          blk.size() > 0 && blk.cwiseAbs().maxCoeff() > thr ? 1 : 0;
      c0 += cols[j];
    }
    r0 += rows[i];
  }
  return p;
}

Matrix checked_inverse(const Matrix& M, const char* name) {
  if (M.rows() != M.cols()) throw std::invalid_argument(std::string(name) + " must be square");
  const Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw std::invalid_argument(std::string(name) + " must be invertible");
  return lu.inverse();
}

}  // namespace

LocalGains LocalGains::from_blocks(std::vector<Matrix> blocks) {
  LocalGains g;
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  g.K = Matrix::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    g.K.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  g.blocks = std::move(blocks);
  return g;
}

LocalGains LocalGains::uniform(const Matrix& K_row, Index machines) {
  return from_blocks(std::vector<Matrix>(static_cast<size_t>(machines), K_row));
}

Matrix local_closed_loop(const grid::LinearPlant& plant, const LocalGains& gains) {
  if (gains.K.rows() != plant.nu() || gains.K.cols() != plant.nx()) {
    throw std::invalid_argument("local gains do not match the plant dimensions");
  }
  const Matrix Abar = plant.A + plant.Bu * gains.K;
  const double abscissa = linalg::spectral_abscissa(Abar);
  if (!(abscissa < 0.0)) {
    std::ostringstream os;
    os << "local closed loop A + B_u K is not Hurwitz (max Re lambda = " << abscissa
       << "); check the generator/motor sign convention of the stator voltage equations "
          "and the sign of the local gains (u = +K x)";
    throw NotStabilizable(os.str());
  }
  return Abar;
}

Index ModalDecomposition::x_offset(Index i) const { return sum_before(dims.nx, i); }
Index ModalDecomposition::u_offset(Index i) const { return sum_before(dims.nu, i); }
Index ModalDecomposition::w_offset(Index i) const { return sum_before(dims.nw, i); }
Matrix ModalDecomposition::Ex(Index i) const { return selector(dims.nx, i); }
Matrix ModalDecomposition::Eu(Index i) const { return selector(dims.nu, i); }
Matrix ModalDecomposition::Ew(Index i) const { return selector(dims.nw, i); }

ModalDecomposition accept_decomposition(const grid::LinearPlant& plant, const LocalGains& gains,
                                        const Matrix& Mx, const Matrix& Mu, const Matrix& Mw,
                                        double tol, std::optional<ModeDims> dims) {
  const Index nx = plant.nx(), nu = plant.nu(), nw = plant.nw();
  if (Mx.rows() != nx || Mu.rows() != nu || Mw.rows() != nw) {
    throw std::invalid_argument("coordinate matrices do not match the plant dimensions");
  }
  ModalDecomposition dec;
  dec.Mx = Mx;
  dec.Mu = Mu;
  dec.Mw = Mw;
  dec.Mx_inv = checked_inverse(Mx, "M_x");
  dec.Mu_inv = checked_inverse(Mu, "M_u");
  dec.Mw_inv = checked_inverse(Mw, "M_w");

  const Matrix Abar = plant.A + plant.Bu * gains.K;
  const Matrix Ahat = dec.Mx_inv * Abar * Mx;
  const Matrix Buhat = dec.Mx_inv * plant.Bu * Mu;
  const Matrix Bwhat = dec.Mx_inv * plant.Bw * Mw;
  const double nA = std::max(Abar.norm(), 1e-300);
  const double nBu = std::max(plant.Bu.norm(), 1e-300);
  const double nBw = std::max(plant.Bw.norm(), 1e-300);

  if (dims) {
    const auto total = [](const std::vector<Index>& v) {
      return std::accumulate(v.begin(), v.end(), Index{0});
    };
    if (dims->nu.size() != dims->nx.size() || dims->nw.size() != dims->nx.size() ||
        total(dims->nx) != nx || total(dims->nu) != nu || total(dims->nw) != nw) {
      throw std::invalid_argument("mode dimensions do not add up to the plant dimensions");
    }
    dec.dims = *dims;
  } else {
    dec.dims = infer_dims(Ahat, Buhat, Bwhat, tol * nA, tol * nBu, tol * nBw);
  }

  dec.residual_A = off_block_norm(Ahat, dec.dims.nx, dec.dims.nx) / nA;
  dec.residual_Bu = off_block_norm(Buhat, dec.dims.nx, dec.dims.nu) / nBu;
  dec.residual_Bw = off_block_norm(Bwhat, dec.dims.nx, dec.dims.nw) / nBw;
  if (dec.residual_A > tol) throw NotBlockDiagonalizable("30.1", dec.residual_A);
  if (dec.residual_Bu > tol) throw NotBlockDiagonalizable("30.2", dec.residual_Bu);
  if (dec.residual_Bw > tol) throw NotBlockDiagonalizable("30.3", dec.residual_Bw);

  const Index m = plant.machines;
  dec.machine_nx.assign(static_cast<size_t>(m), nx / std::max<Index>(m, 1));
  dec.machine_nu.assign(static_cast<size_t>(m), nu / std::max<Index>(m, 1));
  dec.Mu_pattern = block_pattern(Mu, dec.machine_nu, dec.dims.nu);
  dec.Mx_inv_pattern = block_pattern(dec.Mx_inv, dec.dims.nx, dec.machine_nx);
  for (Index i = 0; i < dec.modes(); ++i) dec.labels.push_back("mode" + std::to_string(i + 1));
  return dec;
}

ModalDecomposition symmetric_modes(const grid::LinearPlant& plant, const LocalGains& gains,
                                   double tol) {
  if (plant.machines != 2) throw NotSymmetric("symmetric modes need exactly two machines");
  if (gains.blocks.size() != 2 || gains.blocks[0] != gains.blocks[1]) {
    throw NotSymmetric("local gains differ between the two machines");
  }
  const double swap = grid::swap_symmetry_residual(plant);
  if (swap > tol) {
    std::ostringstream os;
    os << "machine-swap commutation residual " << swap << " exceeds " << tol;
    throw NotSymmetric(os.str());
  }
  auto pair = [](Index b) {
    const Matrix I = Matrix::Identity(b, b);
    Matrix M(2 * b, 2 * b);
    M << I, I, -I, I;
    return Matrix(0.5 * M);
  };
  const Index bx = plant.nx() / 2, bu = plant.nu() / 2, bw = plant.nw() / 2;
  ModeDims dims{{bx, bx}, {bu, bu}, {bw, bw}};
  ModalDecomposition dec =
      accept_decomposition(plant, gains, pair(bx), pair(bu), pair(bw), tol, dims);
  dec.labels = {"oscillation", "common"};
  return dec;
}

ModalSubsystem modal_subsystem(const grid::LinearPlant& plant, const LocalGains& gains,
                               const ModalDecomposition& dec, Index i) {
  const Index ox = dec.x_offset(i), ou = dec.u_offset(i), ow = dec.w_offset(i);
  const Index nx = dec.dims.nx[static_cast<size_t>(i)];
  const Index nu = dec.dims.nu[static_cast<size_t>(i)];
  const Index nw = dec.dims.nw[static_cast<size_t>(i)];
  const Matrix Abar = plant.A + plant.Bu * gains.K;
  ModalSubsystem s;
  s.A = (dec.Mx_inv * Abar * dec.Mx).block(ox, ox, nx, nx);
  s.Bu = (dec.Mx_inv * plant.Bu * dec.Mu).block(ox, ou, nx, nu);
  s.Bw = (dec.Mx_inv * plant.Bw * dec.Mw).block(ox, ow, nx, nw);
  return s;
}

Matrix modal_cost(const Objectives& obj, const LocalGains& gains, const ModalDecomposition& dec) {
  const Matrix& K = gains.K;
  const Index nx = K.cols(), nu = K.rows();
  Matrix W(nx + nu, nx + nu);
  W << obj.Q + K.transpose() * obj.R * K, K.transpose() * obj.R, obj.R * K, obj.R;
  const Matrix T = linalg::block_diagonal(dec.Mx, dec.Mu);
  return linalg::symmetrize(T.transpose() * W * T);
}

ModalObjectives modal_objectives(const Objectives& obj, const LocalGains& gains,
                                 const ModalDecomposition& dec, Index i) {
  const Matrix Ex = dec.Ex(i), Eu = dec.Eu(i), Ew = dec.Ew(i);
  const Matrix Sel = linalg::block_diagonal(Ex, Eu);
  ModalObjectives out;
  out.U = linalg::symmetrize(Sel.transpose() * modal_cost(obj, gains, dec) * Sel);
  const Index nx = Ex.cols(), nu = Eu.cols();
  out.Q = out.U.topLeftCorner(nx, nx);
  out.N = out.U.topRightCorner(nx, nu);
  out.R = out.U.bottomRightCorner(nu, nu);
  if (obj.C.size() > 0) {
    const Index ny = obj.C.rows();
    const Matrix Du = obj.Du.size() > 0 ? obj.Du : Matrix::Zero(ny, gains.K.rows());
    const Matrix Dw = obj.Dw.size() > 0 ? obj.Dw : Matrix::Zero(ny, dec.Mw.rows());
    out.C = (obj.C + Du * gains.K) * dec.Mx * Ex;
    out.Du = Du * dec.Mu * Eu;
    out.Dw = Dw * dec.Mw * Ew;
  }
  return out;
}

DelaySchedule delay_map(const Pattern& Mu_pattern, const Pattern& Mx_inv_pattern,
                        const Matrix& d, double h) {
  const Index m = d.rows(), modes = Mu_pattern.cols();
  if (d.cols() != m || Mu_pattern.rows() != m || Mx_inv_pattern.rows() != modes ||
      Mx_inv_pattern.cols() != m) {
    throw std::invalid_argument("delay_map: pattern and delay matrix sizes disagree");
  }
  const double scale = std::max(d.cwiseAbs().maxCoeff(), 1e-300);
  if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw AsymmetricDelays("link delay matrix must be symmetric");
  }
  if ((d.array() < 0.0).any()) throw AsymmetricDelays("link delays must be nonnegative");
  if (d.diagonal().cwiseAbs().maxCoeff() != 0.0) {
    throw AsymmetricDelays("link delay matrix must have a zero diagonal");
  }
  DelaySchedule s;
  s.d = d;
  s.h = h;
  s.d_hat.assign(static_cast<size_t>(modes), 0.0);
  s.d_rho.assign(static_cast<size_t>(m), 0.0);
  for (Index i = 0; i < modes; ++i) {
    for (Index a = 0; a < m; ++a) {
      if (!Mu_pattern(a, i)) continue;
      for (Index b = 0; b < m; ++b) {
        if (Mx_inv_pattern(i, b)) {
          s.d_hat[static_cast<size_t>(i)] = std::max(s.d_hat[static_cast<size_t>(i)], d(a, b));
        }
      }
    }
  }
  for (Index r = 0; r < m; ++r) {
    for (Index i = 0; i < modes; ++i) {
      if (Mu_pattern(r, i)) {
        s.d_rho[static_cast<size_t>(r)] =
            std::max(s.d_rho[static_cast<size_t>(r)], s.d_hat[static_cast<size_t>(i)]);
      }
    }
  }
  return s;
}

Matrix uniform_delays(Index machines, double tau) {
  Matrix d = Matrix::Constant(machines, machines, tau);
  d.diagonal().setZero();
  return d;
}

sampled::CtsSystem modal_cts_system(const ModalSubsystem& sub, const ModalObjectives& obj) {
  sampled::CtsSystem sys;
  sys.A1 = sub.A;
  sys.B1u = sub.Bu;
  sys.B1w = sub.Bw;
  sys.C1 = obj.C.size() > 0 ? obj.C : Matrix::Zero(0, sub.A.rows());
  sys.D1u = obj.Du;
  sys.D1w = obj.Dw;
  return sys;
}

ModeDesign design_mode(const ModalSubsystem& sub, const ModalObjectives& obj, double h,
                       double d_hat, Method method, double tol) {
  const sampled::CtsSystem sys = modal_cts_system(sub, obj);
  const sampled::CtsCost cost{obj.Q, obj.N, obj.R};
  ModeDesign out;
  out.method = method;
  out.disc = sampled::discretize(sys, cost, h, d_hat);
  if (method == Method::Lqr) {
    const synthesis::LqrResult lqr = synthesis::lqr_design(out.disc);
    out.F = lqr.F;
    out.P = lqr.P;
  } else {
    const synthesis::GammaSearch gs = synthesis::gamma_min(out.disc, tol);
    out.F = gs.design.F;
    out.P = gs.design.P;
    out.gamma_star = gs.gamma_star;
    out.certified_norm = gs.design.certified_norm;
  }
  return out;
}

DistributedController::DistributedController(LocalGains gains, ModalDecomposition dec,
                                             DelaySchedule schedule,
                                             std::vector<ModeDesign> designs)
    : gains_(std::move(gains)),
      dec_(std::move(dec)),
      schedule_(std::move(schedule)),
      designs_(std::move(designs)) {
  const Index modes = dec_.modes();
  if (static_cast<Index>(designs_.size()) != modes) {
    throw ScheduleMismatch("one design per mode is required");
  }
  if (static_cast<Index>(schedule_.d_hat.size()) != modes ||
      schedule_.d_rho.size() != dec_.machine_nu.size()) {
    throw ScheduleMismatch("delay schedule does not match the decomposition");
  }
  if (!(schedule_.h > 0.0)) throw ScheduleMismatch("delay schedule needs a sampling period");
  for (Index i = 0; i < modes; ++i) {
    const ModeDesign& md = designs_[static_cast<size_t>(i)];
    const double dh = schedule_.d_hat[static_cast<size_t>(i)];
    if (std::abs(md.disc.d - dh) > 1e-12 || std::abs(md.disc.h - schedule_.h) > 1e-12) {
      throw ScheduleMismatch("mode design was discretized with a different delay or period");
    }
    if (md.disc.nx != dec_.dims.nx[static_cast<size_t>(i)] ||
        md.disc.nu != dec_.dims.nu[static_cast<size_t>(i)] || md.F.cols() != md.disc.nz() ||
        md.F.rows() != md.disc.nu) {
      throw ScheduleMismatch("mode design dimensions do not match the decomposition");
    }
    for (Index r = 0; r < dec_.Mu_pattern.rows(); ++r) {
      if (dec_.Mu_pattern(r, i) && std::abs(schedule_.d_rho[static_cast<size_t>(r)] - dh) > 1e-12) {
        std::ostringstream os;
        os << "machine " << r + 1 << " waits " << schedule_.d_rho[static_cast<size_t>(r)]
           << " s but mode " << i + 1 << " was designed for " << dh << " s";
        throw ScheduleMismatch(os.str());
      }
    }
  }
  reset();
}

void DistributedController::reset() {
  history_.assign(designs_.size(), {});
  for (size_t i = 0; i < designs_.size(); ++i) {
    const auto& disc = designs_[i].disc;
    history_[i].assign(static_cast<size_t>(disc.history_slots()), Vector::Zero(disc.nu));
  }
  v_.clear();
  v_hat_.clear();
}

void DistributedController::sample(long k, const Vector& x) {
  if (k != static_cast<long>(v_.size())) {
    throw std::logic_error("controller samples must be taken in order k = 0, 1, ...");
  }
  const Vector xhat = dec_.Mx_inv * x;
  Vector vhat(dec_.Mu.cols());
  for (Index i = 0; i < dec_.modes(); ++i) {
    const auto& disc = designs_[static_cast<size_t>(i)].disc;
    auto& hist = history_[static_cast<size_t>(i)];
    Vector z(disc.nz());
    z.head(disc.nx) = xhat.segment(dec_.x_offset(i), disc.nx);
    for (size_t s = 0; s < hist.size(); ++s) {
      z.segment(disc.nx + static_cast<Index>(s) * disc.nu, disc.nu) = hist[s];
    }
    const Vector v = designs_[static_cast<size_t>(i)].F * z;
    if (!hist.empty()) {
      hist.erase(hist.begin());
      hist.push_back(v);
    }
    vhat.segment(dec_.u_offset(i), disc.nu) = v;
  }
  v_hat_.push_back(vhat);
  v_.push_back(dec_.Mu * vhat);
}

Vector DistributedController::remote_command(double t_mid) const {
  Vector u = Vector::Zero(dec_.Mu.rows());
  Index off = 0;
  for (size_t r = 0; r < dec_.machine_nu.size(); ++r) {
    const Index n = dec_.machine_nu[r];
    const double k = std::floor((t_mid - schedule_.d_rho[r]) / schedule_.h);
    if (k >= 0.0) {
      const auto idx = static_cast<size_t>(k);
      if (idx >= v_.size()) throw std::logic_error("remote command requested before sampling");
      u.segment(off, n) = v_[idx].segment(off, n);
    }
    off += n;
  }
  return u;
}

std::vector<double> DistributedController::event_offsets() const { return schedule_.d_rho; }

DistributedController assemble_controller(const LocalGains& gains, const ModalDecomposition& dec,
                                          const DelaySchedule& schedule,
                                          std::vector<ModeDesign> designs) {
  return DistributedController(gains, dec, schedule, std::move(designs));
}

}  // namespace dncs::distributed
