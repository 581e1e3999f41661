#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dncs/grid_model.hpp"
#include "dncs/sampled.hpp"
#include "dncs/synthesis.hpp"

/// Distributed networked control: local loops, modal coordinates, per-mode
/// objectives, delay mapping and the controller that reconstructs physical
/// remote commands from per-mode feedback.
namespace dncs::distributed {

/// 0/1 block pattern.
using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct LocalGains {
  std::vector<Matrix> blocks;  ///< K_i, n_u,i x n_x,i
  Matrix K;                    ///< block diagonal

  static LocalGains from_blocks(std::vector<Matrix> blocks);
  /// Same gain row on every machine.
  static LocalGains uniform(const Matrix& K_row, Index machines);
};

/// A + B_u K. Throws NotStabilizable with a sign-convention diagnostic when
/// the result is not Hurwitz.
Matrix local_closed_loop(const grid::LinearPlant& plant, const LocalGains& gains);

struct ModeDims {
  std::vector<Index> nx, nu, nw;

  Index modes() const { return static_cast<Index>(nx.size()); }
};

struct ModalDecomposition {
  Matrix Mx, Mx_inv, Mu, Mu_inv, Mw, Mw_inv;
  ModeDims dims;
  std::vector<std::string> labels;
  /// Physical block sizes per machine (states, inputs).
  std::vector<Index> machine_nx, machine_nu;
  /// [M_u]_{rho i} != 0 (machine x mode) and [M_x^-1]_{i beta} != 0 (mode x machine).
  Pattern Mu_pattern, Mx_inv_pattern;
  double residual_A = 0.0, residual_Bu = 0.0, residual_Bw = 0.0;

  Index modes() const { return dims.modes(); }
  Index x_offset(Index i) const;
  Index u_offset(Index i) const;
  Index w_offset(Index i) const;
  /// Selector E_i^x: n_x x n_x,i.
  Matrix Ex(Index i) const;
  Matrix Eu(Index i) const;
  Matrix Ew(Index i) const;
};

/// Validates the block-diagonalization of (A + B_u K, B_u, B_w). Mode
/// dimensions are inferred from the coupling graph when not supplied.
/// Throws NotBlockDiagonalizable naming the failed equation.
ModalDecomposition accept_decomposition(const grid::LinearPlant& plant, const LocalGains& gains,
                                        const Matrix& Mx, const Matrix& Mu, const Matrix& Mw,
                                        double tol, std::optional<ModeDims> dims = std::nullopt);

/// Oscillation (x1 - x2) and common (x1 + x2) modes of a symmetric pair.
/// Throws NotSymmetric.
ModalDecomposition symmetric_modes(const grid::LinearPlant& plant, const LocalGains& gains,
                                   double tol = 1e-8);

struct ModalSubsystem {
  Matrix A, Bu, Bw;
};

ModalSubsystem modal_subsystem(const grid::LinearPlant& plant, const LocalGains& gains,
                               const ModalDecomposition& dec, Index i);

/// Physical objectives: cost x'Qx + u'Ru with u = Kx + u_bar; output
/// y = C x + D_u u + D_w w.
struct Objectives {
  Matrix Q, R, C, Du, Dw;
};

struct ModalObjectives {
  Matrix U;  ///< cost on [x_hat_i; u_hat_i]
  Matrix Q, N, R;
  Matrix C, Du, Dw;
};

/// Full congruence diag(Mx, Mu)' [Q + K'RK, K'R; RK, R] diag(Mx, Mu).
Matrix modal_cost(const Objectives& obj, const LocalGains& gains, const ModalDecomposition& dec);

ModalObjectives modal_objectives(const Objectives& obj, const LocalGains& gains,
                                 const ModalDecomposition& dec, Index i);

struct DelaySchedule {
  Matrix d;                    ///< link delays (s), symmetric, zero diagonal
  std::vector<double> d_hat;   ///< per mode
  std::vector<double> d_rho;   ///< per machine
  double h = 0.0;
};

/// d_hat_i = max d_{ab} over a with [Mu]_{a i} != 0 and b with [Mx^-1]_{i b}
/// != 0; d_rho = max d_hat_i over modes driving machine rho.
DelaySchedule delay_map(const Pattern& Mu_pattern, const Pattern& Mx_inv_pattern,
                        const Matrix& d, double h = 0.0);

/// Uniform link delay tau between every pair of machines.
Matrix uniform_delays(Index machines, double tau);

enum class Method { Lqr, Hinf };

struct ModeDesign {
  Method method = Method::Lqr;
  Matrix F;  ///< v_hat = F z, z = [x_hat; v_hat_{k-q-1}; ...; v_hat_{k-1}]
  sampled::DiscretizedSystem disc;
  Matrix P;                  ///< LQR certificate
  double gamma_star = 0.0;   ///< H-infinity certificate
  double certified_norm = 0.0;
};

sampled::CtsSystem modal_cts_system(const ModalSubsystem& sub, const ModalObjectives& obj);

ModeDesign design_mode(const ModalSubsystem& sub, const ModalObjectives& obj, double h,
                       double d_hat, Method method, double tol = 1e-3);

/// Steppable controller. Call `sample` at t = kh for k = 0, 1, ... in order;
/// `remote_command` returns u_bar on a step containing `t_mid`.
class DistributedController {
 public:
  DistributedController(LocalGains gains, ModalDecomposition dec, DelaySchedule schedule,
                        std::vector<ModeDesign> designs);

  void reset();
  void sample(long k, const Vector& x);
  Vector local_command(const Vector& x) const { return gains_.K * x; }
  Vector remote_command(double t_mid) const;

  const LocalGains& gains() const { return gains_; }
  const ModalDecomposition& decomposition() const { return dec_; }
  const DelaySchedule& schedule() const { return schedule_; }
  const std::vector<ModeDesign>& designs() const { return designs_; }
  /// v_k (physical, stacked per machine) and v_hat_k (stacked per mode).
  const std::vector<Vector>& commands() const { return v_; }
  const std::vector<Vector>& modal_commands() const { return v_hat_; }
  /// Event times kh + d_rho lie on multiples of this set of offsets.
  std::vector<double> event_offsets() const;

 private:
  LocalGains gains_;
  ModalDecomposition dec_;
  DelaySchedule schedule_;
  std::vector<ModeDesign> designs_;
  std::vector<std::vector<Vector>> history_;  ///< per mode, oldest first
  std::vector<Vector> v_, v_hat_;
};

DistributedController assemble_controller(const LocalGains& gains, const ModalDecomposition& dec,
                                          const DelaySchedule& schedule,
                                          std::vector<ModeDesign> designs);

}  // namespace dncs::distributed
