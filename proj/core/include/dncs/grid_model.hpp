#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "dncs/linalg.hpp"

/// Multi-machine grid: physical generator model, static network, equilibrium and
/// small-signal linearization. All quantities are in SI units.
namespace dncs::grid {

/// Physical parameters of one synchronous generator.
struct GeneratorParams {
  double L_a0 = 0.0;    ///< stator self inductance, constant part (H)
  double L_a2 = 0.0;    ///< stator self inductance, saliency part (H)
  double L_f = 0.0;     ///< field self inductance (H)
  double L_af = 0.0;    ///< stator-field mutual inductance (H)
  double R_a = 0.0;     ///< stator resistance (Ohm)
  double R_f = 0.0;     ///< field resistance (Ohm)
  double J_rot = 0.0;   ///< rotor inertia (kg m^2)
  double B_fric = 0.0;  ///< friction coefficient (kg m^2 / s)
  int pole_pairs = 1;
  double T_m = 0.0;   ///< mechanical torque (N m)
  double e_f0 = 0.0;  ///< nominal field voltage (V)

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Two-terminal branch impedance, or an explicit open circuit.
class Impedance {
 public:
  static Impedance finite(std::complex<double> z);
  static Impedance open();

  bool is_open() const { return open_; }
  std::complex<double> value() const { return z_; }
  /// 1/Z, or 0 for an open branch.
  std::complex<double> admittance() const;

 private:
  Impedance(std::complex<double> z, bool open) : z_(z), open_(open) {}
  std::complex<double> z_;
  bool open_;
};

/// Static network seen from the generator ports at the synchronous frequency:
/// i_port = Y e_port + H i_w  (complex phasors, d + j q).
struct NetworkModel {
  ComplexMatrix Y;  ///< m x m admittance (S)
  ComplexMatrix H;  ///< m x m_w disturbance transfer (dimensionless)
  double omega0 = 0.0;

  Index machines() const { return Y.rows(); }
};

/// Eliminates internal nodes of a nodal admittance matrix. The first
/// `ports` nodes are generator ports; disturbance currents are injected at the
/// remaining (internal) nodes.
NetworkModel kron_reduce(const ComplexMatrix& nodal, Index ports, double omega0);

/// Symmetric two-area system: each generator feeds a load bus through Z_T,
/// each load bus has shunt Z_L, the two load buses are tied by Z_C.
NetworkModel build_two_area_network(const Impedance& Z_T, const Impedance& Z_L,
                                    const Impedance& Z_C, double omega0);

struct RotorState {
  double delta = 0.0;  ///< rad, relative to the synchronous frame
  double omega = 0.0;  ///< rad/s
  double psi_f = 0.0;  ///< Wb
};

struct MachineElectrical {
  double i_d = 0.0, i_q = 0.0, i_f = 0.0;
  double e_d = 0.0, e_q = 0.0;
  double psi_d = 0.0, psi_q = 0.0;
  double T_e = 0.0;
};

struct AlgebraicSolution {
  std::vector<MachineElectrical> machines;
  double relative_residual = 0.0;
};

/// Number of unknowns per machine in the stacked algebraic system
/// (i_d, i_q, i_f, e_d, e_q, psi_d, psi_q).
inline constexpr int kAlgebraicUnknowns = 7;
inline constexpr int kStatesPerMachine = 3;
inline constexpr int kInputsPerMachine = 1;
inline constexpr int kDisturbancesPerMachine = 2;

/// Solves the stator/field flux, stator voltage and network equations for
/// fixed rotor states. With stator transients neglected these are linear in
/// the currents, voltages and fluxes. `w` stacks [i_d^w, i_q^w] per injection.
AlgebraicSolution solve_algebraic(const std::vector<GeneratorParams>& gens,
                                  const NetworkModel& net, const std::vector<RotorState>& rotors,
                                  const Vector& w);

std::vector<RotorState> unpack_state(const Vector& x);
Vector pack_state(const std::vector<RotorState>& rotors);

/// Swing and field-winding dynamics: x = [delta, omega, psi_f] per machine,
/// u = field voltages, w = load-bus disturbance currents.
Vector dynamics_rhs(const std::vector<GeneratorParams>& gens, const NetworkModel& net,
                    const Vector& x, const Vector& u, const Vector& w);

enum class TorqueMode {
  Fixed,    ///< T_m taken from GeneratorParams and enforced as a residual
  Balance,  ///< T_m := B omega0 + T_e at the solution
};

enum class Excitation {
  FieldVoltage,     ///< e_f0 from GeneratorParams
  TerminalVoltage,  ///< |e_d + j e_q| target per machine, e_f0 derived
};

/// Working-point specification. The model is invariant under a common
/// rotor-angle shift, so machine 1 is the angle reference.
struct EquilibriumSpec {
  Excitation excitation = Excitation::FieldVoltage;
  std::vector<double> terminal_voltage;  ///< V, used with TerminalVoltage
  std::vector<TorqueMode> torque;        ///< per machine; empty means all Fixed
  double reference_angle = 0.0;          ///< delta of machine 1 (rad)
  std::vector<double> initial_delta;     ///< optional initial guess (rad)
  int max_iterations = 100;
  double tolerance = 1e-10;
};

struct OperatingPoint {
  std::vector<GeneratorParams> generators;  ///< T_m and e_f0 resolved
  Vector x0;                                ///< 3m state at equilibrium
  Vector u0;                                ///< m field voltages
  AlgebraicSolution electrical;
  double rhs_norm = 0.0;  ///< scaled equilibrium residual
  std::vector<double> residual_history;
};

/// Scaled norm of the state derivative: omega-dot in torque units, psi_f-dot
/// in field-voltage units.
double scaled_rhs_norm(const std::vector<GeneratorParams>& gens, const Vector& x,
                       const Vector& xdot);

/// Damped Gauss-Newton on (delta_2..delta_m, psi_f) with a finite-difference
/// Jacobian and step halving. Throws NoConvergence with the residual history.
OperatingPoint solve_equilibrium(const std::vector<GeneratorParams>& gens,
                                 const NetworkModel& net, const EquilibriumSpec& spec = {});

struct LinearPlant {
  Matrix A;   ///< 3m x 3m
  Matrix Bu;  ///< 3m x m
  Matrix Bw;  ///< 3m x 2m
  Index machines = 0;

  Index nx() const { return A.rows(); }
  Index nu() const { return Bu.cols(); }
  Index nw() const { return Bw.cols(); }
  static std::string state_name(Index i);
};

/// Central-difference Jacobians of dynamics_rhs at the operating point, each
/// column checked against a half-step estimate. Throws JacobianInconsistent.
LinearPlant linearize(const std::vector<GeneratorParams>& gens, const NetworkModel& net,
                      const OperatingPoint& op);

/// Permutation exchanging the blocks of machines 1 and 2 (block size `block`).
Matrix swap_permutation(Index block);

/// Largest relative residual of the three machine-swap commutation identities.
double swap_symmetry_residual(const LinearPlant& plant);

}  // namespace dncs::grid
