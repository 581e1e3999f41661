#include "dncs/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dncs/errors.hpp"

namespace dncs::grid {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("generator parameter ") + name +
                                " must be strictly positive");
  }
}

// Rounds a positive step to the nearest power of two so that x +/- step is
// exact for moderately sized x.
double power_of_two_step(double step) { return std::exp2(std::round(std::log2(step))); }

}  // namespace

void GeneratorParams::validate() const {
  require_positive(L_a0, "L_a0");
  require_positive(L_a2, "L_a2");
  require_positive(L_f, "L_f");
  require_positive(L_af, "L_af");
  require_positive(R_a, "R_a");
  require_positive(R_f, "R_f");
  require_positive(J_rot, "J_rot");
  if (!(B_fric >= 0.0) || !std::isfinite(B_fric)) {
    throw std::invalid_argument("generator parameter B_fric must be non-negative");
  }
  if (pole_pairs < 1) throw std::invalid_argument("generator parameter pole_pairs must be >= 1");
  if (!std::isfinite(T_m) || !std::isfinite(e_f0)) {
    throw std::invalid_argument("generator parameters T_m and e_f0 must be finite");
  }
}

Impedance Impedance::finite(std::complex<double> z) {
  if (z == std::complex<double>(0.0, 0.0) || !std::isfinite(z.real()) ||
      !std::isfinite(z.imag())) {
    throw std::invalid_argument("impedance must be finite and nonzero");
  }
  return Impedance(z, false);
}

Impedance Impedance::open() { return Impedance({0.0, 0.0}, true); }

std::complex<double> Impedance::admittance() const {
  return open_ ? std::complex<double>(0.0, 0.0) : 1.0 / z_;
}

NetworkModel kron_reduce(const ComplexMatrix& nodal, Index ports, double omega0) {
  const Index n = nodal.rows();
  const Index internal = n - ports;
  NetworkModel net;
  net.omega0 = omega0;
  const ComplexMatrix Ygg = nodal.topLeftCorner(ports, ports);
  if (internal == 0) {
    net.Y = Ygg;
    net.H = ComplexMatrix::Zero(ports, 0);
    return net;
  }
  const ComplexMatrix Ygl = nodal.topRightCorner(ports, internal);
  const ComplexMatrix Ylg = nodal.bottomLeftCorner(internal, ports);
  const ComplexMatrix Yll = nodal.bottomRightCorner(internal, internal);
  const Eigen::FullPivLU<ComplexMatrix> lu(Yll);
  if (!lu.isInvertible()) {
    throw SingularNetwork("internal-node admittance block is singular");
  }
  // V_l = Yll^-1 (i_w - Ylg V_g);  i_g = Ygg V_g + Ygl V_l
  net.Y = Ygg - Ygl * lu.solve(Ylg);
  net.H = Ygl * lu.inverse();
  return net;
}

NetworkModel build_two_area_network(const Impedance& Z_T, const Impedance& Z_L,
                                    const Impedance& Z_C, double omega0) {
  if (Z_T.is_open()) throw std::invalid_argument("Z_T cannot be open: generators would float");
  // nodes: g1, g2, l1, l2
  ComplexMatrix nodal = ComplexMatrix::Zero(4, 4);
  auto series = [&](Index a, Index b, std::complex<double> y) {
    nodal(a, a) += y;
    nodal(b, b) += y;
    nodal(a, b) -= y;
    nodal(b, a) -= y;
  };
  series(0, 2, Z_T.admittance());
  series(1, 3, Z_T.admittance());
  series(2, 3, Z_C.admittance());
  nodal(2, 2) += Z_L.admittance();
  nodal(3, 3) += Z_L.admittance();
  return kron_reduce(nodal, 2, omega0);
}

AlgebraicSolution solve_algebraic(const std::vector<GeneratorParams>& gens,
                                  const NetworkModel& net, const std::vector<RotorState>& rotors,
                                  const Vector& w) {
  const Index m = static_cast<Index>(gens.size());
  if (net.machines() != m || static_cast<Index>(rotors.size()) != m) {
    throw std::invalid_argument("solve_algebraic: machine count mismatch");
  }
  if (w.size() != 2 * net.H.cols()) {
    throw std::invalid_argument("solve_algebraic: disturbance vector has wrong size");
  }
  const double w0 = net.omega0;
  const Index n = kAlgebraicUnknowns * m;
  Matrix K = Matrix::Zero(n, n);
  Vector rhs = Vector::Zero(n);

  ComplexVector iw(net.H.cols());
  for (Index k = 0; k < iw.size(); ++k) iw(k) = {w(2 * k), w(2 * k + 1)};
  const ComplexVector injected = net.H * iw;

  for (Index i = 0; i < m; ++i) {
    const GeneratorParams& g = gens[static_cast<size_t>(i)];
    const double delta = rotors[static_cast<size_t>(i)].delta;
    const double c = std::cos(delta), s = std::sin(delta);
    const double c2 = std::cos(2 * delta), s2 = std::sin(2 * delta);
    const double Ls11 = g.L_a0 + 1.5 * g.L_a2 * c2;
    const double Ls12 = 1.5 * g.L_a2 * s2;
    const double Ls22 = g.L_a0 - 1.5 * g.L_a2 * c2;
    const Index o = kAlgebraicUnknowns * i;
    const Index id = o, iq = o + 1, ifd = o + 2, ed = o + 3, eq = o + 4, pd = o + 5, pq = o + 6;

    // field flux linkage
    K(o, ifd) = g.L_f;
    K(o, id) = -1.5 * g.L_af * c;
    K(o, iq) = -1.5 * g.L_af * s;
    rhs(o) = rotors[static_cast<size_t>(i)].psi_f;
    // stator flux linkages
    K(o + 1, pd) = 1.0;
    K(o + 1, id) = Ls11;
    K(o + 1, iq) = Ls12;
    K(o + 1, ifd) = -g.L_af * c;
    K(o + 2, pq) = 1.0;
    K(o + 2, id) = Ls12;
    K(o + 2, iq) = Ls22;
    K(o + 2, ifd) = -g.L_af * s;
    // stator voltages with psi_d-dot = psi_q-dot = 0
    K(o + 3, ed) = 1.0;
    K(o + 3, pq) = w0;
    K(o + 3, id) = g.R_a;
    K(o + 4, eq) = 1.0;
    K(o + 4, pd) = -w0;
    K(o + 4, iq) = g.R_a;
    // network: i = Y e + H i_w
    K(o + 5, id) = 1.0;
    K(o + 6, iq) = 1.0;
    for (Index k = 0; k < m; ++k) {
      const std::complex<double> y = net.Y(i, k);
      const Index ok = kAlgebraicUnknowns * k;
      K(o + 5, ok + 3) -= y.real();
      K(o + 5, ok + 4) += y.imag();
      K(o + 6, ok + 3) -= y.imag();
      K(o + 6, ok + 4) -= y.real();
    }
    rhs(o + 5) = injected(i).real();
    rhs(o + 6) = injected(i).imag();
  }

  // Row equilibration: the flux rows carry inductances (1e-3) next to unit rows.
  Vector row_scale(n);
  for (Index r = 0; r < n; ++r) row_scale(r) = 1.0 / K.row(r).cwiseAbs().maxCoeff();
  const Matrix Ks = row_scale.asDiagonal() * K;
  const Vector bs = row_scale.asDiagonal() * rhs;
  const Eigen::PartialPivLU<Matrix> lu(Ks);
  if (!(lu.rcond() > 1e3 * kEps)) {
    throw SingularAlgebraicSystem("stacked algebraic system is singular at the given rotor angles");
  }
  Vector sol = lu.solve(bs);
  sol += lu.solve(bs - Ks * sol);

  AlgebraicSolution out;
  out.relative_residual =
      (Ks * sol - bs).norm() / std::max(Ks.norm() * sol.norm() + bs.norm(), 1e-300);
  if (!(out.relative_residual <= 1e-9)) {
    throw SingularAlgebraicSystem("algebraic solve residual too large");
  }
  out.machines.resize(static_cast<size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const Index o = kAlgebraicUnknowns * i;
    MachineElectrical& e = out.machines[static_cast<size_t>(i)];
    e.i_d = sol(o);
    e.i_q = sol(o + 1);
    e.i_f = sol(o + 2);
    e.e_d = sol(o + 3);
    e.e_q = sol(o + 4);
    e.psi_d = sol(o + 5);
    e.psi_q = sol(o + 6);
    e.T_e = 1.5 * gens[static_cast<size_t>(i)].pole_pairs * (e.psi_d * e.i_q - e.psi_q * e.i_d);
  }
  return out;
}

std::vector<RotorState> unpack_state(const Vector& x) {
  if (x.size() % kStatesPerMachine != 0) {
    throw std::invalid_argument("state vector length must be a multiple of 3");
  }
  std::vector<RotorState> rotors(static_cast<size_t>(x.size() / kStatesPerMachine));
  for (size_t i = 0; i < rotors.size(); ++i) {
    const Index o = kStatesPerMachine * static_cast<Index>(i);
    rotors[i] = {x(o), x(o + 1), x(o + 2)};
  }
  return rotors;
}

Vector pack_state(const std::vector<RotorState>& rotors) {
  Vector x(kStatesPerMachine * static_cast<Index>(rotors.size()));
  for (size_t i = 0; i < rotors.size(); ++i) {
    const Index o = kStatesPerMachine * static_cast<Index>(i);
    x(o) = rotors[i].delta;
    x(o + 1) = rotors[i].omega;
    x(o + 2) = rotors[i].psi_f;
  }
  return x;
}

Vector dynamics_rhs(const std::vector<GeneratorParams>& gens, const NetworkModel& net,
                    const Vector& x, const Vector& u, const Vector& w) {
  const auto rotors = unpack_state(x);
  if (rotors.size() != gens.size() || u.size() != static_cast<Index>(gens.size())) {
    throw std::invalid_argument("dynamics_rhs: dimension mismatch");
  }
  const AlgebraicSolution alg = solve_algebraic(gens, net, rotors, w);
  Vector xdot(x.size());
  for (size_t i = 0; i < gens.size(); ++i) {
    const GeneratorParams& g = gens[i];
    const MachineElectrical& e = alg.machines[i];
    const Index o = kStatesPerMachine * static_cast<Index>(i);
    xdot(o) = rotors[i].omega - net.omega0;
    xdot(o + 1) = (g.T_m - e.T_e - g.B_fric * rotors[i].omega) / g.J_rot;
    xdot(o + 2) = u(static_cast<Index>(i)) - g.R_f * e.i_f;
  }
  return xdot;
}

double scaled_rhs_norm(const std::vector<GeneratorParams>& gens, const Vector& x,
                       const Vector& xdot) {
  double sum = 0.0;
  for (size_t i = 0; i < gens.size(); ++i) {
    const GeneratorParams& g = gens[i];
    const Index o = kStatesPerMachine * static_cast<Index>(i);
    const double torque_scale = std::max({std::abs(g.T_m), g.B_fric * std::abs(x(o + 1)), 1.0});
    const double field_scale = std::max(std::abs(g.e_f0), 1.0);
    sum += xdot(o) * xdot(o);
    sum += std::pow(xdot(o + 1) * g.J_rot / torque_scale, 2);
    sum += std::pow(xdot(o + 2) / field_scale, 2);
  }
  return std::sqrt(sum);
}

OperatingPoint solve_equilibrium(const std::vector<GeneratorParams>& gens,
                                 const NetworkModel& net, const EquilibriumSpec& spec) {
  const size_t m = gens.size();
  if (m == 0 || net.machines() != static_cast<Index>(m)) {
    throw std::invalid_argument("solve_equilibrium: machine count mismatch");
  }
  for (const auto& g : gens) g.validate();
  std::vector<TorqueMode> torque = spec.torque;
  if (torque.empty()) torque.assign(m, TorqueMode::Fixed);
  if (torque.size() != m) throw std::invalid_argument("torque mode list has wrong length");
  const bool by_voltage = spec.excitation == Excitation::TerminalVoltage;
  if (by_voltage && spec.terminal_voltage.size() != m) {
    throw std::invalid_argument("terminal voltage targets have wrong length");
  }
  const double w0 = net.omega0;

  // Fixed angles and initial guesses.
  std::vector<double> delta(m, spec.reference_angle);
  for (size_t i = 1; i < m; ++i) {
    if (i < spec.initial_delta.size()) delta[i] = spec.initial_delta[i];
  }
  std::vector<double> psi_f(m), psi_scale(m);
  for (size_t i = 0; i < m; ++i) {
    const GeneratorParams& g = gens[i];
    // no-load relation: stator currents zero, e_q = omega0 L_af i_f
    const double i_f = by_voltage ? spec.terminal_voltage[i] / (w0 * g.L_af) : g.e_f0 / g.R_f;
    psi_f[i] = g.L_f * i_f;
    psi_scale[i] = std::max(1.0, std::abs(psi_f[i]));
  }
  std::vector<size_t> angle_unknowns;
  for (size_t i = 1; i < m; ++i) {
    if (torque[i] == TorqueMode::Fixed) angle_unknowns.push_back(i);
  }
  const Index n_unknowns = static_cast<Index>(m + angle_unknowns.size());

  auto unpack = [&](const Vector& theta, std::vector<RotorState>& rotors) {
    rotors.resize(m);
    for (size_t i = 0; i < m; ++i) {
      rotors[i] = {delta[i], w0, theta(static_cast<Index>(i)) * psi_scale[i]};
    }
    for (size_t k = 0; k < angle_unknowns.size(); ++k) {
      rotors[angle_unknowns[k]].delta = theta(static_cast<Index>(m + k));
    }
  };
  const Vector w_zero = Vector::Zero(2 * net.H.cols());
  auto residual = [&](const Vector& theta) {
    std::vector<RotorState> rotors;
    unpack(theta, rotors);
    const AlgebraicSolution alg = solve_algebraic(gens, net, rotors, w_zero);
    std::vector<double> r;
    for (size_t i = 0; i < m; ++i) {
      const GeneratorParams& g = gens[i];
      const MachineElectrical& e = alg.machines[i];
      if (by_voltage) {
        const double target = spec.terminal_voltage[i];
        r.push_back((std::hypot(e.e_d, e.e_q) - target) / std::max(target, 1.0));
      } else {
        r.push_back((g.e_f0 - g.R_f * e.i_f) / std::max(std::abs(g.e_f0), 1.0));
      }
    }
    for (size_t i = 0; i < m; ++i) {
      if (torque[i] != TorqueMode::Fixed) continue;
      const GeneratorParams& g = gens[i];
      const double scale = std::max({std::abs(g.T_m), g.B_fric * w0, 1.0});
      r.push_back((g.T_m - alg.machines[i].T_e - g.B_fric * w0) / scale);
    }
    return Vector(Eigen::Map<Vector>(r.data(), static_cast<Index>(r.size())));
  };

  Vector theta(n_unknowns);
  for (size_t i = 0; i < m; ++i) theta(static_cast<Index>(i)) = psi_f[i] / psi_scale[i];
  for (size_t k = 0; k < angle_unknowns.size(); ++k) {
    theta(static_cast<Index>(m + k)) = delta[angle_unknowns[k]];
  }

  std::vector<double> history;
  Vector r = residual(theta);
  history.push_back(r.norm());
  int iter = 0;
  for (; iter < spec.max_iterations && r.lpNorm<Eigen::Infinity>() > spec.tolerance; ++iter) {
    Matrix jac(r.size(), n_unknowns);
    for (Index j = 0; j < n_unknowns; ++j) {
      const double step = 1e-7 * std::max(1.0, std::abs(theta(j)));
      Vector tp = theta, tm = theta;
      tp(j) += step;
      tm(j) -= step;
      jac.col(j) = (residual(tp) - residual(tm)) / (2.0 * step);
    }
    const Vector step = -Eigen::CompleteOrthogonalDecomposition<Matrix>(jac).solve(r);
    double lambda = 1.0;
    Vector trial = theta + step;
    Vector r_trial;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving) {
      try {
        r_trial = residual(trial);
        if (r_trial.norm() < r.norm()) {
          accepted = true;
          break;
        }
      } catch (const SingularAlgebraicSystem&) {
      }
      lambda *= 0.5;
      trial = theta + lambda * step;
    }
    if (!accepted) break;
    theta = trial;
    r = r_trial;
    history.push_back(r.norm());
  }
  if (!(r.lpNorm<Eigen::Infinity>() <= spec.tolerance)) {
    throw NoConvergence("equilibrium Newton iteration did not converge", iter,
                        r.lpNorm<Eigen::Infinity>(), history);
  }

  std::vector<RotorState> rotors;
  unpack(theta, rotors);
  OperatingPoint op;
  op.residual_history = std::move(history);
  op.electrical = solve_algebraic(gens, net, rotors, w_zero);
  op.generators = gens;
  op.u0.resize(static_cast<Index>(m));
  for (size_t i = 0; i < m; ++i) {
    GeneratorParams& g = op.generators[i];
    const MachineElectrical& e = op.electrical.machines[i];
    if (by_voltage) g.e_f0 = g.R_f * e.i_f;
    if (torque[i] == TorqueMode::Balance) g.T_m = g.B_fric * w0 + e.T_e;
    op.u0(static_cast<Index>(i)) = g.e_f0;
  }
  op.x0 = pack_state(rotors);
  const Vector xdot = dynamics_rhs(op.generators, net, op.x0, op.u0, w_zero);
  op.rhs_norm = scaled_rhs_norm(op.generators, op.x0, xdot);
  if (!(op.rhs_norm <= 1e-8)) {
    throw NoConvergence("equilibrium residual above tolerance after Newton", iter, op.rhs_norm,
                        op.residual_history);
  }
  return op;
}

namespace {

struct JacobianProblem {
  const std::vector<GeneratorParams>& gens;
  const NetworkModel& net;
  const Vector& x0;
  const Vector& u0;
  const Vector& w0;
  Vector noise_scale;  // magnitude of the terms summed in each rhs row
  double current_scale;

  Vector eval(int which, Index j, double delta) const {
    Vector x = x0, u = u0, w = w0;
    (which == 0 ? x : which == 1 ? u : w)(j) += delta;
    return dynamics_rhs(gens, net, x, u, w);
  }

  Vector central(int which, Index j, double h) const {
    return (eval(which, j, h) - eval(which, j, -h)) / (2.0 * h);
  }

  Vector column(int which, Index j, const std::string& label) const {
    const Vector& base = which == 0 ? x0 : which == 1 ? u0 : w0;
    const double floor = which == 2 ? 1e-4 * current_scale : 1e-6;
    const double h = power_of_two_step(std::max(floor, 1e-6 * std::abs(base(j))));
    const Vector d1 = central(which, j, h);
    const Vector d2 = central(which, j, 0.5 * h);
    const Vector diff = (d1 - d2).cwiseAbs();
    const Vector noise = 256.0 * kEps * noise_scale / (0.5 * h);
    const Vector allowed = 1e-6 * d2.cwiseAbs() + noise;
    if ((diff.array() <= allowed.array()).all()) return d1;
    // Truncation-dominated: the error must shrink by ~4 per halving.
    const Vector d3 = central(which, j, 0.25 * h);
    const double e1 = (d1 - d2).norm();
    const double e2 = (d2 - d3).norm();
    const double ratio = e2 > 0.0 ? e1 / e2 : std::numeric_limits<double>::infinity();
    if (std::abs(ratio - 4.0) <= 0.4) return d1;
    std::ostringstream os;
    os << "finite-difference column " << label << " not Richardson-consistent (ratio " << ratio
       << ")";
    throw JacobianInconsistent(os.str());
  }
};

}  // namespace

LinearPlant linearize(const std::vector<GeneratorParams>& gens, const NetworkModel& net,
                      const OperatingPoint& op) {
  (void)gens;  // T_m is additive; the operating point carries the resolved copies
  const auto& g = op.generators;
  const Index m = static_cast<Index>(g.size());
  const Vector w0 = Vector::Zero(2 * net.H.cols());

  JacobianProblem prob{g, net, op.x0, op.u0, w0, Vector(3 * m), 1.0};
  for (const auto& e : op.electrical.machines) {
    prob.current_scale = std::max(prob.current_scale, std::hypot(e.i_d, e.i_q));
  }
  for (Index i = 0; i < m; ++i) {
    const auto& gi = g[static_cast<size_t>(i)];
    const auto& e = op.electrical.machines[static_cast<size_t>(i)];
    prob.noise_scale(3 * i) = std::abs(op.x0(3 * i + 1));
    prob.noise_scale(3 * i + 1) =
        std::max({std::abs(gi.T_m), std::abs(e.T_e), gi.B_fric * std::abs(op.x0(3 * i + 1))}) /
        gi.J_rot;
    prob.noise_scale(3 * i + 2) = std::max(std::abs(gi.e_f0), gi.R_f * std::abs(e.i_f));
  }

  LinearPlant plant;
  plant.machines = m;
  plant.A.resize(3 * m, 3 * m);
  plant.Bu.resize(3 * m, m);
  plant.Bw.resize(3 * m, w0.size());
  for (Index j = 0; j < plant.A.cols(); ++j) plant.A.col(j) = prob.column(0, j, "A:" + std::to_string(j));
  for (Index j = 0; j < plant.Bu.cols(); ++j) plant.Bu.col(j) = prob.column(1, j, "Bu:" + std::to_string(j));
  for (Index j = 0; j < plant.Bw.cols(); ++j) plant.Bw.col(j) = prob.column(2, j, "Bw:" + std::to_string(j));
  return plant;
}

std::string LinearPlant::state_name(Index i) {
  static const char* names[] = {"delta", "omega", "psi_f"};
  return std::string(names[i % 3]) + "_" + std::to_string(i / 3 + 1);
}

Matrix swap_permutation(Index block) {
  Matrix P = Matrix::Zero(2 * block, 2 * block);
  P.topRightCorner(block, block).setIdentity();
  P.bottomLeftCorner(block, block).setIdentity();
  return P;
}

double swap_symmetry_residual(const LinearPlant& plant) {
  if (plant.machines != 2) throw std::invalid_argument("swap symmetry needs exactly two machines");
  const Matrix Px = swap_permutation(plant.nx() / 2);
  const Matrix Pu = swap_permutation(plant.nu() / 2);
  const Matrix Pw = swap_permutation(plant.nw() / 2);
  const double a = linalg::relative_error(Px * plant.A, plant.A * Px);
  const double b = linalg::relative_error(Px * plant.Bu, plant.Bu * Pu);
  const double c = linalg::relative_error(Px * plant.Bw, plant.Bw * Pw);
  return std::max({a, b, c});
}

}  // namespace dncs::grid
