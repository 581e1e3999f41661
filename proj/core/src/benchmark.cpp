#include "dncs/benchmark.hpp"

namespace dncs::benchmark {

grid::GeneratorParams generator(double e_f0) {
  grid::GeneratorParams g;
  g.L_a0 = 4.9e-3;
  g.L_a2 = 46e-6;
  g.L_f = 577e-3;
  g.L_af = 4e-3;
  g.R_a = 3e-3;
  g.R_f = 71.5e-3;
  g.J_rot = 27548.0;
  g.B_fric = 10.0;
  g.pole_pairs = 2;
  g.T_m = 0.0;
  g.e_f0 = e_f0;
  return g;
}

grid::NetworkModel network() {
  return grid::build_two_area_network(grid::Impedance::finite(kZ_T), grid::Impedance::finite(kZ_L),
                                      grid::Impedance::finite(kZ_C), kOmega0);
}

Matrix gain_K1() {
  Matrix K(1, 3);
  K << 169.6, 201.0, -3.04;
  return K;
}

Matrix gain_K2() {
  Matrix K(1, 3);
  K << 544750.0, 700010.0, -9890.0;
  return K;
}

Matrix local_gain(const Matrix& K_row, Index machines) {
  Matrix K = Matrix::Zero(K_row.rows() * machines, K_row.cols() * machines);
  for (Index i = 0; i < machines; ++i) {
    K.block(i * K_row.rows(), i * K_row.cols(), K_row.rows(), K_row.cols()) = K_row;
  }
  return K;
}

Matrix cost_Q(Index machines, double delta_weight) {
  Matrix Q = Matrix::Zero(3 * machines, 3 * machines);
  for (Index i = 0; i < machines; ++i) Q(3 * i, 3 * i) = delta_weight;
  return Q;
}

Matrix cost_R(Index machines, double input_weight) {
  return input_weight * Matrix::Identity(machines, machines);
}

Matrix output_C(Index machines, OutputForm form) {
  const Index rows = form == OutputForm::Stacked ? 2 * machines : machines;
  Matrix C = Matrix::Zero(rows, 3 * machines);
  for (Index i = 0; i < machines; ++i) C(i, 3 * i) = 1.0;
  return C;
}

Matrix output_Du(Index machines, OutputForm form, double input_weight) {
  const Index rows = form == OutputForm::Stacked ? 2 * machines : machines;
  Matrix D = Matrix::Zero(rows, machines);
  D.bottomRows(machines) = input_weight * Matrix::Identity(machines, machines);
  return D;
}

Benchmark build(const Options& opts) {
  Benchmark b;
  b.generators.assign(2, generator(opts.e_f0));
  b.net = network();
  grid::EquilibriumSpec spec;
  spec.torque.assign(2, grid::TorqueMode::Balance);
  spec.reference_angle = opts.reference_angle;
  spec.initial_delta.assign(2, opts.reference_angle);
  b.op = grid::solve_equilibrium(b.generators, b.net, spec);
  b.plant = grid::linearize(b.generators, b.net, b.op);
  b.Q = cost_Q(2);
  b.R = cost_R(2);
  b.C = output_C(2, opts.output);
  b.Du = output_Du(2, opts.output);
  b.Dw = Matrix::Zero(b.C.rows(), 4);
  return b;
}

}  // namespace dncs::benchmark
