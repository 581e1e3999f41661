#pragma once

#include "dncs/grid_model.hpp"

/// Symmetric dual-machine benchmark: two identical generators, each feeding a
/// load bus, load buses tied by a line.
namespace dncs::benchmark {

inline constexpr double kOmega0 = 377.0;

/// Generator data of the benchmark (T_m is resolved by the equilibrium).
grid::GeneratorParams generator(double e_f0 = 300.0);

inline const std::complex<double> kZ_T{0.011, 0.106};
inline const std::complex<double> kZ_L{6.2, 2.1};
inline const std::complex<double> kZ_C{0.054, 0.53};

grid::NetworkModel network();

/// Local gain rows [delta, omega, psi_f] -> e_f.
Matrix gain_K1();
Matrix gain_K2();

/// Block-diagonal K = diag(K_i, ..., K_i).
Matrix local_gain(const Matrix& K_row, Index machines);

/// Stacked: y = [delta; 1e-2 e_f] (2m outputs). Summed: y = delta + 1e-2 e_f
/// (m outputs); with the summed form a sampled feedback e_f = -100 delta
/// nulls every y_k, so the H-infinity problem has no minimizer.
enum class OutputForm { Stacked, Summed };

struct Options {
  double e_f0 = 300.0;
  double reference_angle = 0.0;
  OutputForm output = OutputForm::Stacked;
};

/// Everything needed downstream: operating point, plant and objectives.
struct Benchmark {
  std::vector<grid::GeneratorParams> generators;
  grid::NetworkModel net;
  grid::OperatingPoint op;
  grid::LinearPlant plant;
  Matrix Q;   ///< weights delta_1, delta_2
  Matrix R;   ///< 2.5e-5 I
  Matrix C;   ///< regulated output, see OutputForm
  Matrix Du;
  Matrix Dw;
};

Benchmark build(const Options& opts = {});

/// Cost and output matrices for the benchmark objectives.
Matrix cost_Q(Index machines, double delta_weight = 1.0);
Matrix cost_R(Index machines, double input_weight = 2.5e-5);
Matrix output_C(Index machines, OutputForm form = OutputForm::Stacked);
Matrix output_Du(Index machines, OutputForm form = OutputForm::Stacked,
                 double input_weight = 1e-2);

}  // namespace dncs::benchmark
