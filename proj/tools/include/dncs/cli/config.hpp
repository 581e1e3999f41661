#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dncs/benchmark.hpp"
#include "dncs/grid_model.hpp"
#include "dncs/sim_eval.hpp"

/// Benchmark configuration: a YAML document whose keys carry their units.
namespace dncs::cli {

/// Schema violation. `line` is 1-based, or 0 when the value came from the
/// environment or a default.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, int line, const std::string& message);

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

struct ImpedanceSpec {
  bool open = false;
  std::complex<double> z{0.0, 0.0};

  grid::Impedance impedance() const;
};

struct GeneratorSpec {
  grid::GeneratorParams params;
  bool balance_torque = true;  ///< T_m resolved at the equilibrium
};

enum class ScenarioState { DefaultModal, Modal, Zero, Random };

struct ScenarioSpec {
  std::string mode = "oscillation";
  ScenarioState initial = ScenarioState::DefaultModal;
  std::vector<double> initial_modal_state;
  sim::Disturbance disturbance = sim::Disturbance::Zero;
  Index impulse_channel = 0;
  double step_s = 0.0;
  double horizon_s = 0.0;
  Index trace_stride = 1;
  double trace_until_s = 20.0;
};

struct BenchmarkConfig {
  bool shared_generator = true;
  std::vector<GeneratorSpec> generators;  ///< two machines
  double omega0 = benchmark::kOmega0;
  ImpedanceSpec Z_T, Z_L, Z_C;
  double reference_angle = 0.0;
  double delta_weight = 1.0;
  double input_weight = 2.5e-5;
  double output_input_weight = 1e-2;
  benchmark::OutputForm output_form = benchmark::OutputForm::Stacked;
  Matrix gain_lqr;   ///< 1 x 3, [delta, omega, psi_f] -> e_f
  Matrix gain_hinf;  ///< 1 x 3
  double h = 0.02;
  std::vector<double> delay_grid;
  double gamma_tol = 1e-3;
  double decomposition_tol = 1e-8;
  ScenarioSpec scenario;
};

/// Benchmark defaults (the values shipped in configs/benchmark.yaml).
BenchmarkConfig default_config();

/// Parses YAML text. `env` holds overrides keyed like
/// DNCS__section__key (nested sections joined by "__"); their values are
/// parsed as YAML. Unknown keys and out-of-range values raise ConfigError.
BenchmarkConfig parse_config(const std::string& text,
                             const std::map<std::string, std::string>& env = {});

BenchmarkConfig load_config(const std::string& path,
                            const std::map<std::string, std::string>& env = {});

/// Every variable of the process environment starting with DNCS__.
std::map<std::string, std::string> environment_overrides();

/// Fully resolved configuration as YAML that parse_config accepts.
std::string to_yaml(const BenchmarkConfig& cfg);

struct KeyDoc {
  std::string key;  ///< dotted path
  std::string unit;
  std::string description;
};

/// Every accepted key with its unit.
const std::vector<KeyDoc>& schema();

/// Objects derived from a configuration.
struct Pipeline {
  std::vector<grid::GeneratorParams> generators;
  grid::NetworkModel net;
  grid::OperatingPoint op;
  grid::LinearPlant plant;
  distributed::Objectives objectives;
};

Pipeline build_pipeline(const BenchmarkConfig& cfg);

/// K1 for the LQR pipeline and K2 for the H-infinity pipeline.
const Matrix& default_gain(const BenchmarkConfig& cfg, distributed::Method method);

}  // namespace dncs::cli
