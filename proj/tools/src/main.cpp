#include <iostream>

#include <CLI11.hpp>

#include "dncs/cli/commands.hpp"

namespace {

using dncs::distributed::Method;

const std::map<std::string, Method> kMethods = {{"lqr", Method::Lqr}, {"hinf", Method::Hinf}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed networked control of a dual-machine grid"};
  app.require_subcommand(1);
  app.fallthrough();

  dncs::cli::RunOptions opts;
  std::string config;
  app.add_option("--config", config, "benchmark configuration (YAML); built-in defaults if absent");
  app.add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", opts.seed, "seed for randomized scenarios")->capture_default_str();
  app.add_option("--threads", opts.threads, "worker threads for sweeps")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();

  Method measure = Method::Lqr;
  std::string gains;
  auto add_measure = [&](CLI::App* sub) {
    sub->add_option("--measure", measure, "lqr or hinf")
        ->transform(CLI::CheckedTransformer(kMethods, CLI::ignore_case));
    sub->add_option("--gains", gains, "local gain set (default: paired with --measure)")
        ->check(CLI::IsMember({"lqr", "hinf"}));
  };

  auto* lin = app.add_subcommand("linearize", "operating point and small-signal plant");

  double delay = 0.0;
  auto* design = app.add_subcommand("design", "per-mode feedback gains at one delay");
  add_measure(design);
  design->add_option("--delay", delay, "link delay (s)")->capture_default_str();

  std::string mode = "all";
  auto* sweep = app.add_subcommand("sweep", "measure and bounds over the delay grid");
  add_measure(sweep);
  sweep->add_option("--mode", mode, "oscillation, common or all")
      ->check(CLI::IsMember({"oscillation", "common", "all"}))
      ->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "closed-loop simulation at one delay");
  add_measure(simulate);
  simulate->add_option("--delay", delay, "link delay (s)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dncs::cli::kExitUsage;
  }

  if (!config.empty()) opts.config_path = config;
  opts.env = dncs::cli::environment_overrides();
  std::optional<Method> gain_set;
  if (!gains.empty()) gain_set = kMethods.at(gains);

  if (*lin) return dncs::cli::cmd_linearize(opts, std::cout);
  if (*design) return dncs::cli::cmd_design(opts, measure, delay, gain_set, std::cout);
  if (*sweep) {
    const auto sel = mode == "oscillation" ? dncs::cli::ModeSelection::Oscillation
                     : mode == "common"    ? dncs::cli::ModeSelection::Common
                                           : dncs::cli::ModeSelection::All;
    return dncs::cli::cmd_sweep(opts, measure, sel, gain_set, std::cout);
  }
  return dncs::cli::cmd_simulate(opts, measure, delay, gain_set, std::cout);
}
