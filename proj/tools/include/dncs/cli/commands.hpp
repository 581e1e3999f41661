#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dncs/cli/config.hpp"

/// Subcommands of the dncs tool. Each returns a process exit code and writes
/// its artifacts plus report.json into the output directory.
namespace dncs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvariant = 1;  ///< a hard invariant failed
inline constexpr int kExitUsage = 2;      ///< bad flags or configuration
inline constexpr int kExitNumerical = 3;  ///< a numerical stage raised

struct RunOptions {
  std::optional<std::string> config_path;  ///< built-in benchmark when absent
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::map<std::string, std::string> env;  ///< DNCS__ overrides
};

enum class ModeSelection { Oscillation, Common, All };

struct RunReport {
  std::string command;
  std::vector<std::pair<std::string, std::string>> flags;
  std::string config_yaml;  ///< resolved, loadable with parse_config
  std::vector<std::pair<std::string, double>> timings_s;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, std::string>> outputs;  ///< file, sha256
  std::string summary_json = "{}";
  int exit_code = 0;

  std::string to_json() const;
};

int cmd_linearize(const RunOptions& opts, std::ostream& log);

int cmd_design(const RunOptions& opts, distributed::Method measure, double delay,
               std::optional<distributed::Method> gains, std::ostream& log);

int cmd_sweep(const RunOptions& opts, distributed::Method measure, ModeSelection modes,
              std::optional<distributed::Method> gains, std::ostream& log);

int cmd_simulate(const RunOptions& opts, distributed::Method measure, double delay,
                 std::optional<distributed::Method> gains, std::ostream& log);

}  // namespace dncs::cli
