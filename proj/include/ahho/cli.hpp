#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ahho/benchmarks.hpp"

namespace ahho {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  Optimizer optimizer = Optimizer::Newton;
  double gradient_tolerance = 1e-10;
  int max_iterations = 500;
  int lbfgs_memory = 10;

  bool operator==(const SolverOptions&) const = default;
};

struct RunConfig {
  std::string benchmark;
  int degree = 0;
  Variant variant = Variant::RT;
  Refinement mode = Refinement::Adaptive;
  double theta = 0.5;
  double epsilon = 0.01;  // "auto" in a config file resolves to (k+1)/100
  int max_ndof = 10000;
  int max_levels = 100;
  std::string output = "output";
  bool record_time = false;  // fills the seconds column; breaks byte-identical reruns
  SolverOptions solver;

  bool operator==(const RunConfig&) const = default;
};

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

// Parses YAML text; missing keys take their defaults. Overrides replace top-level keys before
// parsing. Throws ConfigError naming the offending key.
RunConfig parse_config(const std::string& text, const ConfigOverrides& overrides = {});
RunConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});
std::string serialize_config(const RunConfig& config);

// Throws ConfigError naming the violated constraint.
void validate(const RunConfig& config);
std::vector<std::string> config_warnings(const RunConfig& config);

AhhoSettings ahho_settings(const RunConfig& config, const Benchmark& benchmark);

// Diagnostics of one level: errors, LEB and the guaranteed bound whenever the benchmark provides them.
LevelReport report_level(const Benchmark& benchmark, const LevelState& state);

std::string csv_header();
std::string csv_row(const LevelReport& report);

struct RunOutcome {
  int exit_code = 0;
  StopReason reason = StopReason::MaxLevels;
  std::vector<LevelReport> reports;
  std::optional<Extrapolation> extrapolation;  // uniform runs with at least three levels
};

// Writes convergence.csv, level_###.mesh and run.json into config.output.
RunOutcome run(const RunConfig& config, std::ostream& log);

}  // namespace ahho
