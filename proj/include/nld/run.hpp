#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nld/config.hpp"

namespace nld {

inline constexpr const char* kVersion = "0.1.0";

enum class Command { solve, mu0, sweep, criterion, bounds, examples, selftest };

Command parse_command(const std::string& name);
std::string to_string(Command command);

enum ExitCode : int { exit_ok = 0, exit_check_failure = 1, exit_config_error = 2, exit_solver_failure = 3 };

/// One asserted invariant: passed iff value <= limit (or the flag holds).
struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double limit = 0.0;
};

struct RunReport {
  Command command = Command::solve;
  nlohmann::json config;
  nlohmann::json results = nlohmann::json::object();
  std::vector<Check> checks;
  /// CSV file name -> comma-separated column list.
  std::map<std::string, std::string> files;
  /// Phase name -> wall-clock seconds. Kept out of to_json().
  std::map<std::string, double> timings;
  std::vector<std::string> errors;
  int exit_code = exit_ok;

  bool checks_passed() const;
  /// Deterministic report body (no timings).
  nlohmann::json to_json() const;
};

struct RunOptions {
  /// Output directory; empty writes nothing.
  std::string out_dir;
  bool verbose = false;
  /// Progress log when verbose (defaults to std::cerr).
  std::ostream* log = nullptr;
};

/// Validates the config, dispatches the command and writes config.json,
/// report.json, timings.json and the command's CSV files into out_dir.
/// Never throws for configuration or solver problems; they are reflected in
/// exit_code and errors.
RunReport run(Command command, const ExperimentConfig& cfg, const RunOptions& opts = {});

/// A named scenario of the examples command.
struct ExampleScenario {
  std::string group;  // growth_exponent | boundary_placement | ring_kernel
  std::string name;
  bool expect_feasible = false;
  ExperimentConfig config;
};

/// The scenarios run by the examples command, inheriting solver, backend,
/// threads, epsilon grid and seed from `base`. The d-grid is base.d_grid when
/// set, else six geometric points in [100, 1000].
std::vector<ExampleScenario> example_scenarios(const ExperimentConfig& base);

}  // namespace nld
