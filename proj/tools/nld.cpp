#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nld/error.hpp"
#include "nld/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Steady states of nonlocal dispersal models and their total population"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  unsigned threads = 0;
  bool verbose = false;
  app.add_option("command", command, "solve | mu0 | sweep | criterion | bounds | examples | selftest")
      ->required()
      ->check(CLI::IsMember({"solve", "mu0", "sweep", "criterion", "bounds", "examples", "selftest"}));
  app.add_option("--config", config_path, "JSON experiment configuration");
  app.add_option("--out", out_dir, "Output directory (default: the config's output entry)");
  app.add_option("--threads", threads, "Worker threads for sweeps (default: NLD_THREADS or the config)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "Progress messages on stderr");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nld::exit_config_error;
  }

  nld::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = nld::load_config(config_path);
  } catch (const nld::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return nld::exit_config_error;
  }
  if (threads == 0) {
    if (const char* env = std::getenv("NLD_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v < 1) throw std::out_of_range("NLD_THREADS");
        threads = static_cast<unsigned>(v);
      } catch (const std::exception&) {
        std::cerr << "config error: NLD_THREADS must be a positive integer\n";
        return nld::exit_config_error;
      }
    }
  }
  if (threads > 0) cfg.threads = threads;

  nld::RunOptions opts;
  opts.out_dir = out_dir.empty() ? cfg.output : out_dir;
  opts.verbose = verbose;
  nld::RunReport report;
  try {
    report = nld::run(nld::parse_command(command), cfg, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return nld::exit_solver_failure;
  }

  std::cout << command << ": " << report.to_json()["status"].get<std::string>() << " (exit " << report.exit_code
            << ")\n";
  for (const auto& c : report.checks) {
    if (verbose || !c.passed) {
      std::cout << "  [" << (c.passed ? "pass" : "FAIL") << "] " << c.name << "  value=" << c.value
                << " limit=" << c.limit << '\n';
    }
  }
  for (const auto& e : report.errors) std::cerr << "  error: " << e << '\n';
  if (!opts.out_dir.empty()) std::cout << "  output: " << opts.out_dir << '\n';
  return report.exit_code;
}
