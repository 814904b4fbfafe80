#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nld/analysis.hpp"

namespace nld {

inline constexpr int kSchemaVersion = 1;

struct DomainConfig {
  std::string kind = "interval";  // interval | rectangle | disk
  std::vector<double> lo = {0.0};
  std::vector<double> hi = {1.0};
  std::vector<double> center = {0.0, 0.0};
  double radius = 1.0;

  bool operator==(const DomainConfig&) const = default;
};

struct GridConfig {
  /// Fixed resolution; 0 selects the automatic rule.
  std::size_t cells_per_axis = 0;
  /// Automatic rule: at least min_cells per axis and cells_per_support cells
  /// across every concentrated support, capped at max_cells per axis.
  std::size_t min_cells = 200;
  std::size_t cells_per_support = kMinSupportCells;
  std::size_t max_cells = 1u << 20;

  bool operator==(const GridConfig&) const = default;
};

struct KernelConfig {
  std::string kind = "uniform";  // uniform | tent | truncated_gaussian | ring | tabulated
  double radius = 0.05;
  double sigma = 0.0;
  double cutoff = 0.0;
  double delta = 0.0;
  double slope = 0.0;
  std::vector<std::pair<double, double>> table;
  std::string path;  // tabulated kernel CSV, used when table is empty

  bool operator==(const KernelConfig&) const = default;
};

/// Resource family indexed by d.
///   power:      spike of height alpha d^beta
///   bangbang:   spike of fixed height
///   cosine:     1 + amplitude cos(2 pi x / L) (and in y in 2D), normalized
///   random:     i.i.d. uniform samples from the seed, normalized
///   csv:        per-cell values read from path
struct ResourceConfig {
  std::string family = "power";
  double alpha = 1.0;
  double beta = 1.0;
  double height = 20.0;
  double amplitude = 0.5;
  std::string shape = "ball";  // ball | block
  std::string path;
  bool normalize = true;

  bool concentrated() const;
  /// Plateau height of a concentrated member at diffusion rate d.
  double height_at(double d) const;
  bool operator==(const ResourceConfig&) const = default;
};

struct PlacementConfig {
  std::string mode = "interior";  // interior | boundary | explicit
  std::vector<double> x0 = {0.0, 0.0};

  bool operator==(const PlacementConfig&) const = default;
};

struct RangeConfig {
  double min = 0.0;
  double max = 0.0;
  std::size_t points = 0;

  std::vector<double> values() const { return geometric_grid(min, max, points); }
  bool operator==(const RangeConfig&) const = default;
};

struct SolverConfig {
  double tol = 1e-10;
  int max_iter = 100000;
  double eig_tol = 1e-12;
  int eig_max_iter = 100000;

  SolverOptions options() const;
  bool operator==(const SolverConfig&) const = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  DomainConfig domain;
  GridConfig grid;
  KernelConfig kernel;
  ResourceConfig resource;
  PlacementConfig placement;
  std::optional<double> d;
  std::optional<RangeConfig> d_grid;
  SolverConfig solver;
  std::string boundary_condition = "neumann";
  std::string backend = "auto";
  RangeConfig epsilon_grid{1e-3, 4.0, 24};
  std::uint64_t seed = 1;
  double fit_fraction = 0.5;
  unsigned threads = 1;
  std::string output = "out";

  /// The d values a command iterates over: d_grid when set, else {d}.
  std::vector<double> d_values() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a config. Missing keys take their defaults; unknown keys and type
/// mismatches raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

/// Every problem found in the config, including resolution guards for each
/// requested d. Empty when the config is valid.
std::vector<std::string> validate(const ExperimentConfig& cfg);
/// Throws ConfigError carrying the validate() list when it is nonempty.
void require_valid(const ExperimentConfig& cfg);

Domain make_domain(const DomainConfig& cfg);
KernelSpec make_kernel(const KernelConfig& cfg);
/// Cells per axis used at diffusion rate d.
std::size_t cells_for(const ExperimentConfig& cfg, double d);
/// Operator and resource at diffusion rate d.
Problem make_problem(const ExperimentConfig& cfg, double d);
/// The d-indexed family described by the config. Members sharing a grid
/// share one operator.
Family make_family(const ExperimentConfig& cfg);

}  // namespace nld
