#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nld/kernel.hpp"
#include "nld/resources.hpp"
#include "nld/steady.hpp"

namespace nld {

// ---------------------------------------------------------------------------
// Concentration criterion: mass of m on {m / d > (1 + eps) a} must stay >= eps.

struct CriterionAReport {
  double d = 0.0;
  std::vector<double> epsilons;
  std::vector<double> masses;    // integral of m over the level set
  std::vector<double> measures;  // measure of the level set
  /// Largest eps in the grid with mass(eps) >= eps.
  std::optional<double> max_feasible_epsilon;

  bool feasible() const { return max_feasible_epsilon.has_value(); }
};

/// 24 geometric points in [1e-3, 4].
std::vector<double> default_epsilon_grid();

/// Throws InvalidArgument unless eps_grid is positive and strictly increasing.
CriterionAReport criterion_A(const Grid& grid, const Resource& m, double d, std::span<const double> a,
                             std::span<const double> eps_grid);

// ---------------------------------------------------------------------------
// Scaling sweeps

struct PowerFit {
  double exponent = 0.0;
  double coefficient = 0.0;
  double r_squared = 0.0;
  std::size_t window_begin = 0;  // first sample index in the fit window
  std::size_t window_end = 0;    // one past the last
};

/// Least squares of log(total) against log(d) over the trailing `fraction`
/// of the samples (at least two points).
PowerFit fit_power_law(std::span<const double> d, std::span<const double> total, double fraction = 0.5);

/// Upper-bound machinery constants for the total population.
struct BoundConstants {
  double K1 = 0.0;
  double K2 = 0.0;
  double K3 = 0.0;
  double C1 = 0.0;
  std::optional<double> C0_estimate;
  // inputs
  double m_total = 0.0;
  double omega_measure = 0.0;
  double kernel_sup = 0.0;
  double min_a = 0.0;
};

/// K1 = 2 |k|_inf |Omega|,
/// K2 = 4 (int m + K1 |Omega|) |k|_inf / min a + 2 |k|_inf |Omega|,
/// K3 = 2 (K2 + 2) int m + (4 / |Omega|) (int m / min a)^2,
/// C1 = 2 (int m + sqrt(K3 |Omega|)).
/// Throws InvalidArgument on nonpositive inputs or min_a > 1.
BoundConstants bound_constants(double m_total, double omega_measure, double kernel_sup, double min_a);

/// Constants for a concrete operator and resource.
BoundConstants bound_constants(const DiscreteOperator& op, const Resource& m);

/// A resource family indexed by the diffusion rate. Each member may live on
/// its own grid.
struct Problem {
  std::shared_ptr<const DiscreteOperator> op;
  Resource m;
};

struct Family {
  std::string descriptor;
  std::function<Problem(double d)> make;
};

struct SweepSample {
  double d = 0.0;
  double total = 0.0;
  double residual = 0.0;
  double scaled_residual = 0.0;
  int iterations = 0;
  std::size_t cells = 0;
  double sup_theta = 0.0;
  double sup_m = 0.0;
  double C1 = 0.0;
  double omega2_measure = 0.0;
  double omega2_bound = 0.0;
  std::optional<double> max_feasible_epsilon;
};

struct SweepResult {
  std::string family;
  std::vector<SweepSample> samples;
  PowerFit fit;
  bool complete = true;
  std::string error;  // first failure, when incomplete

  std::vector<double> ds() const;
  std::vector<double> totals() const;
  /// min over samples with d >= 1 of total / sqrt(d).
  std::optional<double> C0_estimate() const;
};

struct SweepOptions {
  SolverOptions solver;
  double fit_fraction = 0.5;
  unsigned threads = 1;
  std::vector<double> epsilon_grid = default_epsilon_grid();
};

/// Solves every member of the family (concurrently when threads > 1) and
/// fits total ~ c d^p. A failing member truncates the result at that d and
/// flags it incomplete. Throws InvalidArgument if d_grid is not positive and
/// strictly increasing.
SweepResult sweep(const Family& family, std::span<const double> d_grid, const SweepOptions& opts = {});

/// n points geometrically spaced in [lo, hi].
std::vector<double> geometric_grid(double lo, double hi, std::size_t n);

// ---------------------------------------------------------------------------
// Level sets of the upper- and lower-bound arguments

struct LevelSet {
  double measure = 0.0;
  double theta_mass = 0.0;
};

struct ThresholdCheck {
  double epsilon = 0.0;
  double theta_threshold = 0.0;  // 2 (max a) d eps
  double measure = 0.0;          // of {theta >= theta_threshold}
  std::size_t violations = 0;    // cells in that set with m <= (1 + eps) d a
  double d_threshold = 0.0;      // (C1 |k|_inf)^2 / (2 max a eps)^4
  bool applicable = false;       // d >= d_threshold
};

struct LevelSetReport {
  LevelSet omega1;  // {theta > K1 d}
  LevelSet omega2;  // {theta > K2 d}
  double omega2_bound = 0.0;  // (1/d) (2 / min a) int m
  std::size_t omega2_inclusion_violations = 0;  // cells of omega2 with m < d a / 2
  LevelSet omega_d;  // {m <= d^(3/4) a}
  double omega_d_complement_measure = 0.0;
  double omega_d_complement_bound = 0.0;  // d^(-3/4) int m / min a
  std::vector<ThresholdCheck> threshold_checks;
};

LevelSetReport level_set_diagnostics(const Grid& grid, std::span<const double> theta, const Resource& m, double d,
                                     std::span<const double> a, const BoundConstants& bc,
                                     std::span<const double> threshold_epsilons);

}  // namespace nld
