#pragma once

#include <string>
#include <vector>

#include "nld/kernel.hpp"
#include "nld/resources.hpp"
#include "nld/spectral.hpp"

namespace nld {

struct SolverOptions {
  /// Stop when the max-norm change falls below tol * max(1, |theta|_inf)
  /// and the residual below 10 * tol * residual_scale().
  double tol = 1e-10;
  int max_iter = 100000;
  EigenOptions eig;
};

/// Magnitude of the terms in d L[theta] + theta (m - theta), used to make the
/// residual test scale-free: max(1, |m|_inf * max(|m|_inf, d * max c)).
double residual_scale(const DiscreteOperator& op, const Resource& m, double d);

struct SteadyState {
  enum class Method { fixed_point, evolve };

  Field theta;
  double d = 0.0;
  double residual = 0.0;         // max |d L[theta] + theta (m - theta)|
  double scaled_residual = 0.0;  // residual / residual_scale
  int iterations = 0;
  double total_population = 0.0;
  /// Lower bound (Neumann: Rayleigh quotient of the constant field) or value
  /// (Dirichlet: power iteration) of mu0 certifying existence.
  double mu0_certificate = 0.0;
  Method method = Method::fixed_point;
};

std::string to_string(SteadyState::Method method);

/// max |d L[theta] + theta (m - theta)|.
double residual(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> theta);

/// Monotone scheme theta <- 1/2 [b + sqrt(b^2 + 4 d K theta)], b = m - d c,
/// started from the supersolution |m|_inf. Iterates are checked to be
/// componentwise nonincreasing. Throws InvalidArgument for d <= 0 and
/// SolverError when mu0 <= 0, on non-convergence, or on a monotonicity fault.
SteadyState solve_fixed_point(const DiscreteOperator& op, const Resource& m, double d, const SolverOptions& opts = {});

struct EvolveOptions {
  double dt = 0.0;
  double t_end = 0.0;
  /// Record a snapshot every this many steps (0: first and last only).
  int snapshot_every = 0;
};

struct Snapshot {
  double t = 0.0;
  Field u;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  double dt = 0.0;
  double final_residual = 0.0;
};

/// Largest admissible explicit Euler step, 1 / (d max c + |m|_inf).
double stable_step(const DiscreteOperator& op, const Resource& m, double d);

/// Explicit Euler for u_t = d L[u] + u (m - u). Throws InvalidArgument when
/// dt violates the stability bound or u0 has negative entries, and
/// SolverError if the state turns negative.
Trajectory evolve(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> u0,
                  const EvolveOptions& opts);

/// Runs explicit Euler (step `dt_fraction` of the stability bound) until
/// the residual drops below `tol` or t_max is reached. Throws SolverError in
/// the latter case.
SteadyState relax(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> u0, double tol,
                  double t_max, double dt_fraction = 0.5);

}  // namespace nld
