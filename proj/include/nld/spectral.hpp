#pragma once

#include "nld/kernel.hpp"
#include "nld/resources.hpp"

namespace nld {

/// Principal value of psi -> d L[psi] + m psi: the supremum of its Rayleigh
/// quotient. A positive steady state exists iff mu0 > 0.
struct PrincipalValue {
  double mu0 = 0.0;
  Field eigenfield;   // unit discrete L2 norm, largest-magnitude entry positive
  int iterations = 0;
  double residual = 0.0;  // discrete L2 norm of (d L + m) psi - mu0 psi
  double shift = 0.0;
  bool converged = false;
};

struct EigenOptions {
  /// Relative Rayleigh-quotient increment; the eigen-residual must also fall
  /// below tol^(3/4) relative to mu0 + shift.
  double tol = 1e-12;
  int max_iter = 100000;
};

/// Shifted power iteration from psi = 1 with a perturbed first cell. The
/// shift makes the iterated map positive semidefinite (Gershgorin bound), so
/// the dominant eigenvalue of the shifted map is mu0 + shift. Throws
/// SolverError when the iteration does not settle within max_iter; the
/// message carries the last iterate's estimate.
PrincipalValue principal_value(const DiscreteOperator& op, const Resource& m, double d, const EigenOptions& opts = {});

/// Discrete Rayleigh quotient of psi for d L + m.
double rayleigh_quotient(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> psi);

struct EnergyValue {
  double value = 0.0;
  double dispersal = 0.0;  // integral of d L[v] v
  double resource = 0.0;   // integral of m v^2
  double cubic = 0.0;      // integral of v^3
};

/// E[v] = 1/2 (dispersal + resource) - 1/3 cubic. Nondecreasing along
/// solutions of u_t = d L[u] + u (m - u).
EnergyValue energy(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> v);

}  // namespace nld
