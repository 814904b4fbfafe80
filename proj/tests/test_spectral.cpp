#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "nld/error.hpp"
#include "nld/spectral.hpp"
#include "nld/steady.hpp"

using namespace nld;
using Backend = DiscreteOperator::Backend;
using Boundary = DiscreteOperator::Boundary;

namespace {

// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
double jacobi_max_eigenvalue(std::vector<double> A, std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += A[p * n + q] * A[p * n + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = A[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (A[q * n + q] - A[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = A[k * n + p];
          const double akq = A[k * n + q];
          A[k * n + p] = c * akp - s * akq;
          A[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = A[p * n + k];
          const double aqk = A[q * n + k];
          A[p * n + k] = c * apk - s * aqk;
          A[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  double best = A[0];
  for (std::size_t i = 1; i < n; ++i) best = std::max(best, A[i * n + i]);
  return best;
}

Resource two_cell_resource(const Grid& g) { return make_resource(g, Field{2.0, 0.0}); }

}  // namespace

TEST_CASE("principal value of a constant resource") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 32);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const PrincipalValue pv = principal_value(op, make_resource(g, Field(32, 0.7)), 2.0);
  CHECK(pv.mu0 == doctest::Approx(0.7).epsilon(1e-10));
  for (double v : pv.eigenfield) CHECK(v == doctest::Approx(pv.eigenfield[0]).epsilon(1e-5));
}

TEST_CASE("principal value of the two-cell instance") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 2);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(1.0), Backend::dense);
  const PrincipalValue pv = principal_value(op, two_cell_resource(g), 1.0);
  // Closed form for [[1.75, 0.25], [0.25, -0.25]].
  const double p = 1.75, q = -0.25, b = 0.25;
  const double exact = 0.5 * (p + q) + std::sqrt(0.25 * (p - q) * (p - q) + b * b);
  CHECK(exact == doctest::Approx(1.78078).epsilon(1e-5));
  CHECK(pv.mu0 == doctest::Approx(exact).epsilon(1e-10));
  CHECK(pv.converged);
  CHECK(pv.residual < 1e-5);
  CHECK(pv.eigenfield[0] > 0.0);
}

TEST_CASE("principal value matches a dense eigen solver") {
  const std::size_t n = 24;
  const Grid g = build_grid(Domain::interval(0.0, 1.0), n);
  for (auto bc : {Boundary::neumann, Boundary::dirichlet}) {
    const auto op = DiscreteOperator::create(g, KernelSpec::tent(0.3), Backend::dense, bc);
    const Resource m = random_resource(g, 3);
    const double d = 0.5;
    std::vector<double> A(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) A[i * n + j] = d * op.weight(i, j);
      A[i * n + i] += m.field[i] - d * op.retention()[i];
    }
    const double oracle = jacobi_max_eigenvalue(A, n);
    CHECK(principal_value(op, m, d).mu0 == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("principal value dominates the mean resource") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Resource m = random_resource(g, seed);
    for (double d : {0.1, 1.0, 10.0}) {
      const PrincipalValue pv = principal_value(op, m, d);
      CHECK(pv.mu0 >= 1.0 - 1e-12);
      CHECK(rayleigh_quotient(op, m, d, pv.eigenfield) == doctest::Approx(pv.mu0).epsilon(1e-9));
      CHECK(rayleigh_quotient(op, m, d, Field(64, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("dirichlet principal value lies below the neumann one") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = random_resource(g, 9);
  const double neu = principal_value(op, m, 1.0).mu0;
  const double dir = principal_value(op.with_boundary(Boundary::dirichlet), m, 1.0).mu0;
  CHECK(dir < neu);
}

TEST_CASE("principal value reports non-convergence") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  EigenOptions opts;
  opts.max_iter = 2;
  opts.tol = 1e-15;
  CHECK_THROWS_AS(principal_value(op, random_resource(g, 1), 1.0, opts), SolverError);
  CHECK_THROWS_AS(principal_value(op, random_resource(g, 1), 0.0), InvalidArgument);
}

TEST_CASE("energy values") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 2);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(1.0), Backend::dense);
  const Resource m = two_cell_resource(g);
  CHECK(energy(op, m, 1.0, Field{0.0, 0.0}).value == 0.0);
  const EnergyValue e = energy(op, m, 1.0, Field{1.0, 1.0});
  CHECK(e.value == doctest::Approx(1.0 / 6.0));
  CHECK(e.dispersal == doctest::Approx(0.0));
  CHECK(e.resource == doctest::Approx(1.0));
  CHECK(e.cubic == doctest::Approx(1.0));
}

TEST_CASE("energy is nondecreasing along trajectories") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 48);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = random_resource(g, 4);
  const double d = 1.0;
  EvolveOptions eo;
  eo.dt = 0.5 * stable_step(op, m, d);
  eo.t_end = 5.0;
  eo.snapshot_every = 5;
  for (const Field& u0 : {Field(48, m.sup_norm), Field(48, 1e-3)}) {
    const Trajectory tr = evolve(op, m, d, u0, eo);
    REQUIRE(tr.snapshots.size() > 3);
    for (std::size_t k = 1; k < tr.snapshots.size(); ++k) {
      const double e0 = energy(op, m, d, tr.snapshots[k - 1].u).value;
      const double e1 = energy(op, m, d, tr.snapshots[k].u).value;
      CHECK(e1 >= e0 - 1e-12);
    }
  }
}
