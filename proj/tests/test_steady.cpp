#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nld/error.hpp"
#include "nld/steady.hpp"

using namespace nld;
using Backend = DiscreteOperator::Backend;
using Boundary = DiscreteOperator::Boundary;

namespace {

// Root of t^3 + 7 t^2 + t - 1 on (0, 1) by bisection.
double cubic_root() {
  auto f = [](double t) { return t * t * t + 7.0 * t * t + t - 1.0; };
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

double max_gap(const Field& a, const Field& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
  return g;
}

}  // namespace

TEST_CASE("constant resource is its own steady state") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 32);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = make_resource(g, Field(32, 0.8));
  const SteadyState st = solve_fixed_point(op, m, 3.0);
  for (double v : st.theta) CHECK(v == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(st.iterations <= 1);
  CHECK(st.residual < 1e-15);
  CHECK(residual(op, m, 3.0, Field(32, 0.8)) < 1e-15);
}

TEST_CASE("two-cell steady state against the cubic oracle") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 2);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(1.0), Backend::dense);
  const Resource m = make_resource(g, Field{2.0, 0.0});
  const double t = cubic_root();
  const double th1 = (7.0 + t) / 4.0;
  const double th2 = th1 * (4.0 * th1 - 7.0);
  CHECK(th1 == doctest::Approx(1.8270).epsilon(1e-4));
  CHECK(th2 == doctest::Approx(0.5623).epsilon(1e-4));
  const SteadyState st = solve_fixed_point(op, m, 1.0);
  CHECK(st.theta[0] == doctest::Approx(th1).epsilon(1e-9));
  CHECK(st.theta[1] == doctest::Approx(th2).epsilon(1e-9));
  CHECK(st.total_population == doctest::Approx(0.5 * (th1 + th2)).epsilon(1e-9));
  CHECK(st.total_population > 1.0);
  CHECK(st.mu0_certificate > 0.0);
}

TEST_CASE("concentrated resource supports a larger population") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 400);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.05));
  BangBangSpec spec;
  spec.height = 20.0;
  spec.center = {0.5, 0.0};
  const Resource m = bang_bang(g, spec);
  const SteadyState st = solve_fixed_point(op, m, 10.0);
  CHECK(integrate(g, st.theta) > 1.0);
  CHECK(st.scaled_residual <= 10.0 * SolverOptions{}.tol);
  double sup = 0.0;
  for (double v : st.theta) sup = std::max(sup, v);
  CHECK(sup <= m.sup_norm + 1e-9);
}

TEST_CASE("residual ranks solutions") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = random_resource(g, 2);
  const SteadyState st = solve_fixed_point(op, m, 1.0);
  CHECK(st.residual <= 10.0 * SolverOptions{}.tol * residual_scale(op, m, 1.0));
  Field bumped = st.theta;
  for (double& v : bumped) v += 0.1;
  CHECK(residual(op, m, 1.0, bumped) > st.residual);
}

TEST_CASE("evolve from a steady state stays put") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = random_resource(g, 3);
  SolverOptions so;
  so.tol = 1e-14;
  const SteadyState st = solve_fixed_point(op, m, 1.0, so);
  EvolveOptions eo;
  eo.dt = 0.5 * stable_step(op, m, 1.0);
  eo.t_end = 20 * eo.dt;
  eo.snapshot_every = 1;
  const Trajectory tr = evolve(op, m, 1.0, st.theta, eo);
  for (std::size_t k = 1; k < tr.snapshots.size(); ++k) {
    CHECK(max_gap(tr.snapshots[k].u, tr.snapshots[k - 1].u) < 1e-12);
  }
}

TEST_CASE("evolve from the resource maximum decreases") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = random_resource(g, 4);
  EvolveOptions eo;
  eo.dt = 0.5 * stable_step(op, m, 1.0);
  eo.t_end = 2.0;
  eo.snapshot_every = 10;
  const Trajectory tr = evolve(op, m, 1.0, Field(64, m.sup_norm), eo);
  for (std::size_t k = 1; k < tr.snapshots.size(); ++k) {
    for (std::size_t i = 0; i < 64; ++i) CHECK(tr.snapshots[k].u[i] <= tr.snapshots[k - 1].u[i] + 1e-15);
  }
}

TEST_CASE("dynamics from a small start reach the fixed point") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = random_resource(g, 5);
  SolverOptions so;
  so.tol = 1e-12;
  const SteadyState fp = solve_fixed_point(op, m, 1.0, so);
  const SteadyState ev = relax(op, m, 1.0, Field(64, 1e-3), 1e-10, 1e4);
  CHECK(ev.method == SteadyState::Method::evolve);
  CHECK(max_gap(fp.theta, ev.theta) < 1e-6);
}

TEST_CASE("dirichlet steady state and extinction") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1), Boundary::dirichlet);
  const Resource m = random_resource(g, 6);
  const SteadyState st = solve_fixed_point(op, m, 0.1);
  CHECK(st.mu0_certificate > 0.0);
  CHECK(st.scaled_residual <= 1e-9);
  const Resource weak = make_resource(g, Field(64, 0.01));
  CHECK_THROWS_AS(solve_fixed_point(op, weak, 10.0), SolverError);
}

TEST_CASE("solver and evolve guards") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 32);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  const Resource m = random_resource(g, 7);
  CHECK_THROWS_AS(solve_fixed_point(op, m, 0.0), InvalidArgument);
  CHECK_THROWS_AS(solve_fixed_point(op, m, -1.0), InvalidArgument);
  EvolveOptions eo;
  eo.dt = 2.0 * stable_step(op, m, 1.0);
  eo.t_end = 1.0;
  CHECK_THROWS_AS(evolve(op, m, 1.0, Field(32, 1.0), eo), InvalidArgument);
  eo.dt = 0.5 * stable_step(op, m, 1.0);
  Field neg(32, 1.0);
  neg[3] = -0.1;
  CHECK_THROWS_AS(evolve(op, m, 1.0, neg, eo), InvalidArgument);
  CHECK_THROWS_AS(relax(op, m, 1.0, Field(32, 1e-3), 1e-14, 1e-3), SolverError);
  SolverOptions tiny;
  tiny.max_iter = 1;
  tiny.tol = 1e-15;
  CHECK_THROWS_AS(solve_fixed_point(op, m, 1.0, tiny), SolverError);
}

TEST_CASE("fixed point agrees across backends") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 500);
  const auto mf = DiscreteOperator::create(g, KernelSpec::tent(0.1), Backend::matrix_free);
  const Resource m = random_resource(g, 8);
  const SteadyState a = solve_fixed_point(mf, m, 2.0);
  const SteadyState b = solve_fixed_point(mf.with_backend(Backend::fft), m, 2.0);
  CHECK(max_gap(a.theta, b.theta) < 1e-8);
}
