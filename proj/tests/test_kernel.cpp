#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "nld/error.hpp"
#include "nld/kernel.hpp"

using namespace nld;
using Backend = DiscreteOperator::Backend;
using Boundary = DiscreteOperator::Boundary;

namespace {

Field random_field(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(n);
  for (double& x : f) x = u(rng);
  return f;
}

double max_rel_gap(const Field& a, const Field& b) {
  double scale = 0.0, gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(a[i]));
    gap = std::max(gap, std::abs(a[i] - b[i]));
  }
  return gap / scale;
}

}  // namespace

TEST_CASE("kernels integrate to one") {
  for (int dim : {1, 2}) {
    CHECK(Kernel(KernelSpec::uniform(0.3), dim).mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(Kernel(KernelSpec::tent(0.3), dim).mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(Kernel(KernelSpec::truncated_gaussian(0.1, 3.0), dim).mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(Kernel(KernelSpec::ring(0.1, 0.6), 1).mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kernel profiles match closed forms") {
  const Kernel u1(KernelSpec::uniform(0.05), 1);
  CHECK(u1(0.0) == doctest::Approx(10.0));
  CHECK(u1(0.06) == 0.0);
  CHECK(u1.sup() == doctest::Approx(10.0));
  const Kernel u2(KernelSpec::uniform(0.5), 2);
  CHECK(u2(0.1) == doctest::Approx(1.0 / (std::numbers::pi * 0.25)));
  const Kernel t1(KernelSpec::tent(1.0), 1);
  CHECK(t1(0.0) == doctest::Approx(1.0));
  CHECK(t1(0.5) == doctest::Approx(0.5));
  const Kernel ring(KernelSpec::ring(0.1, 0.6), 1);
  CHECK(ring(0.5) == doctest::Approx(0.1));
  CHECK(ring(1.5) == doctest::Approx(0.4));
  CHECK(ring(2.5) == 0.0);
  CHECK(ring.support_radius() == doctest::Approx(2.0));
  CHECK(ring.sup() == doctest::Approx(0.7));
  // Line integral of the uniform kernel: half the mass at full radius.
  CHECK(u1.line_integral(0.05) == doctest::Approx(0.5));
  CHECK(u1.line_integral(0.025) == doctest::Approx(0.25));
}

TEST_CASE("malformed kernels are rejected") {
  CHECK_THROWS_AS(Kernel(KernelSpec::uniform(-1.0), 1), InvalidArgument);
  CHECK_THROWS_AS(Kernel(KernelSpec::ring(0.1, 0.7), 1), InvalidArgument);
  CHECK_THROWS_AS(Kernel(KernelSpec::tabulated({{0.0, 0.0}, {1.0, 1.0}}), 1), InvalidArgument);
  CHECK_THROWS_AS(Kernel(KernelSpec::tabulated({{0.1, 1.0}, {1.0, 0.0}}), 1), InvalidArgument);
}

TEST_CASE("tabulated kernel equivalent to a tent") {
  // Tent of radius 1 in 1D: J(r) = 1 - r has mass 1.
  const Kernel tab(KernelSpec::tabulated({{0.0, 1.0}, {1.0, 0.0}}), 1);
  const Kernel tent(KernelSpec::tent(1.0), 1);
  for (double r : {0.0, 0.2, 0.7, 1.0, 1.3}) CHECK(tab(r) == doctest::Approx(tent(r)));
  const Grid g = build_grid(Domain::interval(0.0, 2.0), 40);
  const auto a = boundary_mass(g, KernelSpec::tabulated({{0.0, 1.0}, {1.0, 0.0}}));
  const auto b = boundary_mass(g, KernelSpec::tent(1.0));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("tabulated kernel loads from csv") {
  const std::string path = "test_kernel_table.csv";
  {
    std::ofstream out(path);
    out << "radius,value\n0,1\n0.5,0.5\n1,0\n";
  }
  const KernelSpec spec = load_tabulated_kernel(path);
  REQUIRE(spec.table.size() == 3);
  CHECK(Kernel(spec, 1)(0.25) == doctest::Approx(0.75));
  CHECK_THROWS(load_tabulated_kernel("does_not_exist.csv"));
}

TEST_CASE("boundary mass of a wide uniform kernel is one half") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 16);
  const Field a = boundary_mass(g, KernelSpec::uniform(1.0));
  for (double v : a) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("boundary mass is one where the support lies inside the domain") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 200);
  const Field a = boundary_mass(g, KernelSpec::uniform(0.05));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.centers()[i][0];
    if (x > 0.05 && x < 0.95) CHECK(a[i] == doctest::Approx(1.0).epsilon(1e-13));
    // Exact boundary mass of the uniform kernel: fraction of [x - r, x + r] inside [0, 1].
    const double exact = (std::min(1.0, x + 0.05) - std::max(0.0, x - 0.05)) / 0.1;
    CHECK(a[i] == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("ring kernel boundary mass is quadratic in x") {
  const Grid g = build_grid(Domain::interval(-1.0, 1.0), 100);
  const Field a = boundary_mass(g, KernelSpec::ring(0.1, 0.6));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.centers()[i][0];
    CHECK(a[i] == doctest::Approx(0.2 + 0.3 * x * x).epsilon(1e-12));
  }
}

TEST_CASE("two-cell operator by hand") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 2);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(1.0), Backend::dense);
  const Field lu = op.apply(Field{1.0, 0.0});
  CHECK(lu[0] == doctest::Approx(-0.25));
  CHECK(lu[1] == doctest::Approx(0.25));
  CHECK(op.weight(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("operator annihilates constants and conserves mass") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  for (auto backend : {Backend::dense, Backend::matrix_free, Backend::fft}) {
    const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1), backend);
    const Field lc = op.apply(Field(64, 3.0));
    for (double v : lc) CHECK(std::abs(v) < 1e-13);
    const Field u = random_field(64, 7);
    CHECK(std::abs(integrate(g, op.apply(u))) < 1e-14);
  }
}

TEST_CASE("operator selfcheck passes on 1D and 2D grids") {
  const Grid g1 = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto r1 = operator_selfcheck(DiscreteOperator::create(g1, KernelSpec::uniform(0.1), Backend::dense));
  CHECK(r1.worst() < 1e-12);
  CHECK(r1.backends_compared.size() == 3);

  const Grid g2 = build_grid(Domain::rectangle({0.0, 0.0}, {1.0, 1.0}), 24);
  const auto r2 = operator_selfcheck(DiscreteOperator::create(g2, KernelSpec::truncated_gaussian(0.08, 2.5)));
  CHECK(r2.symmetry < 1e-14);
  CHECK(r2.conservation < 1e-12);
  CHECK(r2.semidefiniteness < 1e-12);
  CHECK(r2.backend_gap < 1e-10);

  const Grid gd = build_grid(Domain::disk({0.0, 0.0}, 1.0), 24);
  const auto rd = operator_selfcheck(DiscreteOperator::create(gd, KernelSpec::tent(0.3)));
  CHECK(rd.worst() < 1e-12);
}

TEST_CASE("backends agree on every kernel") {
  const Grid g = build_grid(Domain::interval(-1.0, 1.0), 300);
  const Field u = random_field(g.size(), 11);
  for (const auto& spec : {KernelSpec::uniform(0.05), KernelSpec::tent(0.2), KernelSpec::truncated_gaussian(0.05, 3.0),
                           KernelSpec::ring(0.1, 0.6)}) {
    const auto mf = DiscreteOperator::create(g, spec, Backend::matrix_free);
    const auto fft = mf.with_backend(Backend::fft);
    const auto dense = mf.with_backend(Backend::dense);
    CHECK(max_rel_gap(mf.apply(u), fft.apply(u)) < 1e-10);
    CHECK(max_rel_gap(mf.apply(u), dense.apply(u)) < 1e-12);
  }
}

TEST_CASE("2D backends agree and interior mass is one") {
  const Grid g = build_grid(Domain::rectangle({0.0, 0.0}, {1.0, 1.0}), 40);
  const auto mf = DiscreteOperator::create(g, KernelSpec::uniform(0.1), Backend::matrix_free);
  const auto fft = mf.with_backend(Backend::fft);
  const Field u = random_field(g.size(), 3);
  CHECK(max_rel_gap(mf.apply(u), fft.apply(u)) < 1e-10);
  const Field& a = mf.boundary_mass();
  const std::ptrdiff_t mid = g.active_index(20, 20);
  CHECK(a[static_cast<std::size_t>(mid)] == doctest::Approx(1.0).epsilon(1e-12));
  // Corner cell sees roughly a quarter of the kernel.
  CHECK(a[0] > 0.2);
  CHECK(a[0] < 0.4);
  for (double v : a) CHECK(v <= 1.0);
}

TEST_CASE("dirichlet operator on constants") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 64);
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1), Boundary::dirichlet);
  const Field l1 = op.apply(Field(64, 1.0));
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(l1[i] == doctest::Approx(op.boundary_mass()[i] - 1.0).epsilon(1e-14));
    CHECK(l1[i] <= 1e-15);
  }
  CHECK(operator_selfcheck(op).dirichlet_constant < 1e-13);
}

TEST_CASE("operator guards") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 10);
  CHECK_THROWS_AS(DiscreteOperator::create(g, KernelSpec::uniform(0.1)), InvalidArgument);
  const Grid disk = build_grid(Domain::disk({0.0, 0.0}, 1.0), 16);
  CHECK_THROWS_AS(DiscreteOperator::create(disk, KernelSpec::uniform(0.5), Backend::fft), InvalidArgument);
  const Grid big = build_grid(Domain::interval(0.0, 1.0), 10000);
  CHECK_THROWS_AS(DiscreteOperator::create(big, KernelSpec::uniform(0.1), Backend::dense), InvalidArgument);
  const auto op = DiscreteOperator::create(build_grid(Domain::interval(0.0, 1.0), 8), KernelSpec::uniform(0.5));
  CHECK_THROWS_AS(op.apply(Field(7, 0.0)), InvalidArgument);
}

TEST_CASE("auto backend selection") {
  const auto small = DiscreteOperator::create(build_grid(Domain::interval(0.0, 1.0), 100), KernelSpec::uniform(0.1));
  CHECK(small.backend() == Backend::matrix_free);
  const auto large = DiscreteOperator::create(build_grid(Domain::interval(0.0, 1.0), 4096), KernelSpec::uniform(0.1));
  CHECK(large.backend() == Backend::fft);
}

TEST_CASE("operator from explicit weights") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 3);
  const std::vector<double> w = {0.2, 0.1, 0.0, 0.1, 0.2, 0.1, 0.0, 0.1, 0.2};
  const auto op = DiscreteOperator::from_weights(g, w);
  CHECK_FALSE(op.normalization_verified());
  CHECK(op.boundary_mass()[1] == doctest::Approx(0.4));
  const Field lu = op.apply(Field{1.0, 2.0, 3.0});
  CHECK(lu[0] == doctest::Approx(0.2 + 0.2 - 0.3));
  std::vector<double> bad = w;
  bad[1] = 0.3;
  CHECK_THROWS_AS(DiscreteOperator::from_weights(g, bad), InvalidArgument);
}

TEST_CASE("backend and boundary names round trip") {
  for (auto b : {Backend::dense, Backend::matrix_free, Backend::fft}) CHECK(parse_backend(to_string(b)) == b);
  for (auto b : {Boundary::neumann, Boundary::dirichlet}) CHECK(parse_boundary(to_string(b)) == b);
  CHECK_THROWS(parse_backend("gpu"));
}
