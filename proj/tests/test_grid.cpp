#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nld/error.hpp"
#include "nld/grid.hpp"

using namespace nld;

TEST_CASE("interval grid has uniform cell centers") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 4);
  REQUIRE(g.size() == 4);
  const double expected[] = {0.125, 0.375, 0.625, 0.875};
  for (std::size_t i = 0; i < 4; ++i) CHECK(g.centers()[i][0] == doctest::Approx(expected[i]).epsilon(1e-15));
  CHECK(g.hx() == doctest::Approx(0.25));
  CHECK(g.cell_measure() == doctest::Approx(0.25));
  CHECK(g.measure() == doctest::Approx(1.0));
  CHECK(g.is_full());
  CHECK(g.dimension() == 1);
}

TEST_CASE("rectangle grid cells tile the box") {
  const Grid g = build_grid(Domain::rectangle({0.0, 0.0}, {1.0, 1.0}), 2);
  REQUIRE(g.size() == 4);
  CHECK(g.cell_measure() == doctest::Approx(0.25));
  CHECK(g.measure() == doctest::Approx(1.0));
  CHECK(g.cell_index(1)[0] == 1);
  CHECK(g.cell_index(2)[1] == 1);
  CHECK(g.active_index(1, 1) == 3);
}

TEST_CASE("disk grid masks cells outside the circle") {
  const std::size_t n = 64;
  const Grid g = build_grid(Domain::disk({0.0, 0.0}, 1.0), n);
  // Independent count of cell centers inside the unit circle.
  const double h = 2.0 / n;
  std::size_t inside = 0;
  for (std::size_t iy = 0; iy < n; ++iy) {
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double x = -1.0 + (ix + 0.5) * h;
      const double y = -1.0 + (iy + 0.5) * h;
      if (x * x + y * y < 1.0) ++inside;
    }
  }
  CHECK(g.size() == inside);
  CHECK_FALSE(g.is_full());
  CHECK(std::abs(g.measure() - std::numbers::pi) < 0.05 * std::numbers::pi);
  CHECK(g.active_index(0, 0) == -1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto [ix, iy] = g.cell_index(i);
    CHECK(g.active_index(ix, iy) == static_cast<std::ptrdiff_t>(i));
  }
}

TEST_CASE("domain measures and containment") {
  CHECK(Domain::interval(-1.0, 1.0).measure() == doctest::Approx(2.0));
  CHECK(Domain::rectangle({0.0, 0.0}, {2.0, 3.0}).measure() == doctest::Approx(6.0));
  CHECK(Domain::disk({0.0, 0.0}, 2.0).measure() == doctest::Approx(4.0 * std::numbers::pi));
  CHECK(Domain::interval(0.0, 1.0).contains({0.5, 0.0}));
  CHECK_FALSE(Domain::interval(0.0, 1.0).contains({1.5, 0.0}));
  CHECK(Domain::disk({1.0, 1.0}, 1.0).centroid()[0] == doctest::Approx(1.0));
}

TEST_CASE("invalid domains and grids are rejected") {
  CHECK_THROWS_AS(Domain::interval(1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(Domain::disk({0.0, 0.0}, -1.0), InvalidArgument);
  CHECK_THROWS_AS(Domain::rectangle({0.0, 0.0}, {0.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(build_grid(Domain::interval(0.0, 1.0), 1), InvalidArgument);
}

TEST_CASE("integrate uses the midpoint rule") {
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 4);
  CHECK(integrate(g, Field(4, 1.0)) == doctest::Approx(1.0));
  CHECK(integrate(g, Field(4, 0.0)) == 0.0);
  Field x(4);
  for (std::size_t i = 0; i < 4; ++i) x[i] = g.centers()[i][0];
  CHECK(integrate(g, x) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(integrate(g, Field(3, 1.0)), InvalidArgument);
}
