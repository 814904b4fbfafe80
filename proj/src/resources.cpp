#include "nld/resources.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

namespace {

constexpr double kM1Tolerance = 1e-12;

}  // namespace

Resource make_resource(const Grid& grid, Field field) {
  if (field.size() != grid.size()) {
    throw InvalidArgument("resource has " + std::to_string(field.size()) + " samples, grid has " +
                          std::to_string(grid.size()) + " active cells");
  }
  Resource r;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double v = field[i];
    if (!std::isfinite(v) || v < 0.0) {
      std::ostringstream os;
      os << "resource sample " << i << " is " << v << "; resources must be finite and nonnegative";
      throw InvalidArgument(os.str());
    }
    r.sup_norm = std::max(r.sup_norm, v);
    lo = std::min(lo, v);
  }
  r.total = integrate(grid, field);
  r.nonconstant = r.sup_norm - lo > 1e-14 * std::max(1.0, r.sup_norm);
  r.field = std::move(field);
  return r;
}

double unit_ball_volume(int dimension) {
  if (dimension == 1) return 2.0;
  if (dimension == 2) return std::numbers::pi;
  throw InvalidArgument("only dimensions 1 and 2 are supported");
}

double concentration_radius(double height, int dimension) {
  return std::pow(height * unit_ball_volume(dimension), -1.0 / dimension);
}

Point Placement::resolve(const Grid& grid, double support_measure) const {
  const Domain& dom = grid.domain();
  switch (mode) {
    case Mode::interior:
      return dom.centroid();
    case Mode::explicit_point:
      if (!dom.contains(x0)) throw InvalidArgument("placement point lies outside the domain");
      return x0;
    case Mode::boundary: {
      if (dom.dimension() == 1) return {dom.lo()[0] + 0.5 * support_measure, 0.0};
      const double r = std::sqrt(support_measure / std::numbers::pi);
      const Point c = dom.centroid();
      if (dom.kind() == Domain::Kind::disk) return {c[0] - dom.radius() + r, c[1]};
      return {dom.lo()[0] + r, c[1]};
    }
  }
  return dom.centroid();
}

Resource bang_bang(const Grid& grid, const BangBangSpec& spec, std::size_t min_cells) {
  if (!(spec.height > 0.0) || !std::isfinite(spec.height)) throw InvalidArgument("bang-bang height must be positive");
  if (!(spec.target_total > 0.0)) throw InvalidArgument("bang-bang target total must be positive");
  const Domain& dom = grid.domain();
  const double support = spec.target_total / spec.height;
  const Point x0 = spec.center;
  Field field(grid.size(), 0.0);
  std::vector<std::size_t> cells;

  auto too_small = [&](std::size_t count) {
    std::ostringstream os;
    os << "bang-bang support of measure " << support << " covers " << count << " cells; at least " << min_cells
       << " are required (under-resolved)";
    return InvalidArgument(os.str());
  };
  auto outside = [&]() {
    std::ostringstream os;
    os << "bang-bang support of measure " << support << " centered at (" << x0[0] << ", " << x0[1]
       << ") exceeds the domain";
    return InvalidArgument(os.str());
  };

  if (dom.dimension() == 1) {
    const double h = grid.hx();
    const auto n = static_cast<std::size_t>(std::llround(support / h));
    if (n < min_cells) throw too_small(n);
    const double half = 0.5 * support;
    const double tol = 0.5 * h;
    if (x0[0] - half < dom.lo()[0] - tol || x0[0] + half > dom.hi()[0] + tol || n > grid.nx()) throw outside();
    // Block of n cells whose midpoint is nearest x0.
    const double start = (x0[0] - dom.lo()[0]) / h - 0.5 * static_cast<double>(n);
    auto first = static_cast<std::ptrdiff_t>(std::llround(start));
    first = std::clamp<std::ptrdiff_t>(first, 0, static_cast<std::ptrdiff_t>(grid.nx() - n));
    for (std::size_t k = 0; k < n; ++k) cells.push_back(static_cast<std::size_t>(first) + k);
  } else if (spec.shape == BangBangSpec::Shape::ball) {
    const double r = concentration_radius(spec.height / spec.target_total, 2);
    const double tol = grid.max_spacing();
    bool fits = false;
    if (dom.kind() == Domain::Kind::disk) {
      fits = std::hypot(x0[0] - dom.center()[0], x0[1] - dom.center()[1]) + r <= dom.radius() + tol;
    } else {
      fits = x0[0] - r >= dom.lo()[0] - tol && x0[0] + r <= dom.hi()[0] + tol && x0[1] - r >= dom.lo()[1] - tol &&
             x0[1] + r <= dom.hi()[1] + tol;
    }
    if (!fits) throw outside();
    const auto centers = grid.centers();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::hypot(centers[i][0] - x0[0], centers[i][1] - x0[1]) < r) cells.push_back(i);
    }
    if (cells.size() < min_cells) throw too_small(cells.size());
  } else {
    const double side = std::sqrt(support);
    const auto nx = static_cast<std::size_t>(std::llround(side / grid.hx()));
    const auto ny = static_cast<std::size_t>(std::llround(side / grid.hy()));
    if (nx * ny < min_cells) throw too_small(nx * ny);
    if (nx > grid.nx() || ny > grid.ny()) throw outside();
    auto first_of = [](double offset, double h, std::size_t count, std::size_t limit) {
      auto f = static_cast<std::ptrdiff_t>(std::llround(offset / h - 0.5 * static_cast<double>(count)));
      return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(f, 0, static_cast<std::ptrdiff_t>(limit - count)));
    };
    const std::size_t fx = first_of(x0[0] - dom.lo()[0], grid.hx(), nx, grid.nx());
    const std::size_t fy = first_of(x0[1] - dom.lo()[1], grid.hy(), ny, grid.ny());
    for (std::size_t iy = fy; iy < fy + ny; ++iy) {
      for (std::size_t ix = fx; ix < fx + nx; ++ix) {
        const std::ptrdiff_t a = grid.active_index(ix, iy);
        if (a < 0) throw outside();
        cells.push_back(static_cast<std::size_t>(a));
      }
    }
  }

  const double value = spec.target_total / (static_cast<double>(cells.size()) * grid.cell_measure());
  for (std::size_t i : cells) field[i] = value;
  Resource r = make_resource(grid, std::move(field));
  r.support_cells = cells.size();
  return r;
}

Resource from_function(const Grid& grid, const std::function<double(Point)>& f, bool normalize) {
  Field field(grid.size());
  const auto centers = grid.centers();
  for (std::size_t i = 0; i < grid.size(); ++i) field[i] = f(centers[i]);
  Resource r = make_resource(grid, std::move(field));
  if (!(r.total > 0.0)) throw InvalidArgument("resource function integrates to zero");
  if (normalize) {
    const double s = 1.0 / r.total;
    for (double& v : r.field) v *= s;
    r = make_resource(grid, std::move(r.field));
  }
  return r;
}

Resource load_resource_csv(const Grid& grid, const std::string& path, bool normalize) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open resource file '" + path + "'");
  Field field(grid.size(), 0.0);
  std::vector<bool> seen(grid.size(), false);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    long long idx = 0;
    double v = 0.0;
    if (!(ls >> idx >> v)) {
      if (first) {
        first = false;
        continue;
      }
      throw InvalidArgument("malformed row in resource file '" + path + "': " + line);
    }
    first = false;
    if (idx < 0 || static_cast<std::size_t>(idx) >= grid.size()) {
      throw InvalidArgument("resource cell index " + std::to_string(idx) + " out of range");
    }
    if (seen[static_cast<std::size_t>(idx)]) throw InvalidArgument("resource cell " + std::to_string(idx) + " repeated");
    seen[static_cast<std::size_t>(idx)] = true;
    field[static_cast<std::size_t>(idx)] = v;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw InvalidArgument("resource file '" + path + "' does not assign every active cell");
  }
  Resource r = make_resource(grid, std::move(field));
  if (normalize) {
    if (!(r.total > 0.0)) throw InvalidArgument("resource file integrates to zero");
    const double s = 1.0 / r.total;
    for (double& v : r.field) v *= s;
    r = make_resource(grid, std::move(r.field));
  }
  return r;
}

Resource random_resource(const Grid& grid, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Field field(grid.size());
  for (double& v : field) v = dist(rng);
  Resource r = make_resource(grid, std::move(field));
  const double s = 1.0 / r.total;
  for (double& v : r.field) v *= s;
  return make_resource(grid, std::move(r.field));
}

M1Report validate_M1(const Resource& r) {
  M1Report rep;
  rep.deviation = std::abs(r.total - 1.0);
  rep.nonnegative = std::all_of(r.field.begin(), r.field.end(), [](double v) { return v >= 0.0; });
  rep.nonconstant = r.nonconstant;
  rep.passed = rep.deviation <= kM1Tolerance && rep.nonnegative && rep.nonconstant;
  return rep;
}

}  // namespace nld
