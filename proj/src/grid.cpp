#include "nld/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nld/error.hpp"

namespace nld {

Domain Domain::interval(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) {
    throw InvalidArgument("interval domain requires finite lo < hi");
  }
  Domain d;
  d.kind_ = Kind::interval;
  d.lo_ = {lo, 0.0};
  d.hi_ = {hi, 0.0};
  d.center_ = {0.5 * (lo + hi), 0.0};
  return d;
}

Domain Domain::rectangle(Point lo, Point hi) {
  for (int k = 0; k < 2; ++k) {
    if (!(std::isfinite(lo[k]) && std::isfinite(hi[k]) && lo[k] < hi[k])) {
      throw InvalidArgument("rectangle domain requires finite lo < hi componentwise");
    }
  }
  Domain d;
  d.kind_ = Kind::rectangle;
  d.lo_ = lo;
  d.hi_ = hi;
  d.center_ = {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])};
  return d;
}

Domain Domain::disk(Point center, double radius) {
  if (!(std::isfinite(center[0]) && std::isfinite(center[1]) && std::isfinite(radius) && radius > 0.0)) {
    throw InvalidArgument("disk domain requires a finite center and radius > 0");
  }
  Domain d;
  d.kind_ = Kind::disk;
  d.center_ = center;
  d.radius_ = radius;
  d.lo_ = {center[0] - radius, center[1] - radius};
  d.hi_ = {center[0] + radius, center[1] + radius};
  return d;
}

double Domain::measure() const {
  switch (kind_) {
    case Kind::interval:
      return hi_[0] - lo_[0];
    case Kind::rectangle:
      return (hi_[0] - lo_[0]) * (hi_[1] - lo_[1]);
    case Kind::disk:
      return std::numbers::pi * radius_ * radius_;
  }
  return 0.0;
}

Point Domain::centroid() const { return center_; }

bool Domain::contains(Point p) const {
  switch (kind_) {
    case Kind::interval:
      return p[0] > lo_[0] && p[0] < hi_[0];
    case Kind::rectangle:
      return p[0] > lo_[0] && p[0] < hi_[0] && p[1] > lo_[1] && p[1] < hi_[1];
    case Kind::disk: {
      const double dx = p[0] - center_[0];
      const double dy = p[1] - center_[1];
      return dx * dx + dy * dy < radius_ * radius_;
    }
  }
  return false;
}

double Grid::max_spacing() const { return dimension() == 1 ? hx_ : std::max(hx_, hy_); }

Grid build_grid(const Domain& domain, std::size_t cells_per_axis) {
  if (cells_per_axis < 2) {
    throw InvalidArgument("cells_per_axis must be at least 2, got " + std::to_string(cells_per_axis));
  }
  Grid g;
  g.domain_ = domain;
  const Point lo = domain.lo();
  const Point hi = domain.hi();
  g.nx_ = cells_per_axis;
  g.hx_ = (hi[0] - lo[0]) / static_cast<double>(cells_per_axis);
  if (domain.dimension() == 1) {
    g.ny_ = 1;
    g.hy_ = 1.0;
    g.cell_measure_ = g.hx_;
  } else {
    g.ny_ = cells_per_axis;
    g.hy_ = (hi[1] - lo[1]) / static_cast<double>(cells_per_axis);
    g.cell_measure_ = g.hx_ * g.hy_;
  }

  g.active_of_box_.assign(g.nx_ * g.ny_, -1);
  for (std::size_t iy = 0; iy < g.ny_; ++iy) {
    for (std::size_t ix = 0; ix < g.nx_; ++ix) {
      Point c{lo[0] + (static_cast<double>(ix) + 0.5) * g.hx_, 0.0};
      if (domain.dimension() == 2) c[1] = lo[1] + (static_cast<double>(iy) + 0.5) * g.hy_;
      if (!domain.contains(c)) continue;
      g.active_of_box_[iy * g.nx_ + ix] = static_cast<std::ptrdiff_t>(g.centers_.size());
      g.centers_.push_back(c);
      g.indices_.push_back({ix, iy});
    }
  }
  if (g.centers_.empty()) {
    throw InvalidArgument("grid has no active cells; refine the resolution");
  }
  return g;
}

double integrate(const Grid& grid, std::span<const double> field) {
  if (field.size() != grid.size()) {
    throw InvalidArgument("integrate: field has " + std::to_string(field.size()) + " samples, grid has " +
                          std::to_string(grid.size()) + " active cells");
  }
  double sum = 0.0;
  for (double v : field) sum += v;
  return sum * grid.cell_measure();
}

}  // namespace nld
