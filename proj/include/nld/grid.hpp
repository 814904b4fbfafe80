#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace nld {

using Field = std::vector<double>;
using Point = std::array<double, 2>;

/// Bounded habitat. One- and two-dimensional shapes only.
class Domain {
 public:
  enum class Kind { interval, rectangle, disk };

  static Domain interval(double lo, double hi);
  static Domain rectangle(Point lo, Point hi);
  static Domain disk(Point center, double radius);

  Kind kind() const { return kind_; }
  int dimension() const { return kind_ == Kind::interval ? 1 : 2; }

  /// Bounding box; for intervals only the first component is meaningful.
  Point lo() const { return lo_; }
  Point hi() const { return hi_; }
  Point center() const { return center_; }
  double radius() const { return radius_; }

  /// Lebesgue measure of the exact (unmasked) shape.
  double measure() const;
  Point centroid() const;
  bool contains(Point p) const;

 private:
  Domain() = default;

  Kind kind_ = Kind::interval;
  Point lo_{0.0, 0.0};
  Point hi_{1.0, 0.0};
  Point center_{0.0, 0.0};
  double radius_ = 0.0;
};

/// Uniform cell grid over the bounding box of a domain. Cells whose centers
/// fall outside the domain are inactive; fields live on active cells only,
/// in x-fastest order.
class Grid {
 public:
  const Domain& domain() const { return domain_; }
  int dimension() const { return domain_.dimension(); }

  /// Cells per axis of the bounding box (ny == 1 in 1D).
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  /// Cell side lengths per axis.
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double max_spacing() const;
  double cell_measure() const { return cell_measure_; }

  std::size_t size() const { return centers_.size(); }
  std::span<const Point> centers() const { return centers_; }
  /// Bounding-box coordinates (ix, iy) of an active cell.
  std::array<std::size_t, 2> cell_index(std::size_t active) const { return indices_[active]; }
  /// Active index of box cell (ix, iy), or -1 when masked.
  std::ptrdiff_t active_index(std::size_t ix, std::size_t iy) const { return active_of_box_[iy * nx_ + ix]; }

  /// True when every cell of the bounding box is active.
  bool is_full() const { return centers_.size() == nx_ * ny_; }
  /// Sum of active cell measures.
  double measure() const { return cell_measure_ * static_cast<double>(centers_.size()); }

 private:
  friend Grid build_grid(const Domain& domain, std::size_t cells_per_axis);

  Domain domain_ = Domain::interval(0.0, 1.0);
  std::size_t nx_ = 0;
  std::size_t ny_ = 1;
  double hx_ = 0.0;
  double hy_ = 1.0;
  double cell_measure_ = 0.0;
  std::vector<Point> centers_;
  std::vector<std::array<std::size_t, 2>> indices_;
  std::vector<std::ptrdiff_t> active_of_box_;
};

/// Uniform grid with `cells_per_axis` cells along every axis of the bounding
/// box. Throws InvalidArgument when cells_per_axis < 2 or no cell is active.
Grid build_grid(const Domain& domain, std::size_t cells_per_axis);

/// Midpoint rule: sum of field_i * cell_measure in index order.
double integrate(const Grid& grid, std::span<const double> field);

}  // namespace nld
