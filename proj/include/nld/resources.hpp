#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "nld/grid.hpp"

namespace nld {

/// Nonnegative resource (intrinsic growth rate) m on the active cells.
struct Resource {
  Field field;
  double total = 0.0;     // integral of m
  double sup_norm = 0.0;  // max of m
  bool nonconstant = false;
  /// Number of cells carrying the concentrated plateau (bang-bang only).
  std::size_t support_cells = 0;
};

/// Wraps samples into a Resource, computing total, sup and constancy.
/// Throws InvalidArgument on negative or non-finite samples.
Resource make_resource(const Grid& grid, Field field);

/// Two-valued resource: `height` on a set of measure target_total / height
/// centered at `center`, zero elsewhere.
struct BangBangSpec {
  enum class Shape { ball, block };

  double height = 1.0;
  Point center{0.0, 0.0};
  Shape shape = Shape::ball;
  double target_total = 1.0;
};

/// Minimum number of cells across a concentrated support.
inline constexpr std::size_t kMinSupportCells = 8;

/// Snaps the support to whole cells (the cell block nearest the center, or the
/// cells whose centers lie in the ball) and rescales the plateau so the
/// discrete total equals target_total exactly. Throws InvalidArgument when
/// the support covers fewer than `min_cells` cells or does not fit in the
/// domain.
Resource bang_bang(const Grid& grid, const BangBangSpec& spec, std::size_t min_cells = kMinSupportCells);

/// Samples f at the cell centers; optionally rescales to total one.
Resource from_function(const Grid& grid, const std::function<double(Point)>& f, bool normalize);

/// Reads "cell index, value" rows; every active cell must be assigned once.
Resource load_resource_csv(const Grid& grid, const std::string& path, bool normalize);

/// Resource with i.i.d. uniform samples in [lo, hi], normalized to total one.
Resource random_resource(const Grid& grid, std::uint64_t seed, double lo = 0.1, double hi = 1.9);

struct M1Report {
  double deviation = 0.0;  // |total - 1|
  bool nonnegative = false;
  bool nonconstant = false;
  bool passed = false;
};

/// Membership in the class of nonnegative, nonconstant resources of total
/// one (to 1e-12).
M1Report validate_M1(const Resource& r);

/// Volume of the unit ball in dimension 1 or 2.
double unit_ball_volume(int dimension);

/// Radius of the ball of measure 1/height: (height * omega_n)^(-1/n).
double concentration_radius(double height, int dimension);

/// Where a concentrated support is placed.
struct Placement {
  enum class Mode { interior, boundary, explicit_point };

  Mode mode = Mode::interior;
  Point x0{0.0, 0.0};

  /// interior: domain centroid. boundary: support flush against the lower
  /// x boundary (1D) or the leftmost point of the domain on the centroid's
  /// horizontal line (2D). explicit_point: x0.
  Point resolve(const Grid& grid, double support_measure) const;
};

}  // namespace nld
