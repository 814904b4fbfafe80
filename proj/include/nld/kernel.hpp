#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nld/grid.hpp"

namespace nld {

/// Radially symmetric, translation-invariant dispersal kernel J(|x - y|).
struct KernelSpec {
  enum class Kind { uniform, tent, truncated_gaussian, ring, tabulated };

  Kind kind = Kind::uniform;
  double radius = 0.0;  // uniform, tent
  double sigma = 0.0;   // truncated_gaussian
  double cutoff = 0.0;  // truncated_gaussian, in units of sigma
  double delta = 0.0;   // ring: plateau value on |z| <= 1
  double slope = 0.0;   // ring: J = delta + slope (|z| - 1) on 1 < |z| <= 2
  /// tabulated: (radius, value) samples, first radius 0, linear in between,
  /// zero beyond the last sample. Values are used as given (no rescaling).
  std::vector<std::pair<double, double>> table;

  static KernelSpec uniform(double radius);
  static KernelSpec tent(double radius);
  static KernelSpec truncated_gaussian(double sigma, double cutoff);
  static KernelSpec ring(double delta, double slope);
  static KernelSpec tabulated(std::vector<std::pair<double, double>> samples);

  std::string name() const;
};

/// Reads a two-column CSV (radius, value); a non-numeric first line is
/// treated as a header.
KernelSpec load_tabulated_kernel(const std::string& path);

/// A KernelSpec normalized for a given dimension so that the integral of J
/// over R^n equals one.
class Kernel {
 public:
  /// Throws InvalidArgument when the spec is malformed, J(0) <= 0, or the
  /// mass deviates from one (ring and tabulated kernels carry their own
  /// normalization and are checked to 1e-6).
  Kernel(KernelSpec spec, int dimension);

  const KernelSpec& spec() const { return spec_; }
  int dimension() const { return dimension_; }

  /// J at distance r >= 0.
  double operator()(double r) const;
  /// Radius beyond which J vanishes.
  double support_radius() const;
  double support_diameter() const { return 2.0 * support_radius(); }
  /// sup of J (the L-infinity norm of the kernel).
  double sup() const;
  /// Integral of J along a line through the origin from 0 to t (t >= 0),
  /// i.e. half of the 1D cumulative mass.
  double line_integral(double t) const;
  /// Integral of J over R^n, computed from the closed form of the profile.
  double mass() const;

 private:
  double shape(double r) const;
  double shape_line_integral(double t) const;
  double shape_mass() const;

  KernelSpec spec_;
  int dimension_ = 1;
  double scale_ = 1.0;
};

/// The nonlocal dispersal operator on a grid:
///   L[u]_i = sum_j W_ij u_j - c_i u_i,
/// where W_ij is the mass of J(x_i - .) over cell j and c = a (Neumann) or
/// c = 1 (Dirichlet). W is exactly symmetric.
class DiscreteOperator {
 public:
  enum class Backend { dense, matrix_free, fft };
  enum class Boundary { neumann, dirichlet };

  /// Throws InvalidArgument when the kernel is under-resolved (support
  /// diameter < 4h), when the FFT backend is requested on a masked grid,
  /// or when the dense backend would exceed `dense_limit` cells.
  static DiscreteOperator create(const Grid& grid, const KernelSpec& kernel, Backend backend,
                                 Boundary boundary = Boundary::neumann);
  /// FFT on full grids above a few thousand cells, matrix-free otherwise.
  static DiscreteOperator create(const Grid& grid, const KernelSpec& kernel,
                                 Boundary boundary = Boundary::neumann);
  /// General symmetric k(x, y) supplied as a row-major matrix of cell
  /// weights W_ij (kernel value times cell measure). The dense backend is
  /// used and unit kernel mass is not verified; see
  /// normalization_verified().
  static DiscreteOperator from_weights(const Grid& grid, std::vector<double> weights,
                                       Boundary boundary = Boundary::neumann);

  static constexpr std::size_t dense_limit = 8192;

  /// Same grid and kernel, different backend.
  DiscreteOperator with_backend(Backend backend) const;
  DiscreteOperator with_boundary(Boundary boundary) const;

  const Grid& grid() const { return *grid_; }
  std::size_t size() const { return grid_->size(); }
  Backend backend() const { return backend_; }
  Boundary boundary() const { return boundary_; }
  bool normalization_verified() const { return normalization_verified_; }
  /// sup of the continuous kernel (for tabulated two-point weights, the
  /// largest W_ij divided by the cell measure).
  double kernel_sup() const { return kernel_sup_; }

  /// a_i = sum over active j of W_ij, in (0, 1].
  const Field& boundary_mass() const { return boundary_mass_; }
  /// The retention coefficient c: a in Neumann mode, 1 in Dirichlet mode.
  const Field& retention() const { return retention_; }

  /// sum_j W_ij u_j (the quadrature of the integral of k(x, y) u(y) dy).
  Field convolve(std::span<const double> u) const;
  /// L[u]. Throws InvalidArgument on a length mismatch.
  Field apply(std::span<const double> u) const;

  /// Largest entry-wise asymmetry |W_ij - W_ji| of the weights.
  double symmetry_defect() const;
  /// Weight between two active cells.
  double weight(std::size_t i, std::size_t j) const;

 private:
  struct Stencil;
  struct FftPlan;

  DiscreteOperator() = default;
  Field convolve_dense(std::span<const double> u) const;
  Field convolve_stencil(std::span<const double> u) const;
  Field convolve_fft(std::span<const double> u) const;
  void finish_setup();

  std::shared_ptr<const Grid> grid_;
  std::shared_ptr<const Stencil> stencil_;
  std::shared_ptr<const std::vector<double>> dense_;
  std::shared_ptr<const FftPlan> fft_;
  Backend backend_ = Backend::matrix_free;
  Boundary boundary_ = Boundary::neumann;
  bool normalization_verified_ = true;
  double kernel_sup_ = 0.0;
  Field boundary_mass_;
  Field retention_;
};

/// a(x) = integral over the domain of k(y, x) dy, per active cell.
Field boundary_mass(const Grid& grid, const KernelSpec& kernel);

/// L[u] = integral of k(x, y) u(y) dy - c(x) u(x).
inline Field apply_L(const DiscreteOperator& op, std::span<const double> u) { return op.apply(u); }

/// Magnitudes of the discrete identities every operator must satisfy.
struct SelfCheckReport {
  double symmetry = 0.0;           // max |W_ij - W_ji|
  double conservation = 0.0;       // max |integral of L[u]| / integral of |c u|  (Neumann only)
  double semidefiniteness = 0.0;   // max positive part of integral of L[u] u, relative to integral of c u^2
  double backend_gap = 0.0;        // max relative gap between available backends
  double dirichlet_constant = 0.0; // Dirichlet: max of L[1] - (a - 1) and positive part of L[1]
  std::size_t fields = 0;
  std::vector<std::string> backends_compared;

  double worst() const;
};

/// Runs the symmetry, conservation, semidefiniteness and backend-agreement
/// checks on `fields` random inputs drawn from a seeded generator.
SelfCheckReport operator_selfcheck(const DiscreteOperator& op, std::size_t fields = 10, std::uint64_t seed = 1);

std::string to_string(DiscreteOperator::Backend backend);
std::string to_string(DiscreteOperator::Boundary boundary);
DiscreteOperator::Backend parse_backend(const std::string& name);
DiscreteOperator::Boundary parse_boundary(const std::string& name);

}  // namespace nld
