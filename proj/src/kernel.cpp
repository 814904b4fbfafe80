#include "nld/kernel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

// ---------------------------------------------------------------------------
// KernelSpec

KernelSpec KernelSpec::uniform(double radius) {
  KernelSpec s;
  s.kind = Kind::uniform;
  s.radius = radius;
  return s;
}

KernelSpec KernelSpec::tent(double radius) {
  KernelSpec s;
  s.kind = Kind::tent;
  s.radius = radius;
  return s;
}

KernelSpec KernelSpec::truncated_gaussian(double sigma, double cutoff) {
  KernelSpec s;
  s.kind = Kind::truncated_gaussian;
  s.sigma = sigma;
  s.cutoff = cutoff;
  return s;
}

KernelSpec KernelSpec::ring(double delta, double slope) {
  KernelSpec s;
  s.kind = Kind::ring;
  s.delta = delta;
  s.slope = slope;
  return s;
}

KernelSpec KernelSpec::tabulated(std::vector<std::pair<double, double>> samples) {
  KernelSpec s;
  s.kind = Kind::tabulated;
  s.table = std::move(samples);
  return s;
}

std::string KernelSpec::name() const {
  switch (kind) {
    case Kind::uniform:
      return "uniform";
    case Kind::tent:
      return "tent";
    case Kind::truncated_gaussian:
      return "truncated_gaussian";
    case Kind::ring:
      return "ring";
    case Kind::tabulated:
      return "tabulated";
  }
  return "unknown";
}

KernelSpec load_tabulated_kernel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open kernel table '" + path + "'");
  std::vector<std::pair<double, double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double r = 0.0;
    double v = 0.0;
    if (!(ls >> r >> v)) {
      if (first) {
        first = false;
        continue;
      }
      throw InvalidArgument("malformed row in kernel table '" + path + "': " + line);
    }
    first = false;
    rows.emplace_back(r, v);
  }
  return KernelSpec::tabulated(std::move(rows));
}

// ---------------------------------------------------------------------------
// Kernel

namespace {

constexpr double kMassTolerance = 1e-6;

double tabulated_value(const std::vector<std::pair<double, double>>& t, double r) {
  if (r > t.back().first) return 0.0;
  auto it = std::upper_bound(t.begin(), t.end(), r, [](double x, const auto& p) { return x < p.first; });
  if (it == t.begin()) return t.front().second;
  if (it == t.end()) return t.back().second;
  const auto& [r1, v1] = *it;
  const auto& [r0, v0] = *(it - 1);
  return v0 + (v1 - v0) * (r - r0) / (r1 - r0);
}

}  // namespace

Kernel::Kernel(KernelSpec spec, int dimension) : spec_(std::move(spec)), dimension_(dimension) {
  if (dimension != 1 && dimension != 2) throw InvalidArgument("kernel dimension must be 1 or 2");
  using Kind = KernelSpec::Kind;
  switch (spec_.kind) {
    case Kind::uniform:
    case Kind::tent:
      if (!(spec_.radius > 0.0 && std::isfinite(spec_.radius))) {
        throw InvalidArgument(spec_.name() + " kernel requires radius > 0");
      }
      break;
    case Kind::truncated_gaussian:
      if (!(spec_.sigma > 0.0 && spec_.cutoff > 0.0 && std::isfinite(spec_.sigma) && std::isfinite(spec_.cutoff))) {
        throw InvalidArgument("truncated_gaussian kernel requires sigma > 0 and cutoff > 0");
      }
      break;
    case Kind::ring:
      if (!(spec_.delta > 0.0 && spec_.slope >= 0.0)) {
        throw InvalidArgument("ring kernel requires delta > 0 and slope >= 0");
      }
      break;
    case Kind::tabulated: {
      const auto& t = spec_.table;
      if (t.size() < 2) throw InvalidArgument("tabulated kernel needs at least two samples");
      if (t.front().first != 0.0) throw InvalidArgument("tabulated kernel must start at radius 0");
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i].second >= 0.0) || !std::isfinite(t[i].second)) {
          throw InvalidArgument("tabulated kernel values must be finite and nonnegative");
        }
        if (i > 0 && !(t[i].first > t[i - 1].first)) {
          throw InvalidArgument("tabulated kernel radii must be strictly increasing");
        }
      }
      if (!(t.front().second > 0.0)) {
        throw InvalidArgument("tabulated kernel has J(0) = 0; positivity at the origin is required");
      }
      break;
    }
  }

  const double m = shape_mass();
  if (spec_.kind == Kind::ring || spec_.kind == Kind::tabulated) {
    if (std::abs(m - 1.0) > kMassTolerance) {
      std::ostringstream os;
      os << spec_.name() << " kernel integrates to " << m << " in dimension " << dimension
         << "; it must integrate to 1 within " << kMassTolerance;
      throw InvalidArgument(os.str());
    }
    scale_ = 1.0;
  } else {
    scale_ = 1.0 / m;
  }
}

double Kernel::shape(double r) const {
  using Kind = KernelSpec::Kind;
  switch (spec_.kind) {
    case Kind::uniform:
      return r <= spec_.radius ? 1.0 : 0.0;
    case Kind::tent:
      return r < spec_.radius ? 1.0 - r / spec_.radius : 0.0;
    case Kind::truncated_gaussian:
      return r <= spec_.cutoff * spec_.sigma ? std::exp(-r * r / (2.0 * spec_.sigma * spec_.sigma)) : 0.0;
    case Kind::ring:
      if (r <= 1.0) return spec_.delta;
      if (r <= 2.0) return spec_.delta + spec_.slope * (r - 1.0);
      return 0.0;
    case Kind::tabulated:
      return tabulated_value(spec_.table, r);
  }
  return 0.0;
}

double Kernel::shape_line_integral(double t) const {
  using Kind = KernelSpec::Kind;
  t = std::max(t, 0.0);
  switch (spec_.kind) {
    case Kind::uniform:
      return std::min(t, spec_.radius);
    case Kind::tent: {
      const double r = spec_.radius;
      const double s = std::min(t, r);
      return s - s * s / (2.0 * r);
    }
    case Kind::truncated_gaussian: {
      const double s = std::min(t, spec_.cutoff * spec_.sigma);
      return spec_.sigma * std::sqrt(std::numbers::pi / 2.0) * std::erf(s / (spec_.sigma * std::numbers::sqrt2));
    }
    case Kind::ring: {
      const double d = spec_.delta;
      if (t <= 1.0) return d * t;
      const double s = std::min(t, 2.0) - 1.0;
      return d + d * s + 0.5 * spec_.slope * s * s;
    }
    case Kind::tabulated: {
      const auto& tab = spec_.table;
      double acc = 0.0;
      for (std::size_t i = 1; i < tab.size(); ++i) {
        const auto [r0, v0] = tab[i - 1];
        const auto [r1, v1] = tab[i];
        if (t <= r0) break;
        const double e = std::min(t, r1);
        const double ve = v0 + (v1 - v0) * (e - r0) / (r1 - r0);
        acc += 0.5 * (v0 + ve) * (e - r0);
      }
      return acc;
    }
  }
  return 0.0;
}

double Kernel::shape_mass() const {
  using Kind = KernelSpec::Kind;
  const double pi = std::numbers::pi;
  if (dimension_ == 1) return 2.0 * shape_line_integral(std::numeric_limits<double>::infinity());
  switch (spec_.kind) {
    case Kind::uniform:
      return pi * spec_.radius * spec_.radius;
    case Kind::tent:
      return pi * spec_.radius * spec_.radius / 3.0;
    case Kind::truncated_gaussian: {
      const double c = spec_.cutoff;
      return 2.0 * pi * spec_.sigma * spec_.sigma * (1.0 - std::exp(-0.5 * c * c));
    }
    case Kind::ring:
      return 4.0 * pi * spec_.delta + 5.0 * pi * spec_.slope / 3.0;
    case Kind::tabulated: {
      // 2 pi * integral of r J(r); r J(r) is quadratic per segment, so Simpson is exact.
      const auto& tab = spec_.table;
      double acc = 0.0;
      for (std::size_t i = 1; i < tab.size(); ++i) {
        const auto [r0, v0] = tab[i - 1];
        const auto [r1, v1] = tab[i];
        const double rm = 0.5 * (r0 + r1);
        const double vm = 0.5 * (v0 + v1);
        acc += (r1 - r0) / 6.0 * (r0 * v0 + 4.0 * rm * vm + r1 * v1);
      }
      return 2.0 * pi * acc;
    }
  }
  return 0.0;
}

double Kernel::operator()(double r) const { return scale_ * shape(std::abs(r)); }

double Kernel::line_integral(double t) const { return scale_ * shape_line_integral(t); }

double Kernel::mass() const { return scale_ * shape_mass(); }

double Kernel::support_radius() const {
  using Kind = KernelSpec::Kind;
  switch (spec_.kind) {
    case Kind::uniform:
    case Kind::tent:
      return spec_.radius;
    case Kind::truncated_gaussian:
      return spec_.cutoff * spec_.sigma;
    case Kind::ring:
      return 2.0;
    case Kind::tabulated:
      return spec_.table.back().first;
  }
  return 0.0;
}

double Kernel::sup() const {
  using Kind = KernelSpec::Kind;
  switch (spec_.kind) {
    case Kind::ring:
      return std::max(spec_.delta, spec_.delta + spec_.slope);
    case Kind::tabulated: {
      double m = 0.0;
      for (const auto& [r, v] : spec_.table) m = std::max(m, v);
      return m;
    }
    default:
      return scale_ * shape(0.0);
  }
}

// ---------------------------------------------------------------------------
// Cell weights

struct DiscreteOperator::Stencil {
  std::ptrdiff_t rx = 0;
  std::ptrdiff_t ry = 0;
  std::vector<double> w;  // (2ry+1) x (2rx+1), x fastest

  std::size_t width() const { return static_cast<std::size_t>(2 * rx + 1); }
  double at(std::ptrdiff_t ox, std::ptrdiff_t oy) const {
    if (ox < -rx || ox > rx || oy < -ry || oy > ry) return 0.0;
    return w[static_cast<std::size_t>(oy + ry) * width() + static_cast<std::size_t>(ox + rx)];
  }
  double& ref(std::ptrdiff_t ox, std::ptrdiff_t oy) {
    return w[static_cast<std::size_t>(oy + ry) * width() + static_cast<std::size_t>(ox + rx)];
  }
};

namespace {

// Mass of J over the rectangle [cx - hx/2, cx + hx/2] x [cy - hy/2, cy + hy/2],
// by composite 3-point Gauss-Legendre on an s x s subdivision.
double cell_mass_2d(const Kernel& k, double cx, double cy, double hx, double hy, int s) {
  static constexpr double node[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr double wt[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const double sx = hx / s;
  const double sy = hy / s;
  double acc = 0.0;
  for (int a = 0; a < s; ++a) {
    const double x0 = cx - 0.5 * hx + (a + 0.5) * sx;
    for (int b = 0; b < s; ++b) {
      const double y0 = cy - 0.5 * hy + (b + 0.5) * sy;
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) {
          const double x = x0 + 0.5 * sx * node[p];
          const double y = y0 + 0.5 * sy * node[q];
          acc += wt[p] * wt[q] * k(std::hypot(x, y));
        }
      }
    }
  }
  return acc * 0.25 * sx * sy;
}

constexpr int kSubcells2d = 8;

}  // namespace

// ---------------------------------------------------------------------------
// FFT backend

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer make_real(std::size_t n) {
  auto* p = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  if (p == nullptr) throw std::bad_alloc();
  std::fill(p, p + n, 0.0);
  return RealBuffer(p);
}

ComplexBuffer make_complex(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (p == nullptr) throw std::bad_alloc();
  return ComplexBuffer(p);
}

// Smallest n' >= n whose prime factors are in {2, 3, 5, 7}.
std::size_t fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace

struct DiscreteOperator::FftPlan {
  std::size_t nx = 0;
  std::size_t ny = 1;
  std::size_t px = 0;
  std::size_t py = 1;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<std::complex<double>> kernel_hat;

  std::size_t real_size() const { return px * py; }
  std::size_t complex_size() const { return py * (px / 2 + 1); }

  FftPlan(const Grid& grid, const Stencil& st) : nx(grid.nx()), ny(grid.ny()) {
    px = fft_size(nx + 2 * static_cast<std::size_t>(st.rx) + 1);
    py = grid.dimension() == 1 ? 1 : fft_size(ny + 2 * static_cast<std::size_t>(st.ry) + 1);
    auto in = make_real(real_size());
    auto out = make_complex(complex_size());
    {
      std::lock_guard lock(planner_mutex());
      if (grid.dimension() == 1) {
        const int n[1] = {static_cast<int>(px)};
        forward = fftw_plan_dft_r2c(1, n, in.get(), out.get(), FFTW_ESTIMATE);
        backward = fftw_plan_dft_c2r(1, n, out.get(), in.get(), FFTW_ESTIMATE);
      } else {
        const int n[2] = {static_cast<int>(py), static_cast<int>(px)};
        forward = fftw_plan_dft_r2c(2, n, in.get(), out.get(), FFTW_ESTIMATE);
        backward = fftw_plan_dft_c2r(2, n, out.get(), in.get(), FFTW_ESTIMATE);
      }
    }
    if (forward == nullptr || backward == nullptr) throw SolverError("FFTW planning failed");

    std::fill(in.get(), in.get() + real_size(), 0.0);
    const auto spx = static_cast<std::ptrdiff_t>(px);
    const auto spy = static_cast<std::ptrdiff_t>(py);
    for (std::ptrdiff_t oy = -st.ry; oy <= st.ry; ++oy) {
      for (std::ptrdiff_t ox = -st.rx; ox <= st.rx; ++ox) {
        const auto ix = static_cast<std::size_t>((ox % spx + spx) % spx);
        const auto iy = static_cast<std::size_t>((oy % spy + spy) % spy);
        in[iy * px + ix] = st.at(ox, oy);
      }
    }
    fftw_execute_dft_r2c(forward, in.get(), out.get());
    kernel_hat.resize(complex_size());
    const double inv = 1.0 / static_cast<double>(real_size());
    for (std::size_t k = 0; k < complex_size(); ++k) {
      kernel_hat[k] = std::complex<double>(out[k][0], out[k][1]) * inv;
    }
  }

  ~FftPlan() {
    std::lock_guard lock(planner_mutex());
    if (forward != nullptr) fftw_destroy_plan(forward);
    if (backward != nullptr) fftw_destroy_plan(backward);
  }

  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
};

// ---------------------------------------------------------------------------
// DiscreteOperator

namespace {

constexpr double kOvershootTolerance = 1e-6;
constexpr std::size_t kFftThreshold = 2048;

}  // namespace

DiscreteOperator DiscreteOperator::create(const Grid& grid, const KernelSpec& spec, Boundary boundary) {
  const Backend b = grid.is_full() && grid.size() >= kFftThreshold ? Backend::fft : Backend::matrix_free;
  return create(grid, spec, b, boundary);
}

DiscreteOperator DiscreteOperator::create(const Grid& grid, const KernelSpec& spec, Backend backend,
                                          Boundary boundary) {
  const Kernel kernel(spec, grid.dimension());
  const double h = grid.max_spacing();
  if (kernel.support_diameter() < 4.0 * h) {
    std::ostringstream os;
    os << "kernel support diameter " << kernel.support_diameter() << " is below 4h = " << 4.0 * h
       << "; refine the grid";
    throw InvalidArgument(os.str());
  }
  if (backend == Backend::fft && !grid.is_full()) {
    throw InvalidArgument("the FFT backend requires an unmasked grid");
  }
  if (backend == Backend::dense && grid.size() > dense_limit) {
    throw InvalidArgument("dense backend limited to " + std::to_string(dense_limit) + " cells");
  }

  auto st = std::make_shared<Stencil>();
  const double R = kernel.support_radius();
  st->rx = static_cast<std::ptrdiff_t>(std::ceil(R / grid.hx() + 0.5));
  st->rx = std::min<std::ptrdiff_t>(st->rx, static_cast<std::ptrdiff_t>(grid.nx()));
  if (grid.dimension() == 1) {
    st->ry = 0;
    st->w.assign(st->width(), 0.0);
    const double hx = grid.hx();
    // Odd cumulative mass F(x) = sign(x) * line_integral(|x|).
    auto F = [&](double x) { return x < 0.0 ? -kernel.line_integral(-x) : kernel.line_integral(x); };
    for (std::ptrdiff_t k = 0; k <= st->rx; ++k) {
      const double c = static_cast<double>(k) * hx;
      const double v = k == 0 ? 2.0 * kernel.line_integral(0.5 * hx) : F(c + 0.5 * hx) - F(c - 0.5 * hx);
      st->ref(k, 0) = v;
      st->ref(-k, 0) = v;
    }
  } else {
    st->ry = static_cast<std::ptrdiff_t>(std::ceil(R / grid.hy() + 0.5));
    st->ry = std::min<std::ptrdiff_t>(st->ry, static_cast<std::ptrdiff_t>(grid.ny()));
    st->w.assign(st->width() * static_cast<std::size_t>(2 * st->ry + 1), 0.0);
    const double hx = grid.hx();
    const double hy = grid.hy();
    double total = 0.0;
    for (std::ptrdiff_t j = 0; j <= st->ry; ++j) {
      for (std::ptrdiff_t i = 0; i <= st->rx; ++i) {
        const double cx = static_cast<double>(i) * hx;
        const double cy = static_cast<double>(j) * hy;
        const double nearest = std::hypot(std::max(0.0, cx - 0.5 * hx), std::max(0.0, cy - 0.5 * hy));
        const double v = nearest > R ? 0.0 : cell_mass_2d(kernel, cx, cy, hx, hy, kSubcells2d);
        st->ref(i, j) = v;
        st->ref(-i, j) = v;
        st->ref(i, -j) = v;
        st->ref(-i, -j) = v;
      }
    }
    for (double v : st->w) total += v;
    // Quadrature of the cell masses is inexact for discontinuous profiles;
    // rescale so the full-space discrete mass is one.
    const double full = kernel.mass();
    if (total > 0.0) {
      for (double& v : st->w) v *= full / total;
    }
  }

  DiscreteOperator op;
  op.grid_ = std::make_shared<const Grid>(grid);
  op.stencil_ = st;
  op.backend_ = backend;
  op.boundary_ = boundary;
  op.kernel_sup_ = kernel.sup();

  // a_i: summed-area table over the stencil on full grids, direct sums otherwise.
  Field a(grid.size(), 0.0);
  if (grid.is_full()) {
    const std::size_t wx = st->width();
    const std::size_t wy = static_cast<std::size_t>(2 * st->ry + 1);
    std::vector<double> sat((wx + 1) * (wy + 1), 0.0);
    for (std::size_t y = 0; y < wy; ++y) {
      for (std::size_t x = 0; x < wx; ++x) {
        sat[(y + 1) * (wx + 1) + x + 1] = st->w[y * wx + x] + sat[y * (wx + 1) + x + 1] +
                                          sat[(y + 1) * (wx + 1) + x] - sat[y * (wx + 1) + x];
      }
    }
    auto rect = [&](std::ptrdiff_t x0, std::ptrdiff_t x1, std::ptrdiff_t y0, std::ptrdiff_t y1) {
      // inclusive offset ranges, clipped to the stencil
      x0 = std::max(x0, -st->rx) + st->rx;
      x1 = std::min(x1, st->rx) + st->rx;
      y0 = std::max(y0, -st->ry) + st->ry;
      y1 = std::min(y1, st->ry) + st->ry;
      if (x0 > x1 || y0 > y1) return 0.0;
      auto S = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
        return sat[static_cast<std::size_t>(y) * (wx + 1) + static_cast<std::size_t>(x)];
      };
      return S(x1 + 1, y1 + 1) - S(x0, y1 + 1) - S(x1 + 1, y0) + S(x0, y0);
    };
    const auto nx = static_cast<std::ptrdiff_t>(grid.nx());
    const auto ny = static_cast<std::ptrdiff_t>(grid.ny());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto [ix, iy] = grid.cell_index(i);
      const auto sx = static_cast<std::ptrdiff_t>(ix);
      const auto sy = static_cast<std::ptrdiff_t>(iy);
      a[i] = rect(-sx, nx - 1 - sx, -sy, ny - 1 - sy);
    }
  } else {
    Field ones(grid.size(), 1.0);
    a = op.convolve_stencil(ones);
  }
  for (double& v : a) {
    if (v > 1.0 + kOvershootTolerance) {
      std::ostringstream os;
      os << "boundary mass " << v << " exceeds 1 beyond tolerance; kernel under-resolved by the grid";
      throw InvalidArgument(os.str());
    }
    v = std::min(v, 1.0);
  }
  op.boundary_mass_ = std::move(a);

  if (backend == Backend::dense) {
    const std::size_t n = grid.size();
    auto dense = std::make_shared<std::vector<double>>(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) (*dense)[i * n + j] = op.weight(i, j);
    }
    op.dense_ = dense;
  } else if (backend == Backend::fft) {
    op.fft_ = std::make_shared<const FftPlan>(grid, *st);
  }
  op.finish_setup();
  return op;
}

DiscreteOperator DiscreteOperator::from_weights(const Grid& grid, std::vector<double> weights, Boundary boundary) {
  const std::size_t n = grid.size();
  if (weights.size() != n * n) throw InvalidArgument("weight matrix must be N x N for N active cells");
  if (n > dense_limit) throw InvalidArgument("two-point weights limited to " + std::to_string(dense_limit) + " cells");
  double wmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i * n + i] > 0.0)) throw InvalidArgument("two-point kernel must be positive on the diagonal");
    for (std::size_t j = 0; j < n; ++j) {
      const double w = weights[i * n + j];
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("two-point weights must be finite and nonnegative");
      if (w != weights[j * n + i]) throw InvalidArgument("two-point weights must be exactly symmetric");
      wmax = std::max(wmax, w);
    }
  }
  DiscreteOperator op;
  op.grid_ = std::make_shared<const Grid>(grid);
  op.dense_ = std::make_shared<const std::vector<double>>(std::move(weights));
  op.backend_ = Backend::dense;
  op.boundary_ = boundary;
  op.normalization_verified_ = false;
  op.kernel_sup_ = wmax / grid.cell_measure();
  Field ones(n, 1.0);
  Field a = op.convolve_dense(ones);
  for (double& v : a) {
    if (v > 1.0 + kOvershootTolerance) throw InvalidArgument("two-point weights give boundary mass above 1");
    v = std::min(v, 1.0);
  }
  op.boundary_mass_ = std::move(a);
  op.finish_setup();
  return op;
}

void DiscreteOperator::finish_setup() {
  retention_ = boundary_ == Boundary::neumann ? boundary_mass_ : Field(boundary_mass_.size(), 1.0);
}

DiscreteOperator DiscreteOperator::with_backend(Backend backend) const {
  if (backend == backend_) return *this;
  if (!stencil_) throw InvalidArgument("two-point weight operators only support the dense backend");
  if (backend == Backend::fft && !grid_->is_full()) throw InvalidArgument("the FFT backend requires an unmasked grid");
  if (backend == Backend::dense && size() > dense_limit) {
    throw InvalidArgument("dense backend limited to " + std::to_string(dense_limit) + " cells");
  }
  DiscreteOperator op = *this;
  op.backend_ = backend;
  op.dense_.reset();
  op.fft_.reset();
  if (backend == Backend::dense) {
    const std::size_t n = size();
    auto dense = std::make_shared<std::vector<double>>(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) (*dense)[i * n + j] = weight(i, j);
    }
    op.dense_ = dense;
  } else if (backend == Backend::fft) {
    op.fft_ = std::make_shared<const FftPlan>(*grid_, *stencil_);
  }
  return op;
}

DiscreteOperator DiscreteOperator::with_boundary(Boundary boundary) const {
  DiscreteOperator op = *this;
  op.boundary_ = boundary;
  op.finish_setup();
  return op;
}

double DiscreteOperator::weight(std::size_t i, std::size_t j) const {
  if (!stencil_) return (*dense_)[i * size() + j];
  const auto [ix, iy] = grid_->cell_index(i);
  const auto [jx, jy] = grid_->cell_index(j);
  return stencil_->at(static_cast<std::ptrdiff_t>(jx) - static_cast<std::ptrdiff_t>(ix),
                      static_cast<std::ptrdiff_t>(jy) - static_cast<std::ptrdiff_t>(iy));
}

double DiscreteOperator::symmetry_defect() const {
  double worst = 0.0;
  if (stencil_) {
    for (std::ptrdiff_t oy = -stencil_->ry; oy <= stencil_->ry; ++oy) {
      for (std::ptrdiff_t ox = -stencil_->rx; ox <= stencil_->rx; ++ox) {
        worst = std::max(worst, std::abs(stencil_->at(ox, oy) - stencil_->at(-ox, -oy)));
      }
    }
    if (!dense_) return worst;
  }
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      worst = std::max(worst, std::abs((*dense_)[i * n + j] - (*dense_)[j * n + i]));
    }
  }
  return worst;
}

Field DiscreteOperator::convolve(std::span<const double> u) const {
  if (u.size() != size()) {
    throw InvalidArgument("operator applied to a field of length " + std::to_string(u.size()) + ", expected " +
                          std::to_string(size()));
  }
  switch (backend_) {
    case Backend::dense:
      return convolve_dense(u);
    case Backend::matrix_free:
      return convolve_stencil(u);
    case Backend::fft:
      return convolve_fft(u);
  }
  return {};
}

Field DiscreteOperator::apply(std::span<const double> u) const {
  Field out = convolve(u);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= retention_[i] * u[i];
  return out;
}

Field DiscreteOperator::convolve_dense(std::span<const double> u) const {
  const std::size_t n = size();
  Field out(n, 0.0);
  const double* w = dense_->data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* row = w + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * u[j];
    out[i] = acc;
  }
  return out;
}

Field DiscreteOperator::convolve_stencil(std::span<const double> u) const {
  const Grid& g = *grid_;
  const Stencil& st = *stencil_;
  Field out(g.size(), 0.0);
  const auto nx = static_cast<std::ptrdiff_t>(g.nx());
  const auto ny = static_cast<std::ptrdiff_t>(g.ny());
  if (g.dimension() == 1) {
    for (std::ptrdiff_t i = 0; i < nx; ++i) {
      const std::ptrdiff_t lo = std::max(-st.rx, -i);
      const std::ptrdiff_t hi = std::min(st.rx, nx - 1 - i);
      double acc = 0.0;
      for (std::ptrdiff_t k = lo; k <= hi; ++k) acc += st.w[static_cast<std::size_t>(k + st.rx)] * u[static_cast<std::size_t>(i + k)];
      out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto [ix, iy] = g.cell_index(i);
    const auto sx = static_cast<std::ptrdiff_t>(ix);
    const auto sy = static_cast<std::ptrdiff_t>(iy);
    double acc = 0.0;
    for (std::ptrdiff_t oy = std::max(-st.ry, -sy); oy <= std::min(st.ry, ny - 1 - sy); ++oy) {
      for (std::ptrdiff_t ox = std::max(-st.rx, -sx); ox <= std::min(st.rx, nx - 1 - sx); ++ox) {
        const std::ptrdiff_t j = g.active_index(static_cast<std::size_t>(sx + ox), static_cast<std::size_t>(sy + oy));
        if (j < 0) continue;
        acc += st.at(ox, oy) * u[static_cast<std::size_t>(j)];
      }
    }
    out[i] = acc;
  }
  return out;
}

Field DiscreteOperator::convolve_fft(std::span<const double> u) const {
  const FftPlan& p = *fft_;
  auto in = make_real(p.real_size());
  auto spec = make_complex(p.complex_size());
  for (std::size_t iy = 0; iy < p.ny; ++iy) {
    for (std::size_t ix = 0; ix < p.nx; ++ix) in[iy * p.px + ix] = u[iy * p.nx + ix];
  }
  fftw_execute_dft_r2c(p.forward, in.get(), spec.get());
  for (std::size_t k = 0; k < p.complex_size(); ++k) {
    const std::complex<double> z = std::complex<double>(spec[k][0], spec[k][1]) * p.kernel_hat[k];
    spec[k][0] = z.real();
    spec[k][1] = z.imag();
  }
  fftw_execute_dft_c2r(p.backward, spec.get(), in.get());
  Field out(size(), 0.0);
  for (std::size_t iy = 0; iy < p.ny; ++iy) {
    for (std::size_t ix = 0; ix < p.nx; ++ix) out[iy * p.nx + ix] = in[iy * p.px + ix];
  }
  return out;
}

Field boundary_mass(const Grid& grid, const KernelSpec& kernel) {
  return DiscreteOperator::create(grid, kernel, DiscreteOperator::Backend::matrix_free).boundary_mass();
}

// ---------------------------------------------------------------------------
// Self-check

double SelfCheckReport::worst() const {
  return std::max({symmetry, conservation, semidefiniteness, backend_gap, dirichlet_constant});
}

SelfCheckReport operator_selfcheck(const DiscreteOperator& op, std::size_t fields, std::uint64_t seed) {
  SelfCheckReport rep;
  rep.fields = fields;
  rep.symmetry = op.symmetry_defect();
  const std::size_t n = op.size();
  const Field& c = op.retention();

  std::vector<DiscreteOperator> variants;
  variants.push_back(op);
  rep.backends_compared.push_back(to_string(op.backend()));
  if (op.normalization_verified()) {
    for (auto b : {DiscreteOperator::Backend::dense, DiscreteOperator::Backend::matrix_free,
                   DiscreteOperator::Backend::fft}) {
      if (b == op.backend()) continue;
      if (b == DiscreteOperator::Backend::dense && n > DiscreteOperator::dense_limit) continue;
      if (b == DiscreteOperator::Backend::fft && !op.grid().is_full()) continue;
      variants.push_back(op.with_backend(b));
      rep.backends_compared.push_back(to_string(b));
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Field u(n);
  for (std::size_t f = 0; f < fields; ++f) {
    for (double& v : u) v = dist(rng);
    const Field lu = op.apply(u);
    double sum = 0.0;
    double scale = 0.0;
    double quad = 0.0;
    double quad_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += lu[i];
      scale += std::abs(c[i] * u[i]);
      quad += lu[i] * u[i];
      quad_scale += c[i] * u[i] * u[i];
    }
    if (op.boundary() == DiscreteOperator::Boundary::neumann && scale > 0.0) {
      rep.conservation = std::max(rep.conservation, std::abs(sum) / scale);
    }
    if (quad_scale > 0.0) rep.semidefiniteness = std::max(rep.semidefiniteness, std::max(0.0, quad) / quad_scale);

    const Field ref = op.convolve(u);
    double ref_max = 0.0;
    for (double v : ref) ref_max = std::max(ref_max, std::abs(v));
    for (std::size_t b = 1; b < variants.size(); ++b) {
      const Field other = variants[b].convolve(u);
      double gap = 0.0;
      for (std::size_t i = 0; i < n; ++i) gap = std::max(gap, std::abs(other[i] - ref[i]));
      if (ref_max > 0.0) rep.backend_gap = std::max(rep.backend_gap, gap / ref_max);
    }
  }

  if (op.boundary() == DiscreteOperator::Boundary::dirichlet) {
    const Field ones(n, 1.0);
    const Field l1 = op.apply(ones);
    const Field& a = op.boundary_mass();
    for (std::size_t i = 0; i < n; ++i) {
      rep.dirichlet_constant = std::max(rep.dirichlet_constant, std::abs(l1[i] - (a[i] - 1.0)));
      rep.dirichlet_constant = std::max(rep.dirichlet_constant, l1[i]);
    }
  }
  return rep;
}

std::string to_string(DiscreteOperator::Backend backend) {
  switch (backend) {
    case DiscreteOperator::Backend::dense:
      return "dense";
    case DiscreteOperator::Backend::matrix_free:
      return "matrix_free";
    case DiscreteOperator::Backend::fft:
      return "fft";
  }
  return "unknown";
}

std::string to_string(DiscreteOperator::Boundary boundary) {
  return boundary == DiscreteOperator::Boundary::neumann ? "neumann" : "dirichlet";
}

DiscreteOperator::Backend parse_backend(const std::string& name) {
  if (name == "dense") return DiscreteOperator::Backend::dense;
  if (name == "matrix_free") return DiscreteOperator::Backend::matrix_free;
  if (name == "fft") return DiscreteOperator::Backend::fft;
  throw InvalidArgument("unknown backend '" + name + "'");
}

DiscreteOperator::Boundary parse_boundary(const std::string& name) {
  if (name == "neumann") return DiscreteOperator::Boundary::neumann;
  if (name == "dirichlet") return DiscreteOperator::Boundary::dirichlet;
  throw InvalidArgument("unknown boundary condition '" + name + "'");
}

}  // namespace nld
