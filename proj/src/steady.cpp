#include "nld/steady.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

namespace {

constexpr double kPositivityFloor = 1e-300;

void check_problem(const DiscreteOperator& op, const Resource& m, double d) {
  if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("diffusion rate d must be positive");
  if (m.field.size() != op.size()) throw InvalidArgument("resource and operator grids differ");
}

double max_of(std::span<const double> v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, x);
  return r;
}

}  // namespace

std::string to_string(SteadyState::Method method) {
  return method == SteadyState::Method::fixed_point ? "fixed_point" : "evolve";
}

double residual_scale(const DiscreteOperator& op, const Resource& m, double d) {
  const double c = max_of(op.retention());
  return std::max(1.0, m.sup_norm * std::max(m.sup_norm, d * c));
}

double residual(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> theta) {
  check_problem(op, m, d);
  const Field lt = op.apply(theta);
  double r = 0.0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    r = std::max(r, std::abs(d * lt[i] + theta[i] * (m.field[i] - theta[i])));
  }
  return r;
}

namespace {

double existence_certificate(const DiscreteOperator& op, const Resource& m, double d, const EigenOptions& eig) {
  if (op.boundary() == DiscreteOperator::Boundary::neumann) {
    // L[1] = 0, so the constant test field gives mu0 >= mean of m.
    const double bound = m.total / op.grid().measure();
    if (bound > 0.0) return bound;
  }
  return principal_value(op, m, d, eig).mu0;
}

}  // namespace

SteadyState solve_fixed_point(const DiscreteOperator& op, const Resource& m, double d, const SolverOptions& opts) {
  check_problem(op, m, d);
  SteadyState st;
  st.d = d;
  st.method = SteadyState::Method::fixed_point;
  st.mu0_certificate = existence_certificate(op, m, d, opts.eig);
  if (!(st.mu0_certificate > 0.0)) {
    std::ostringstream os;
    os << "no positive steady state: mu0 = " << st.mu0_certificate << " <= 0";
    throw SolverError(os.str());
  }

  const std::size_t n = op.size();
  const Field& c = op.retention();
  Field b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = m.field[i] - d * c[i];
  const double scale = residual_scale(op, m, d);

  Field theta(n, m.sup_norm);
  Field next(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Field k = op.convolve(theta);
    const double top = max_of(theta);
    const double slack = 1e-11 * top;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = std::max(0.0, 4.0 * d * k[i]);
      const double s = std::sqrt(b[i] * b[i] + q);
      // For b < 0 the rationalized form avoids cancellation.
      double v = b[i] >= 0.0 ? 0.5 * (b[i] + s) : (s - b[i] > 0.0 ? q / (2.0 * (s - b[i])) : 0.0);
      v = std::max(v, kPositivityFloor);
      if (v > theta[i] * (1.0 + 1e-12) + slack) {
        std::ostringstream os;
        os << "monotone scheme increased at cell " << i << " (" << theta[i] << " -> " << v << ") in iteration "
           << it;
        throw SolverError(os.str());
      }
      change = std::max(change, std::abs(v - theta[i]));
      next[i] = v;
    }
    theta.swap(next);
    st.iterations = it;
    if (change <= opts.tol * std::max(1.0, top)) {
      st.residual = residual(op, m, d, theta);
      st.scaled_residual = st.residual / scale;
      if (st.residual <= 10.0 * opts.tol * scale) {
        st.total_population = integrate(op.grid(), theta);
        st.theta = std::move(theta);
        return st;
      }
    }
  }
  std::ostringstream os;
  os << "fixed-point iteration did not converge in " << opts.max_iter << " iterations (d = " << d << ")";
  throw SolverError(os.str());
}

double stable_step(const DiscreteOperator& op, const Resource& m, double d) {
  return 1.0 / (d * max_of(op.retention()) + m.sup_norm);
}

namespace {

// One explicit Euler step; returns false if any entry turned negative.
bool euler_step(const DiscreteOperator& op, const Resource& m, double d, double dt, Field& u) {
  const Field lu = op.apply(u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] += dt * (d * lu[i] + u[i] * (m.field[i] - u[i]));
    if (u[i] < 0.0) return false;
  }
  return true;
}

}  // namespace

Trajectory evolve(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> u0,
                  const EvolveOptions& opts) {
  check_problem(op, m, d);
  if (u0.size() != op.size()) throw InvalidArgument("initial state has the wrong length");
  if (!(opts.dt > 0.0) || !(opts.t_end > 0.0)) throw InvalidArgument("evolve requires dt > 0 and t_end > 0");
  const double bound = stable_step(op, m, d);
  if (!(opts.dt < bound)) {
    std::ostringstream os;
    os << "time step " << opts.dt << " violates the stability bound dt < " << bound;
    throw InvalidArgument(os.str());
  }
  if (std::any_of(u0.begin(), u0.end(), [](double v) { return !(v >= 0.0); })) {
    throw InvalidArgument("initial state must be nonnegative");
  }

  Trajectory tr;
  tr.dt = opts.dt;
  Field u(u0.begin(), u0.end());
  tr.snapshots.push_back({0.0, u});
  const auto steps = static_cast<long long>(std::ceil(opts.t_end / opts.dt - 1e-9));
  double t = 0.0;
  for (long long s = 1; s <= steps; ++s) {
    const double dt = std::min(opts.dt, opts.t_end - t);
    if (!euler_step(op, m, d, dt, u)) {
      throw SolverError("explicit Euler produced a negative state at t = " + std::to_string(t + dt));
    }
    t = s == steps ? opts.t_end : t + dt;
    const bool record = s == steps || (opts.snapshot_every > 0 && s % opts.snapshot_every == 0);
    if (record) tr.snapshots.push_back({t, u});
  }
  tr.final_residual = residual(op, m, d, u);
  return tr;
}

SteadyState relax(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> u0, double tol,
                  double t_max, double dt_fraction) {
  check_problem(op, m, d);
  if (u0.size() != op.size()) throw InvalidArgument("initial state has the wrong length");
  if (!(dt_fraction > 0.0 && dt_fraction < 1.0)) throw InvalidArgument("dt_fraction must lie in (0, 1)");
  const double dt = dt_fraction * stable_step(op, m, d);
  Field u(u0.begin(), u0.end());
  SteadyState st;
  st.d = d;
  st.method = SteadyState::Method::evolve;
  double t = 0.0;
  constexpr int kCheckEvery = 20;
  while (t < t_max) {
    for (int k = 0; k < kCheckEvery; ++k) {
      if (!euler_step(op, m, d, dt, u)) throw SolverError("explicit Euler produced a negative state");
      ++st.iterations;
    }
    t += kCheckEvery * dt;
    st.residual = residual(op, m, d, u);
    if (st.residual <= tol) {
      st.scaled_residual = st.residual / residual_scale(op, m, d);
      st.total_population = integrate(op.grid(), u);
      st.theta = std::move(u);
      return st;
    }
  }
  std::ostringstream os;
  os << "time integration did not reach residual " << tol << " by t = " << t_max << " (residual " << st.residual
     << ")";
  throw SolverError(os.str());
}

}  // namespace nld
