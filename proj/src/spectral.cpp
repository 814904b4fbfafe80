#include "nld/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

namespace {

void check_problem(const DiscreteOperator& op, const Resource& m, double d) {
  if (!(d > 0.0) || !std::isfinite(d)) throw InvalidArgument("diffusion rate d must be positive");
  if (m.field.size() != op.size()) throw InvalidArgument("resource and operator grids differ");
}

double dot(std::span<const double> u, std::span<const double> v, double h) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s * h;
}

// (d L + m + shift) psi
Field shifted_apply(const DiscreteOperator& op, const Resource& m, double d, double shift,
                    std::span<const double> psi) {
  Field y = op.apply(psi);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = d * y[i] + (m.field[i] + shift) * psi[i];
  return y;
}

}  // namespace

PrincipalValue principal_value(const DiscreteOperator& op, const Resource& m, double d, const EigenOptions& opts) {
  check_problem(op, m, d);
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw InvalidArgument("eigen options need tol > 0 and max_iter >= 1");
  const std::size_t n = op.size();
  const double h = op.grid().cell_measure();
  const Field& a = op.boundary_mass();
  const Field& c = op.retention();

  PrincipalValue pv;
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) shift = std::max(shift, d * (c[i] + a[i]) - m.field[i]);
  pv.shift = shift;

  Field psi(n, 1.0);
  psi[0] += 1e-3;
  const double norm0 = std::sqrt(dot(psi, psi, h));
  for (double& x : psi) x /= norm0;

  Field y = shifted_apply(op, m, d, shift, psi);
  double rho = dot(psi, y, h);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double norm = std::sqrt(dot(y, y, h));
    if (!(norm > 0.0) || !std::isfinite(norm)) throw SolverError("power iteration collapsed to the zero field");
    for (std::size_t i = 0; i < n; ++i) psi[i] = y[i] / norm;
    y = shifted_apply(op, m, d, shift, psi);
    const double next = dot(psi, y, h);
    pv.iterations = it;
    bool settled = std::abs(next - rho) <= opts.tol * std::max(1.0, std::abs(next));
    if (settled) {
      double r2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) r2 += (y[i] - next * psi[i]) * (y[i] - next * psi[i]);
      settled = std::sqrt(r2 * h) <= std::pow(opts.tol, 0.75) * std::max(1.0, std::abs(next));
    }
    rho = next;
    if (settled) {
      pv.converged = true;
      break;
    }
  }
  pv.mu0 = rho - shift;
  if (!pv.converged) {
    std::ostringstream os;
    os.precision(12);
    os << "power iteration did not converge in " << opts.max_iter << " iterations; last estimate mu0 = " << pv.mu0;
    throw SolverError(os.str());
  }

  double r2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - rho * psi[i];
    r2 += e * e;
  }
  pv.residual = std::sqrt(r2 * h);

  std::size_t big = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(psi[i]) > std::abs(psi[big])) big = i;
  }
  if (psi[big] < 0.0) {
    for (double& x : psi) x = -x;
  }
  pv.eigenfield = std::move(psi);
  return pv;
}

double rayleigh_quotient(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> psi) {
  check_problem(op, m, d);
  if (psi.size() != op.size()) throw InvalidArgument("rayleigh_quotient: field length differs from the grid");
  const double h = op.grid().cell_measure();
  const double den = dot(psi, psi, h);
  if (!(den > 0.0)) throw InvalidArgument("rayleigh_quotient of the zero field");
  const Field y = shifted_apply(op, m, d, 0.0, psi);
  return dot(psi, y, h) / den;
}

EnergyValue energy(const DiscreteOperator& op, const Resource& m, double d, std::span<const double> v) {
  check_problem(op, m, d);
  if (v.size() != op.size()) throw InvalidArgument("energy: field length differs from the grid");
  const double h = op.grid().cell_measure();
  const Field lv = op.apply(v);
  EnergyValue e;
  for (std::size_t i = 0; i < v.size(); ++i) {
    e.dispersal += d * lv[i] * v[i];
    e.resource += m.field[i] * v[i] * v[i];
    e.cubic += v[i] * v[i] * v[i];
  }
  e.dispersal *= h;
  e.resource *= h;
  e.cubic *= h;
  e.value = 0.5 * (e.dispersal + e.resource) - e.cubic / 3.0;
  return e;
}

}  // namespace nld
