#include "nld/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "nld/error.hpp"

namespace nld {

std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo) || n == 0) throw InvalidArgument("geometric grid needs 0 < lo <= hi and n >= 1");
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.back() = hi;
  return g;
}

std::vector<double> default_epsilon_grid() { return geometric_grid(1e-3, 4.0, 24); }

CriterionAReport criterion_A(const Grid& grid, const Resource& m, double d, std::span<const double> a,
                             std::span<const double> eps_grid) {
  if (!(d > 0.0)) throw InvalidArgument("criterion_A requires d > 0");
  if (m.field.size() != grid.size() || a.size() != grid.size()) {
    throw InvalidArgument("criterion_A: field lengths differ from the grid");
  }
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    if (!(eps_grid[k] > 0.0) || (k > 0 && !(eps_grid[k] > eps_grid[k - 1]))) {
      throw InvalidArgument("epsilon grid must be positive and strictly increasing");
    }
  }
  CriterionAReport rep;
  rep.d = d;
  rep.epsilons.assign(eps_grid.begin(), eps_grid.end());
  const double h = grid.cell_measure();
  for (double eps : eps_grid) {
    double mass = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (m.field[i] / d > (1.0 + eps) * a[i]) {
        mass += m.field[i];
        ++count;
      }
    }
    rep.masses.push_back(mass * h);
    rep.measures.push_back(static_cast<double>(count) * h);
    if (mass * h >= eps) rep.max_feasible_epsilon = eps;
  }
  return rep;
}

PowerFit fit_power_law(std::span<const double> d, std::span<const double> total, double fraction) {
  if (d.size() != total.size()) throw InvalidArgument("fit_power_law: length mismatch");
  if (d.size() < 2) throw InvalidArgument("fit_power_law needs at least two samples");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("fit fraction must lie in (0, 1]");
  const std::size_t n = d.size();
  const auto width = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  PowerFit fit;
  fit.window_begin = n - std::min(width, n);
  fit.window_end = n;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const auto k = static_cast<double>(fit.window_end - fit.window_begin);
  for (std::size_t i = fit.window_begin; i < n; ++i) {
    if (!(d[i] > 0.0 && total[i] > 0.0)) throw InvalidArgument("fit_power_law needs positive samples");
    const double x = std::log(d[i]);
    const double y = std::log(total[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double mx = sx / k;
  const double my = sy / k;
  const double vxx = sxx / k - mx * mx;
  const double vxy = sxy / k - mx * my;
  if (!(vxx > 0.0)) throw InvalidArgument("fit_power_law needs distinct d values in the window");
  fit.exponent = vxy / vxx;
  const double intercept = my - fit.exponent * mx;
  fit.coefficient = std::exp(intercept);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = fit.window_begin; i < n; ++i) {
    const double y = std::log(total[i]);
    const double e = y - (intercept + fit.exponent * std::log(d[i]));
    ss_res += e * e;
    ss_tot += (y - my) * (y - my);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

BoundConstants bound_constants(double m_total, double omega_measure, double kernel_sup, double min_a) {
  if (!(m_total > 0.0 && omega_measure > 0.0 && kernel_sup > 0.0 && min_a > 0.0)) {
    throw InvalidArgument("bound_constants requires positive inputs");
  }
  if (min_a > 1.0) throw InvalidArgument("bound_constants requires min a <= 1");
  BoundConstants bc;
  bc.m_total = m_total;
  bc.omega_measure = omega_measure;
  bc.kernel_sup = kernel_sup;
  bc.min_a = min_a;
  bc.K1 = 2.0 * kernel_sup * omega_measure;
  bc.K2 = 4.0 * (m_total + bc.K1 * omega_measure) * kernel_sup / min_a + 2.0 * kernel_sup * omega_measure;
  const double ratio = m_total / min_a;
  bc.K3 = 2.0 * (bc.K2 + 2.0) * m_total + 4.0 / omega_measure * ratio * ratio;
  bc.C1 = 2.0 * (m_total + std::sqrt(bc.K3 * omega_measure));
  return bc;
}

BoundConstants bound_constants(const DiscreteOperator& op, const Resource& m) {
  const Field& a = op.boundary_mass();
  const double min_a = *std::min_element(a.begin(), a.end());
  return bound_constants(m.total, op.grid().measure(), op.kernel_sup(), min_a);
}

std::vector<double> SweepResult::ds() const {
  std::vector<double> v;
  for (const auto& s : samples) v.push_back(s.d);
  return v;
}

std::vector<double> SweepResult::totals() const {
  std::vector<double> v;
  for (const auto& s : samples) v.push_back(s.total);
  return v;
}

std::optional<double> SweepResult::C0_estimate() const {
  std::optional<double> c0;
  for (const auto& s : samples) {
    if (s.d < 1.0) continue;
    const double r = s.total / std::sqrt(s.d);
    c0 = c0 ? std::min(*c0, r) : r;
  }
  return c0;
}

namespace {

struct Outcome {
  std::optional<SweepSample> sample;
  std::string error;
};

Outcome solve_member(const Family& family, double d, const SweepOptions& opts) {
  Outcome out;
  try {
    const Problem p = family.make(d);
    const M1Report m1 = validate_M1(p.m);
    if (!m1.passed) {
      std::ostringstream os;
      os << "family member at d = " << d << " is not an admissible resource of total one (deviation "
         << m1.deviation << ", nonconstant " << m1.nonconstant << ")";
      out.error = os.str();
      return out;
    }
    const SteadyState st = solve_fixed_point(*p.op, p.m, d, opts.solver);
    const BoundConstants bc = bound_constants(*p.op, p.m);
    const LevelSetReport ls =
        level_set_diagnostics(p.op->grid(), st.theta, p.m, d, p.op->boundary_mass(), bc, std::span<const double>{});
    const CriterionAReport ca = criterion_A(p.op->grid(), p.m, d, p.op->boundary_mass(), opts.epsilon_grid);
    SweepSample s;
    s.d = d;
    s.total = st.total_population;
    s.residual = st.residual;
    s.scaled_residual = st.scaled_residual;
    s.iterations = st.iterations;
    s.cells = p.op->size();
    s.sup_theta = *std::max_element(st.theta.begin(), st.theta.end());
    s.sup_m = p.m.sup_norm;
    s.C1 = bc.C1;
    s.omega2_measure = ls.omega2.measure;
    s.omega2_bound = ls.omega2_bound;
    s.max_feasible_epsilon = ca.max_feasible_epsilon;
    out.sample = s;
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << "d = " << d << ": " << e.what();
    out.error = os.str();
  }
  return out;
}

}  // namespace

SweepResult sweep(const Family& family, std::span<const double> d_grid, const SweepOptions& opts) {
  for (std::size_t k = 0; k < d_grid.size(); ++k) {
    if (!(d_grid[k] > 0.0) || (k > 0 && !(d_grid[k] > d_grid[k - 1]))) {
      throw InvalidArgument("d grid must be positive and strictly increasing");
    }
  }
  std::vector<Outcome> outcomes(d_grid.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(d_grid.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < d_grid.size(); ++k) {
      outcomes[k] = solve_member(family, d_grid[k], opts);
      if (!outcomes[k].sample) break;
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < d_grid.size(); k = next++) outcomes[k] = solve_member(family, d_grid[k], opts);
      });
    }
    for (auto& t : pool) t.join();
  }

  SweepResult res;
  res.family = family.descriptor;
  for (std::size_t k = 0; k < d_grid.size(); ++k) {
    if (!outcomes[k].sample) {
      res.complete = false;
      res.error = outcomes[k].error.empty() ? "not attempted after an earlier failure" : outcomes[k].error;
      break;
    }
    res.samples.push_back(*outcomes[k].sample);
  }
  if (res.samples.size() >= 2) {
    const auto ds = res.ds();
    const auto ts = res.totals();
    res.fit = fit_power_law(ds, ts, opts.fit_fraction);
  }
  return res;
}

LevelSetReport level_set_diagnostics(const Grid& grid, std::span<const double> theta, const Resource& m, double d,
                                     std::span<const double> a, const BoundConstants& bc,
                                     std::span<const double> threshold_epsilons) {
  const std::size_t n = grid.size();
  if (theta.size() != n || a.size() != n || m.field.size() != n) {
    throw InvalidArgument("level_set_diagnostics: field lengths differ from the grid");
  }
  if (!(d > 0.0)) throw InvalidArgument("level_set_diagnostics requires d > 0");
  const double h = grid.cell_measure();
  const double min_a = *std::min_element(a.begin(), a.end());
  const double max_a = *std::max_element(a.begin(), a.end());
  LevelSetReport rep;
  const double d34 = std::pow(d, 0.75);
  for (std::size_t i = 0; i < n; ++i) {
    if (theta[i] > bc.K1 * d) {
      rep.omega1.measure += h;
      rep.omega1.theta_mass += theta[i] * h;
    }
    if (theta[i] > bc.K2 * d) {
      rep.omega2.measure += h;
      rep.omega2.theta_mass += theta[i] * h;
      if (m.field[i] < 0.5 * d * a[i]) ++rep.omega2_inclusion_violations;
    }
    if (m.field[i] <= d34 * a[i]) {
      rep.omega_d.measure += h;
      rep.omega_d.theta_mass += theta[i] * h;
    } else {
      rep.omega_d_complement_measure += h;
    }
  }
  rep.omega2_bound = 2.0 * m.total / (d * min_a);
  rep.omega_d_complement_bound = m.total / (d34 * min_a);

  for (double eps : threshold_epsilons) {
    ThresholdCheck c;
    c.epsilon = eps;
    c.theta_threshold = 2.0 * max_a * d * eps;
    const double alpha = 2.0 * max_a * eps;
    const double ck = bc.C1 * bc.kernel_sup;
    c.d_threshold = ck * ck / std::pow(alpha, 4.0);
    c.applicable = d >= c.d_threshold;
    for (std::size_t i = 0; i < n; ++i) {
      if (theta[i] >= c.theta_threshold) {
        c.measure += h;
        if (!(m.field[i] > (1.0 + eps) * d * a[i])) ++c.violations;
      }
    }
    rep.threshold_checks.push_back(c);
  }
  return rep;
}

}  // namespace nld
