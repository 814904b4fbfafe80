#include "nld/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

using nlohmann::json;

namespace {

constexpr double kSupSlack = 1e-9;
constexpr double kLevelSetSlack = 1.1;
constexpr double kSqrtBandLow = 0.4;
constexpr double kSqrtBandHigh = 0.6;

std::string num(double x) {
  if (!std::isfinite(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

class Csv {
 public:
  Csv(std::string name, std::vector<std::string> columns) : name_(std::move(name)), columns_(std::move(columns)) {
    line(columns_);
  }
  void row(const std::vector<std::string>& cells) { line(cells); }
  const std::string& name() const { return name_; }
  std::string header() const {
    std::string h;
    for (std::size_t i = 0; i < columns_.size(); ++i) h += (i ? "," : "") + columns_[i];
    return h;
  }
  const std::string& body() const { return body_; }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) body_ += (i ? "," : "") + cells[i];
    body_ += '\n';
  }
  std::string name_;
  std::vector<std::string> columns_;
  std::string body_;
};

struct Context {
  const ExperimentConfig& cfg;
  const RunOptions& opts;
  RunReport& report;
  std::vector<Csv> csvs;

  void log(const std::string& msg) const {
    if (!opts.verbose) return;
    std::ostream& os = opts.log ? *opts.log : std::cerr;
    os << "[nld] " << msg << '\n';
  }
  void check(const std::string& name, bool passed, double value = 0.0, double limit = 0.0) {
    report.checks.push_back({name, passed, value, limit});
    if (!passed) log("check failed: " + name);
  }
  void check_le(const std::string& name, double value, double limit) { check(name, value <= limit, value, limit); }
  Csv& csv(const std::string& name, std::vector<std::string> columns) {
    csvs.emplace_back(name, std::move(columns));
    return csvs.back();
  }
  template <class F>
  auto timed(const std::string& phase, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      report.timings[phase] += dt.count();
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  }
};

std::vector<std::string> coordinate_columns(const Grid& g) {
  return g.dimension() == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
}

std::vector<std::string> coordinates(const Grid& g, std::size_t i) {
  const Point p = g.centers()[i];
  if (g.dimension() == 1) return {num(p[0])};
  return {num(p[0]), num(p[1])};
}

double max_of(std::span<const double> v) {
  double r = -std::numeric_limits<double>::infinity();
  for (double x : v) r = std::max(r, x);
  return r;
}

json m1_json(const M1Report& r) {
  return {{"deviation", r.deviation}, {"nonnegative", r.nonnegative}, {"nonconstant", r.nonconstant},
          {"passed", r.passed}};
}

json constants_json(const BoundConstants& bc) {
  return {{"K1", bc.K1},
          {"K2", bc.K2},
          {"K3", bc.K3},
          {"C1", bc.C1},
          {"C0_estimate", opt_json(bc.C0_estimate)},
          {"m_total", bc.m_total},
          {"omega_measure", bc.omega_measure},
          {"kernel_sup", bc.kernel_sup},
          {"min_a", bc.min_a}};
}

json criterion_json(const CriterionAReport& r) {
  return {{"d", r.d},
          {"epsilons", r.epsilons},
          {"masses", r.masses},
          {"measures", r.measures},
          {"max_feasible_epsilon", opt_json(r.max_feasible_epsilon)},
          {"feasible", r.feasible()}};
}

json level_sets_json(const LevelSetReport& r) {
  json thresholds = json::array();
  for (const auto& c : r.threshold_checks) {
    thresholds.push_back({{"epsilon", c.epsilon},
                      {"theta_threshold", c.theta_threshold},
                      {"measure", c.measure},
                      {"violations", c.violations},
                      {"d_threshold", c.d_threshold},
                      {"applicable", c.applicable}});
  }
  return {{"omega1", {{"measure", r.omega1.measure}, {"theta_mass", r.omega1.theta_mass}}},
          {"omega2", {{"measure", r.omega2.measure}, {"theta_mass", r.omega2.theta_mass}}},
          {"omega2_bound", r.omega2_bound},
          {"omega2_inclusion_violations", r.omega2_inclusion_violations},
          {"omega_d", {{"measure", r.omega_d.measure}, {"theta_mass", r.omega_d.theta_mass}}},
          {"omega_d_complement_measure", r.omega_d_complement_measure},
          {"omega_d_complement_bound", r.omega_d_complement_bound},
          {"threshold_checks", thresholds}};
}

json fit_json(const PowerFit& f) {
  return {{"exponent", f.exponent},
          {"coefficient", f.coefficient},
          {"r_squared", f.r_squared},
          {"window_begin", f.window_begin},
          {"window_end", f.window_end}};
}

SweepOptions sweep_options(const ExperimentConfig& cfg) {
  SweepOptions o;
  o.solver = cfg.solver.options();
  o.fit_fraction = cfg.fit_fraction;
  o.threads = cfg.threads;
  o.epsilon_grid = cfg.epsilon_grid.values();
  return o;
}

double require_d(const ExperimentConfig& cfg, Command c) {
  if (!cfg.d) throw ConfigError("command '" + to_string(c) + "' needs a single diffusion rate d");
  return *cfg.d;
}

// ---------------------------------------------------------------------------

void cmd_solve(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double d = require_d(cfg, Command::solve);
  const Problem p = ctx.timed("setup", [&] { return make_problem(cfg, d); });
  const DiscreteOperator& op = *p.op;
  ctx.log("solving on " + std::to_string(op.size()) + " cells with the " + to_string(op.backend()) + " backend");
  const SteadyState st = ctx.timed("solve", [&] { return solve_fixed_point(op, p.m, d, cfg.solver.options()); });
  const M1Report m1 = validate_M1(p.m);
  const BoundConstants bc = bound_constants(op, p.m);
  const auto eps = cfg.epsilon_grid.values();
  const LevelSetReport ls = level_set_diagnostics(op.grid(), st.theta, p.m, d, op.boundary_mass(), bc, eps);
  const CriterionAReport ca = criterion_A(op.grid(), p.m, d, op.boundary_mass(), eps);
  const double sup_theta = max_of(st.theta);

  ctx.report.results = {{"d", d},
                        {"cells", op.size()},
                        {"backend", to_string(op.backend())},
                        {"boundary_condition", to_string(op.boundary())},
                        {"total_population", st.total_population},
                        {"m_total", p.m.total},
                        {"residual", st.residual},
                        {"scaled_residual", st.scaled_residual},
                        {"iterations", st.iterations},
                        {"mu0_certificate", st.mu0_certificate},
                        {"sup_theta", sup_theta},
                        {"sup_m", p.m.sup_norm},
                        {"m1", m1_json(m1)},
                        {"constants", constants_json(bc)},
                        {"criterion_A", criterion_json(ca)},
                        {"level_sets", level_sets_json(ls)}};

  ctx.check_le("scaled_residual", st.scaled_residual, 10.0 * cfg.solver.tol);
  ctx.check_le("sup_theta_le_sup_m", sup_theta, p.m.sup_norm + kSupSlack);
  if (m1.passed && op.boundary() == DiscreteOperator::Boundary::neumann) {
    ctx.check("population_exceeds_resource", st.total_population > p.m.total, st.total_population, p.m.total);
  }
  if (d >= 1.0 && op.boundary() == DiscreteOperator::Boundary::neumann) {
    ctx.check_le("total_le_C1_sqrt_d", st.total_population, bc.C1 * std::sqrt(d));
    ctx.check_le("omega2_measure", ls.omega2.measure, kLevelSetSlack * ls.omega2_bound);
  }

  auto cols = coordinate_columns(op.grid());
  cols.insert(cols.end(), {"a", "m", "theta"});
  Csv& csv = ctx.csv("theta.csv", cols);
  for (std::size_t i = 0; i < op.size(); ++i) {
    auto row = coordinates(op.grid(), i);
    row.insert(row.end(), {num(op.boundary_mass()[i]), num(p.m.field[i]), num(st.theta[i])});
    csv.row(row);
  }
}

void cmd_mu0(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double d = require_d(cfg, Command::mu0);
  const Problem p = ctx.timed("setup", [&] { return make_problem(cfg, d); });
  const DiscreteOperator& op = *p.op;
  EigenOptions eo;
  eo.tol = cfg.solver.eig_tol;
  eo.max_iter = cfg.solver.eig_max_iter;
  const PrincipalValue pv = ctx.timed("eigen", [&] { return principal_value(op, p.m, d, eo); });
  const double rq = rayleigh_quotient(op, p.m, d, pv.eigenfield);
  const double mean = p.m.total / op.grid().measure();
  ctx.report.results = {{"d", d},
                        {"cells", op.size()},
                        {"backend", to_string(op.backend())},
                        {"boundary_condition", to_string(op.boundary())},
                        {"mu0", pv.mu0},
                        {"positive_steady_state_exists", pv.mu0 > 0.0},
                        {"iterations", pv.iterations},
                        {"residual", pv.residual},
                        {"shift", pv.shift},
                        {"rayleigh_quotient", rq},
                        {"mean_resource", mean}};
  const double scale = std::max(1.0, std::abs(pv.mu0) + pv.shift);
  ctx.check_le("rayleigh_matches_mu0", std::abs(rq - pv.mu0), 1e-8 * scale);
  if (op.boundary() == DiscreteOperator::Boundary::neumann) {
    ctx.check("mu0_ge_mean_resource", pv.mu0 >= mean - 1e-9 * scale, pv.mu0, mean);
  }
  auto cols = coordinate_columns(op.grid());
  cols.insert(cols.end(), {"m", "psi"});
  Csv& csv = ctx.csv("eigenfield.csv", cols);
  for (std::size_t i = 0; i < op.size(); ++i) {
    auto row = coordinates(op.grid(), i);
    row.insert(row.end(), {num(p.m.field[i]), num(pv.eigenfield[i])});
    csv.row(row);
  }
}

const std::vector<std::string> kSweepColumns = {"d",           "total",        "total_over_sqrt_d", "residual",
                                                "scaled_residual", "iterations", "cells",             "sup_theta",
                                                "sup_m",       "C1",           "omega2_measure",    "omega2_bound",
                                                "max_feasible_epsilon"};

// Checks shared by every sweep; returns the sweep summary.
json sweep_checks(Context& ctx, const SweepResult& res, const std::string& prefix) {
  const double tol = ctx.cfg.solver.tol;
  ctx.check(prefix + "complete", res.complete);
  bool excess = true, upper = true, resid = true, omega2 = true;
  for (const auto& s : res.samples) {
    excess = excess && s.total > 1.0;
    resid = resid && s.scaled_residual <= 10.0 * tol;
    if (s.d >= 1.0) {
      upper = upper && s.total <= s.C1 * std::sqrt(s.d);
      omega2 = omega2 && s.omega2_measure <= kLevelSetSlack * s.omega2_bound;
    }
  }
  const bool neumann = ctx.cfg.boundary_condition == "neumann";
  ctx.check(prefix + "scaled_residuals", resid);
  if (neumann) {
    ctx.check(prefix + "population_exceeds_resource", excess);
    ctx.check(prefix + "total_le_C1_sqrt_d", upper);
    ctx.check(prefix + "omega2_measure", omega2);
  }
  bool all_feasible = !res.samples.empty();
  std::optional<double> min_eps;
  for (const auto& s : res.samples) {
    all_feasible = all_feasible && s.max_feasible_epsilon.has_value();
    if (s.max_feasible_epsilon) min_eps = min_eps ? std::min(*min_eps, *s.max_feasible_epsilon) : *s.max_feasible_epsilon;
  }
  bool decreasing = res.samples.size() >= 2;
  for (std::size_t k = 1; k < res.samples.size(); ++k) {
    const auto& a = res.samples[k - 1];
    const auto& b = res.samples[k];
    decreasing = decreasing && b.total / std::sqrt(b.d) < a.total / std::sqrt(a.d);
  }
  json samples = json::array();
  for (const auto& s : res.samples) {
    samples.push_back({{"d", s.d},
                       {"total", s.total},
                       {"total_over_sqrt_d", s.total / std::sqrt(s.d)},
                       {"residual", s.residual},
                       {"scaled_residual", s.scaled_residual},
                       {"iterations", s.iterations},
                       {"cells", s.cells},
                       {"C1", s.C1},
                       {"max_feasible_epsilon", opt_json(s.max_feasible_epsilon)}});
  }
  json out = {{"family", res.family},
              {"complete", res.complete},
              {"error", res.error},
              {"samples", samples},
              {"C0_estimate", opt_json(res.C0_estimate())},
              {"criterion_A_feasible_for_all_d", all_feasible},
              {"min_max_feasible_epsilon", opt_json(min_eps)},
              {"total_over_sqrt_d_decreasing", decreasing}};
  if (res.samples.size() >= 2) {
    out["fit"] = fit_json(res.fit);
    out["sqrt_band"] = {kSqrtBandLow, kSqrtBandHigh};
    out["exponent_in_sqrt_band"] = res.fit.exponent >= kSqrtBandLow && res.fit.exponent <= kSqrtBandHigh;
    const auto& first = res.samples.front();
    const auto& last = res.samples.back();
    out["final_over_initial_total_over_sqrt_d"] =
        (last.total / std::sqrt(last.d)) / (first.total / std::sqrt(first.d));
  }
  return out;
}

void write_sweep_csv(Context& ctx, const std::string& name, const SweepResult& res) {
  Csv& csv = ctx.csv(name, kSweepColumns);
  for (const auto& s : res.samples) {
    csv.row({num(s.d), num(s.total), num(s.total / std::sqrt(s.d)), num(s.residual), num(s.scaled_residual),
             std::to_string(s.iterations), std::to_string(s.cells), num(s.sup_theta), num(s.sup_m), num(s.C1),
             num(s.omega2_measure), num(s.omega2_bound),
             s.max_feasible_epsilon ? num(*s.max_feasible_epsilon) : std::string()});
  }
}

void cmd_sweep(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.d_grid) throw ConfigError("command 'sweep' needs d_grid");
  const auto ds = cfg.d_grid->values();
  ctx.log("sweeping " + std::to_string(ds.size()) + " diffusion rates with " + std::to_string(cfg.threads) +
          " thread(s)");
  const SweepResult res = ctx.timed("sweep", [&] { return sweep(make_family(cfg), ds, sweep_options(cfg)); });
  ctx.report.results = sweep_checks(ctx, res, "");
  write_sweep_csv(ctx, "sweep.csv", res);
  if (!res.complete) throw SolverError("sweep incomplete: " + res.error);
}

void cmd_criterion(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto ds = cfg.d_values();
  if (ds.empty()) throw ConfigError("command 'criterion' needs d or d_grid");
  const auto eps = cfg.epsilon_grid.values();
  const Family fam = make_family(cfg);
  Csv& csv = ctx.csv("criterion.csv", {"d", "epsilon", "mass", "measure"});
  json per_d = json::array();
  bool all_feasible = true, monotone = true;
  std::optional<double> min_eps;
  for (double d : ds) {
    const Problem p = ctx.timed("setup", [&] { return fam.make(d); });
    const CriterionAReport r = criterion_A(p.op->grid(), p.m, d, p.op->boundary_mass(), eps);
    for (std::size_t k = 0; k < eps.size(); ++k) {
      csv.row({num(d), num(eps[k]), num(r.masses[k]), num(r.measures[k])});
      if (k > 0) monotone = monotone && r.masses[k] <= r.masses[k - 1];
    }
    all_feasible = all_feasible && r.feasible();
    if (r.max_feasible_epsilon) min_eps = min_eps ? std::min(*min_eps, *r.max_feasible_epsilon) : *r.max_feasible_epsilon;
    per_d.push_back({{"d", d},
                     {"cells", p.op->size()},
                     {"max_feasible_epsilon", opt_json(r.max_feasible_epsilon)},
                     {"feasible", r.feasible()}});
  }
  ctx.report.results = {{"family", fam.descriptor},
                        {"per_d", per_d},
                        {"feasible_for_all_d", all_feasible},
                        {"min_max_feasible_epsilon", opt_json(min_eps)},
                        {"tag", all_feasible ? "feasible" : "infeasible"}};
  ctx.check("masses_nonincreasing_in_epsilon", monotone);
}

void cmd_bounds(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto ds = cfg.d_values();
  if (ds.empty()) throw ConfigError("command 'bounds' needs d or d_grid");
  const auto eps = cfg.epsilon_grid.values();
  const Family fam = make_family(cfg);
  Csv& csv = ctx.csv("bounds.csv", {"d", "K1", "K2", "K3", "C1", "total", "C1_sqrt_d", "omega1_measure",
                                    "omega2_measure", "omega2_bound", "omega_d_complement_measure",
                                    "omega_d_complement_bound"});
  json per_d = json::array();
  const bool neumann = cfg.boundary_condition == "neumann";
  for (double d : ds) {
    const Problem p = ctx.timed("setup", [&] { return fam.make(d); });
    const SteadyState st =
        ctx.timed("solve", [&] { return solve_fixed_point(*p.op, p.m, d, cfg.solver.options()); });
    const BoundConstants bc = bound_constants(*p.op, p.m);
    const LevelSetReport ls = level_set_diagnostics(p.op->grid(), st.theta, p.m, d, p.op->boundary_mass(), bc, eps);
    csv.row({num(d), num(bc.K1), num(bc.K2), num(bc.K3), num(bc.C1), num(st.total_population),
             num(bc.C1 * std::sqrt(d)), num(ls.omega1.measure), num(ls.omega2.measure), num(ls.omega2_bound),
             num(ls.omega_d_complement_measure), num(ls.omega_d_complement_bound)});
    per_d.push_back({{"d", d},
                     {"total_population", st.total_population},
                     {"constants", constants_json(bc)},
                     {"level_sets", level_sets_json(ls)}});
    std::ostringstream tag;
    tag << "d=" << num(d) << ".";
    if (neumann && d >= 1.0) {
      ctx.check_le(tag.str() + "total_le_C1_sqrt_d", st.total_population, bc.C1 * std::sqrt(d));
      ctx.check_le(tag.str() + "omega2_measure", ls.omega2.measure, kLevelSetSlack * ls.omega2_bound);
    }
    std::size_t threshold_violations = 0;
    for (const auto& c : ls.threshold_checks) {
      if (c.applicable) threshold_violations += c.violations;
    }
    ctx.check_le(tag.str() + "threshold_checks_violations", static_cast<double>(threshold_violations), 0.0);
  }
  ctx.report.results = {{"family", fam.descriptor}, {"per_d", per_d}};
}

std::vector<double> example_d_grid(const ExperimentConfig& base) {
  if (base.d_grid) return base.d_grid->values();
  return geometric_grid(100.0, 1000.0, 6);
}

void cmd_examples(Context& ctx) {
  json groups = json::object();
  for (const ExampleScenario& sc : example_scenarios(ctx.cfg)) {
    ctx.log("scenario " + sc.group + "/" + sc.name);
    require_valid(sc.config);
    const auto ds = sc.config.d_grid->values();
    const SweepResult res =
        ctx.timed(sc.name, [&] { return sweep(make_family(sc.config), ds, sweep_options(sc.config)); });
    const std::string prefix = sc.name + ".";
    json summary = sweep_checks(ctx, res, prefix);
    const bool feasible = summary["criterion_A_feasible_for_all_d"].get<bool>();
    summary["expected_tag"] = sc.expect_feasible ? "feasible" : "infeasible";
    summary["tag"] = feasible ? "feasible" : "infeasible";
    ctx.check(prefix + "criterion_A_tag_matches", feasible == sc.expect_feasible);
    if (sc.expect_feasible) {
      const double p = res.samples.size() >= 2 ? res.fit.exponent : 0.0;
      ctx.check(prefix + "exponent_ge_0.4", p >= kSqrtBandLow, p, kSqrtBandLow);
    } else {
      ctx.check(prefix + "total_over_sqrt_d_decreasing", summary["total_over_sqrt_d_decreasing"].get<bool>());
    }
    write_sweep_csv(ctx, "examples_" + sc.name + ".csv", res);
    summary["csv"] = "examples_" + sc.name + ".csv";
    groups[sc.group][sc.name] = summary;
  }
  ctx.report.results = {{"scenarios", groups}};
}

void cmd_selftest(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Grid g = build_grid(Domain::interval(0.0, 1.0), 32);
  json identities = json::object();
  const std::vector<std::pair<std::string, KernelSpec>> kernels = {
      {"uniform", KernelSpec::uniform(0.1)},
      {"tent", KernelSpec::tent(0.2)},
      {"truncated_gaussian", KernelSpec::truncated_gaussian(0.05, 3.0)},
      {"ring", KernelSpec::ring(0.1, 0.6)}};
  for (const auto& [name, spec] : kernels) {
    for (auto bc : {DiscreteOperator::Boundary::neumann, DiscreteOperator::Boundary::dirichlet}) {
      const auto op = DiscreteOperator::create(g, spec, DiscreteOperator::Backend::dense, bc);
      const SelfCheckReport r = operator_selfcheck(op, 10, cfg.seed);
      const std::string key = name + "." + to_string(bc);
      identities[key] = {{"symmetry", r.symmetry},
                         {"conservation", r.conservation},
                         {"semidefiniteness", r.semidefiniteness},
                         {"backend_gap", r.backend_gap},
                         {"dirichlet_constant", r.dirichlet_constant}};
      ctx.check_le("identities." + key, r.worst(), 1e-10);
    }
  }

  // Ring kernel boundary mass against its closed form 0.2 + 0.3 x^2.
  const Grid gr = build_grid(Domain::interval(-1.0, 1.0), 32);
  const Field a = boundary_mass(gr, KernelSpec::ring(0.1, 0.6));
  double ring_gap = 0.0;
  for (std::size_t i = 0; i < gr.size(); ++i) {
    const double x = gr.centers()[i][0];
    ring_gap = std::max(ring_gap, std::abs(a[i] - (0.2 + 0.3 * x * x)));
  }
  ctx.check_le("ring_boundary_mass", ring_gap, 1e-10);

  // Two-cell instance against the cubic t^3 + 7 t^2 + t - 1 = 0.
  const Grid g2 = build_grid(Domain::interval(0.0, 1.0), 2);
  const auto op2 = DiscreteOperator::create(g2, KernelSpec::uniform(1.0), DiscreteOperator::Backend::dense);
  const Resource m2 = make_resource(g2, Field{2.0, 0.0});
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double t = 0.5 * (lo + hi);
    (t * t * t + 7.0 * t * t + t - 1.0 > 0.0 ? hi : lo) = t;
  }
  const double th1 = (7.0 + lo) / 4.0;
  const double th2 = th1 * (4.0 * th1 - 7.0);
  const SteadyState st2 = solve_fixed_point(op2, m2, 1.0, cfg.solver.options());
  ctx.check_le("two_cell_theta", std::max(std::abs(st2.theta[0] - th1), std::abs(st2.theta[1] - th2)), 1e-8);
  const double mu_exact = 0.75 + std::sqrt(1.0 + 0.0625);
  ctx.check_le("two_cell_mu0", std::abs(principal_value(op2, m2, 1.0).mu0 - mu_exact), 1e-9);

  // Fixed point against explicit dynamics, plus the sup and energy invariants.
  const auto op = DiscreteOperator::create(g, KernelSpec::uniform(0.1));
  double oracle_gap = 0.0, sup_excess = -1.0, min_excess = 1.0, energy_drop = 0.0;
  for (std::uint64_t k = 0; k < 3; ++k) {
    const Resource m = random_resource(g, cfg.seed + k);
    for (double d : {0.1, 1.0, 10.0}) {
      SolverOptions so = cfg.solver.options();
      so.tol = std::min(so.tol, 1e-12);
      const SteadyState fp = solve_fixed_point(op, m, d, so);
      const SteadyState ev = relax(op, m, d, Field(g.size(), 1e-3), 1e-11, 1e6);
      for (std::size_t i = 0; i < g.size(); ++i) oracle_gap = std::max(oracle_gap, std::abs(fp.theta[i] - ev.theta[i]));
      sup_excess = std::max(sup_excess, max_of(fp.theta) - m.sup_norm);
      min_excess = std::min(min_excess, fp.total_population - m.total);
    }
    EvolveOptions eo;
    eo.dt = 0.5 * stable_step(op, m, 1.0);
    eo.t_end = 5.0;
    eo.snapshot_every = 10;
    const Trajectory tr = evolve(op, m, 1.0, Field(g.size(), 1e-3), eo);
    for (std::size_t s = 1; s < tr.snapshots.size(); ++s) {
      const double e0 = energy(op, m, 1.0, tr.snapshots[s - 1].u).value;
      const double e1 = energy(op, m, 1.0, tr.snapshots[s].u).value;
      energy_drop = std::max(energy_drop, e0 - e1);
    }
  }
  ctx.check_le("fixed_point_matches_dynamics", oracle_gap, 1e-6);
  ctx.check_le("sup_theta_le_sup_m", sup_excess, kSupSlack);
  ctx.check("population_exceeds_resource", min_excess > 0.0, min_excess, 0.0);
  ctx.check_le("energy_nondecreasing", energy_drop, 1e-10);

  // Bound constants for unit inputs.
  const BoundConstants bc = bound_constants(1.0, 1.0, 0.5, 0.5);
  ctx.check_le("bound_constants_unit_inputs",
               std::max({std::abs(bc.K1 - 1.0), std::abs(bc.K2 - 9.0), std::abs(bc.K3 - 38.0),
                         std::abs(bc.C1 - 2.0 * (1.0 + std::sqrt(38.0)))}),
               1e-12);

  ctx.report.results = {{"grid_cells", g.size()},
                        {"identities", identities},
                        {"ring_boundary_mass_gap", ring_gap},
                        {"fixed_point_vs_dynamics_gap", oracle_gap},
                        {"min_population_excess", min_excess},
                        {"max_energy_drop", energy_drop}};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "solve") return Command::solve;
  if (name == "mu0") return Command::mu0;
  if (name == "sweep") return Command::sweep;
  if (name == "criterion") return Command::criterion;
  if (name == "bounds") return Command::bounds;
  if (name == "examples") return Command::examples;
  if (name == "selftest") return Command::selftest;
  throw ConfigError("unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::mu0: return "mu0";
    case Command::sweep: return "sweep";
    case Command::criterion: return "criterion";
    case Command::bounds: return "bounds";
    case Command::examples: return "examples";
    case Command::selftest: return "selftest";
  }
  return "unknown";
}

bool RunReport::checks_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

json RunReport::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks) {
    checks_json.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"limit", c.limit}});
  }
  json files_json = json::object();
  for (const auto& [name, cols] : files) files_json[name] = cols;
  static const char* status[] = {"ok", "check_failure", "config_error", "solver_failure"};
  return {{"artifact", "nld"},
          {"version", kVersion},
          {"command", to_string(command)},
          {"status", status[exit_code]},
          {"exit_code", exit_code},
          {"errors", errors},
          {"checks", checks_json},
          {"checks_passed", checks_passed()},
          {"results", results},
          {"files", files_json},
          {"config", config}};
}

std::vector<ExampleScenario> example_scenarios(const ExperimentConfig& base) {
  ExperimentConfig common;
  common.solver = base.solver;
  common.backend = base.backend;
  common.threads = base.threads;
  common.epsilon_grid = base.epsilon_grid;
  common.seed = base.seed;
  common.fit_fraction = base.fit_fraction;
  common.grid.max_cells = base.grid.max_cells;
  const auto ds = example_d_grid(base);
  common.d_grid = RangeConfig{ds.front(), ds.back(), ds.size()};
  common.kernel.kind = "uniform";
  common.kernel.radius = 0.05;

  std::vector<ExampleScenario> out;
  auto power_case = [&](const std::string& name, double alpha, double beta, bool feasible) {
    ExampleScenario s{"growth_exponent", name, feasible, common};
    s.config.resource.family = "power";
    s.config.resource.alpha = alpha;
    s.config.resource.beta = beta;
    out.push_back(s);
  };
  power_case("power_beta1.5", 1.0, 1.5, true);
  power_case("power_beta0.5", 1.0, 0.5, false);
  power_case("power_alpha1.5", 1.5, 1.0, true);
  power_case("power_alpha0.4", 0.4, 1.0, false);

  auto spike_case = [&](const std::string& name, const std::string& mode, bool feasible) {
    ExampleScenario s{"boundary_placement", name, feasible, common};
    s.config.resource.family = "power";
    s.config.placement.mode = mode;
    s.config.placement.x0 = {0.01, 0.0};
    out.push_back(s);
  };
  spike_case("spike_near_boundary", "explicit", true);
  spike_case("spike_interior", "interior", false);

  auto ring_case = [&](const std::string& name, const std::string& mode, bool feasible) {
    ExampleScenario s{"ring_kernel", name, feasible, common};
    s.config.domain.lo = {-1.0};
    s.config.domain.hi = {1.0};
    s.config.kernel = KernelConfig{};
    s.config.kernel.kind = "ring";
    s.config.kernel.delta = 0.1;
    s.config.kernel.slope = 0.6;
    s.config.resource.family = "power";
    s.config.resource.alpha = 0.3;
    s.config.placement.mode = mode;
    out.push_back(s);
  };
  ring_case("ring_center", "interior", true);
  ring_case("ring_boundary", "boundary", false);
  return out;
}

RunReport run(Command command, const ExperimentConfig& cfg, const RunOptions& opts) {
  RunReport report;
  report.command = command;
  report.config = config_to_json(cfg);
  Context ctx{cfg, opts, report, {}};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    require_valid(cfg);
    switch (command) {
      case Command::solve: cmd_solve(ctx); break;
      case Command::mu0: cmd_mu0(ctx); break;
      case Command::sweep: cmd_sweep(ctx); break;
      case Command::criterion: cmd_criterion(ctx); break;
      case Command::bounds: cmd_bounds(ctx); break;
      case Command::examples: cmd_examples(ctx); break;
      case Command::selftest: cmd_selftest(ctx); break;
    }
    report.exit_code = report.checks_passed() ? exit_ok : exit_check_failure;
  } catch (const ConfigError& e) {
    report.errors = e.problems();
    report.exit_code = exit_config_error;
  } catch (const InvalidArgument& e) {
    report.errors = {e.what()};
    report.exit_code = exit_config_error;
  } catch (const std::exception& e) {
    report.errors = {e.what()};
    report.exit_code = exit_solver_failure;
  }
  report.timings["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const Csv& c : ctx.csvs) report.files[c.name()] = c.header();

  if (!opts.out_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    write_file(dir / "config.json", report.config.dump(2) + "\n");
    write_file(dir / "report.json", report.to_json().dump(2) + "\n");
    json timings = json::object();
    for (const auto& [k, v] : report.timings) timings[k] = v;
    write_file(dir / "timings.json", timings.dump(2) + "\n");
    for (const Csv& c : ctx.csvs) write_file(dir / c.name(), c.body());
  }
  return report;
}

}  // namespace nld
