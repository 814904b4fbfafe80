#include "nld/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxTotalCells = std::size_t{1} << 22;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(where, "expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw std::invalid_argument("expected a number");
      out = it->template get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw std::invalid_argument("expected a string");
      out = it->template get<std::string>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
      out = it->template get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
      if (std::is_unsigned_v<T> && it->is_number_integer() && !it->is_number_unsigned() &&
          it->template get<long long>() < 0) {
        throw std::invalid_argument("expected a nonnegative integer");
      }
      out = it->template get<T>();
    } else {
      out = it->template get<T>();
    }
  } catch (const std::exception& e) {
    fail(where + "." + key, e.what());
  }
}

std::vector<double> read_vector(const json& obj, const char* key, std::vector<double> fallback,
                                const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_array()) fail(where + "." + key, "expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : *it) {
    if (!x.is_number()) fail(where + "." + key, "expected an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

RangeConfig read_range(const json& obj, const std::string& where) {
  reject_unknown(obj, where, {"min", "max", "points"});
  RangeConfig r;
  read(obj, "min", r.min, where);
  read(obj, "max", r.max, where);
  read(obj, "points", r.points, where);
  return r;
}

json range_to_json(const RangeConfig& r) { return {{"min", r.min}, {"max", r.max}, {"points", r.points}}; }

bool valid_range(const RangeConfig& r) {
  return r.min > 0.0 && std::isfinite(r.max) && r.max >= r.min && r.points >= 1 && (r.points > 1 || r.max == r.min);
}

Point point_of(const std::vector<double>& v) { return {v.empty() ? 0.0 : v[0], v.size() > 1 ? v[1] : 0.0}; }

DiscreteOperator build_operator(const ExperimentConfig& cfg, const Grid& grid) {
  const auto bc = parse_boundary(cfg.boundary_condition);
  const KernelSpec spec = make_kernel(cfg.kernel);
  if (cfg.backend == "auto") return DiscreteOperator::create(grid, spec, bc);
  return DiscreteOperator::create(grid, spec, parse_backend(cfg.backend), bc);
}

Resource build_resource(const ExperimentConfig& cfg, const Grid& grid, double d) {
  const ResourceConfig& rc = cfg.resource;
  if (rc.concentrated()) {
    BangBangSpec spec;
    spec.height = rc.height_at(d);
    spec.shape = rc.shape == "block" ? BangBangSpec::Shape::block : BangBangSpec::Shape::ball;
    Placement pl;
    pl.mode = cfg.placement.mode == "boundary"   ? Placement::Mode::boundary
              : cfg.placement.mode == "explicit" ? Placement::Mode::explicit_point
                                                 : Placement::Mode::interior;
    pl.x0 = point_of(cfg.placement.x0);
    spec.center = pl.resolve(grid, spec.target_total / spec.height);
    return bang_bang(grid, spec, cfg.grid.cells_per_support);
  }
  if (rc.family == "cosine") {
    const Point lo = grid.domain().lo();
    const Point hi = grid.domain().hi();
    const int dim = grid.dimension();
    const double amp = rc.amplitude;
    return from_function(
        grid,
        [=](Point p) {
          double c = std::cos(2.0 * std::numbers::pi * (p[0] - lo[0]) / (hi[0] - lo[0]));
          if (dim == 2) c *= std::cos(2.0 * std::numbers::pi * (p[1] - lo[1]) / (hi[1] - lo[1]));
          return 1.0 + amp * c;
        },
        rc.normalize);
  }
  if (rc.family == "random") return random_resource(grid, cfg.seed);
  return load_resource_csv(grid, rc.path, rc.normalize);
}

}  // namespace

bool ResourceConfig::concentrated() const {
  return family == "power" || family == "bangbang";
}

double ResourceConfig::height_at(double d) const {
  if (family == "power") return alpha * std::pow(d, beta);
  if (family == "bangbang") return height;
  throw InvalidArgument("resource family '" + family + "' has no plateau height");
}

SolverOptions SolverConfig::options() const {
  SolverOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.eig.tol = eig_tol;
  o.eig.max_iter = eig_max_iter;
  return o;
}

std::vector<double> ExperimentConfig::d_values() const {
  if (d_grid) return d_grid->values();
  if (d) return {*d};
  return {};
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, "config",
                 {"schema_version", "domain", "grid", "kernel", "resource", "placement", "d", "d_grid", "solver",
                  "boundary_condition", "backend", "epsilon_grid", "seed", "fit_fraction", "threads", "output"});
  ExperimentConfig c;
  read(j, "schema_version", c.schema_version, "config");
  if (c.schema_version != kSchemaVersion) {
    fail("config.schema_version", "unsupported version " + std::to_string(c.schema_version));
  }
  if (j.contains("domain")) {
    const json& o = j["domain"];
    reject_unknown(o, "domain", {"kind", "lo", "hi", "center", "radius"});
    read(o, "kind", c.domain.kind, "domain");
    c.domain.lo = read_vector(o, "lo", c.domain.lo, "domain");
    c.domain.hi = read_vector(o, "hi", c.domain.hi, "domain");
    c.domain.center = read_vector(o, "center", c.domain.center, "domain");
    read(o, "radius", c.domain.radius, "domain");
  }
  if (j.contains("grid")) {
    const json& o = j["grid"];
    reject_unknown(o, "grid", {"cells_per_axis", "min_cells", "cells_per_support", "max_cells"});
    read(o, "cells_per_axis", c.grid.cells_per_axis, "grid");
    read(o, "min_cells", c.grid.min_cells, "grid");
    read(o, "cells_per_support", c.grid.cells_per_support, "grid");
    read(o, "max_cells", c.grid.max_cells, "grid");
  }
  if (j.contains("kernel")) {
    const json& o = j["kernel"];
    reject_unknown(o, "kernel", {"kind", "radius", "sigma", "cutoff", "delta", "slope", "table", "path"});
    read(o, "kind", c.kernel.kind, "kernel");
    read(o, "radius", c.kernel.radius, "kernel");
    read(o, "sigma", c.kernel.sigma, "kernel");
    read(o, "cutoff", c.kernel.cutoff, "kernel");
    read(o, "delta", c.kernel.delta, "kernel");
    read(o, "slope", c.kernel.slope, "kernel");
    read(o, "path", c.kernel.path, "kernel");
    if (o.contains("table")) {
      const json& t = o["table"];
      if (!t.is_array()) fail("kernel.table", "expected an array of [radius, value] pairs");
      for (const auto& row : t) {
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
          fail("kernel.table", "expected an array of [radius, value] pairs");
        }
        c.kernel.table.emplace_back(row[0].get<double>(), row[1].get<double>());
      }
    }
  }
  if (j.contains("resource")) {
    const json& o = j["resource"];
    reject_unknown(o, "resource",
                   {"family", "alpha", "beta", "height", "amplitude", "shape", "path", "normalize"});
    auto& r = c.resource;
    read(o, "family", r.family, "resource");
    read(o, "alpha", r.alpha, "resource");
    read(o, "beta", r.beta, "resource");
    read(o, "height", r.height, "resource");
    read(o, "amplitude", r.amplitude, "resource");
    read(o, "shape", r.shape, "resource");
    read(o, "path", r.path, "resource");
    read(o, "normalize", r.normalize, "resource");
  }
  if (j.contains("placement")) {
    const json& o = j["placement"];
    reject_unknown(o, "placement", {"mode", "x0"});
    read(o, "mode", c.placement.mode, "placement");
    c.placement.x0 = read_vector(o, "x0", c.placement.x0, "placement");
  }
  if (j.contains("d") && !j["d"].is_null()) {
    double d = 0.0;
    read(j, "d", d, "config");
    c.d = d;
  }
  if (j.contains("d_grid") && !j["d_grid"].is_null()) c.d_grid = read_range(j["d_grid"], "d_grid");
  if (j.contains("solver")) {
    const json& o = j["solver"];
    reject_unknown(o, "solver", {"tol", "max_iter", "eig_tol", "eig_max_iter"});
    read(o, "tol", c.solver.tol, "solver");
    read(o, "max_iter", c.solver.max_iter, "solver");
    read(o, "eig_tol", c.solver.eig_tol, "solver");
    read(o, "eig_max_iter", c.solver.eig_max_iter, "solver");
  }
  read(j, "boundary_condition", c.boundary_condition, "config");
  read(j, "backend", c.backend, "config");
  if (j.contains("epsilon_grid")) c.epsilon_grid = read_range(j["epsilon_grid"], "epsilon_grid");
  read(j, "seed", c.seed, "config");
  read(j, "fit_fraction", c.fit_fraction, "config");
  read(j, "threads", c.threads, "config");
  read(j, "output", c.output, "config");
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["domain"] = {{"kind", c.domain.kind},
                 {"lo", c.domain.lo},
                 {"hi", c.domain.hi},
                 {"center", c.domain.center},
                 {"radius", c.domain.radius}};
  j["grid"] = {{"cells_per_axis", c.grid.cells_per_axis},
               {"min_cells", c.grid.min_cells},
               {"cells_per_support", c.grid.cells_per_support},
               {"max_cells", c.grid.max_cells}};
  json table = json::array();
  for (const auto& [r, v] : c.kernel.table) table.push_back({r, v});
  j["kernel"] = {{"kind", c.kernel.kind},   {"radius", c.kernel.radius}, {"sigma", c.kernel.sigma},
                 {"cutoff", c.kernel.cutoff}, {"delta", c.kernel.delta},   {"slope", c.kernel.slope},
                 {"table", table},            {"path", c.kernel.path}};
  const auto& r = c.resource;
  j["resource"] = {{"family", r.family}, {"alpha", r.alpha},         {"beta", r.beta},
                   {"height", r.height}, {"amplitude", r.amplitude}, {"shape", r.shape},
                   {"path", r.path},     {"normalize", r.normalize}};
  j["placement"] = {{"mode", c.placement.mode}, {"x0", c.placement.x0}};
  if (c.d) j["d"] = *c.d;
  if (c.d_grid) j["d_grid"] = range_to_json(*c.d_grid);
  j["solver"] = {{"tol", c.solver.tol},
                 {"max_iter", c.solver.max_iter},
                 {"eig_tol", c.solver.eig_tol},
                 {"eig_max_iter", c.solver.eig_max_iter}};
  j["boundary_condition"] = c.boundary_condition;
  j["backend"] = c.backend;
  j["epsilon_grid"] = range_to_json(c.epsilon_grid);
  j["seed"] = c.seed;
  j["fit_fraction"] = c.fit_fraction;
  j["threads"] = c.threads;
  j["output"] = c.output;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

Domain make_domain(const DomainConfig& c) {
  if (c.kind == "interval") {
    if (c.lo.empty() || c.hi.empty()) throw InvalidArgument("interval needs lo and hi");
    return Domain::interval(c.lo[0], c.hi[0]);
  }
  if (c.kind == "rectangle") {
    if (c.lo.size() != 2 || c.hi.size() != 2) throw InvalidArgument("rectangle needs two-component lo and hi");
    return Domain::rectangle(point_of(c.lo), point_of(c.hi));
  }
  if (c.kind == "disk") {
    if (c.center.size() != 2) throw InvalidArgument("disk needs a two-component center");
    return Domain::disk(point_of(c.center), c.radius);
  }
  throw InvalidArgument("unknown domain kind '" + c.kind + "'");
}

KernelSpec make_kernel(const KernelConfig& c) {
  if (c.kind == "uniform") return KernelSpec::uniform(c.radius);
  if (c.kind == "tent") return KernelSpec::tent(c.radius);
  if (c.kind == "truncated_gaussian") return KernelSpec::truncated_gaussian(c.sigma, c.cutoff);
  if (c.kind == "ring") return KernelSpec::ring(c.delta, c.slope);
  if (c.kind == "tabulated") {
    if (!c.table.empty()) return KernelSpec::tabulated(c.table);
    if (c.path.empty()) throw InvalidArgument("tabulated kernel needs a table or a path");
    return load_tabulated_kernel(c.path);
  }
  throw InvalidArgument("unknown kernel kind '" + c.kind + "'");
}

std::size_t cells_for(const ExperimentConfig& cfg, double d) {
  if (cfg.grid.cells_per_axis > 0) return cfg.grid.cells_per_axis;
  const Domain dom = make_domain(cfg.domain);
  const int dim = dom.dimension();
  const double span = dim == 1 ? dom.hi()[0] - dom.lo()[0]
                               : std::max(dom.hi()[0] - dom.lo()[0], dom.hi()[1] - dom.lo()[1]);
  double n = static_cast<double>(cfg.grid.min_cells);
  const Kernel kernel(make_kernel(cfg.kernel), dim);
  n = std::max(n, std::ceil(4.0 * span / kernel.support_diameter()));
  if (cfg.resource.concentrated()) {
    const double height = cfg.resource.height_at(d);
    const auto cps = static_cast<double>(cfg.grid.cells_per_support);
    double across = 0.0;
    if (dim == 1) {
      across = 1.0 / height;
    } else if (cfg.resource.shape == "block") {
      across = std::sqrt(1.0 / height);
    } else {
      across = 2.0 * concentration_radius(height, 2);
    }
    n = std::max(n, std::ceil(cps * span / across * (1.0 - 1e-12)));
  }
  if (!(n <= static_cast<double>(cfg.grid.max_cells))) {
    std::ostringstream os;
    os << "d = " << d << " needs " << n << " cells per axis, above grid.max_cells = " << cfg.grid.max_cells;
    throw ConfigError(os.str());
  }
  return static_cast<std::size_t>(n);
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  check(c.schema_version == kSchemaVersion, "schema_version must be " + std::to_string(kSchemaVersion));
  std::optional<Domain> dom;
  try {
    dom = make_domain(c.domain);
  } catch (const std::exception& e) {
    errors.push_back(std::string("domain: ") + e.what());
  }
  bool kernel_ok = false;
  try {
    (void)Kernel(make_kernel(c.kernel), dom ? dom->dimension() : 1);
    kernel_ok = true;
  } catch (const std::exception& e) {
    errors.push_back(std::string("kernel: ") + e.what());
  }

  const auto& r = c.resource;
  static const std::set<std::string> families = {"power", "bangbang", "cosine", "random", "csv"};
  check(families.count(r.family) == 1, "resource.family '" + r.family + "' is unknown");
  if (r.family == "power") {
    check(r.alpha > 0.0 && std::isfinite(r.alpha), "resource.alpha must be positive");
    check(std::isfinite(r.beta), "resource.beta must be finite");
  }
  if (r.family == "bangbang") check(r.height > 0.0, "resource.height must be positive");
  if (r.family == "cosine") check(r.amplitude > 0.0 && r.amplitude <= 1.0, "resource.amplitude must lie in (0, 1]");
  if (r.family == "csv") check(!r.path.empty(), "resource.path is required for the csv family");
  check(r.shape == "ball" || r.shape == "block", "resource.shape must be ball or block");

  const auto& pm = c.placement.mode;
  check(pm == "interior" || pm == "boundary" || pm == "explicit", "placement.mode must be interior, boundary or explicit");
  if (pm == "explicit" && dom) {
    check(c.placement.x0.size() >= static_cast<std::size_t>(dom->dimension()) && dom->contains(point_of(c.placement.x0)),
          "placement.x0 must be a point inside the domain");
  }

  if (c.d) check(*c.d > 0.0 && std::isfinite(*c.d), "d must be positive and finite");
  if (c.d_grid) check(valid_range(*c.d_grid), "d_grid needs 0 < min <= max and points >= 1 (points > 1 when min < max)");
  check(valid_range(c.epsilon_grid), "epsilon_grid needs 0 < min <= max and points >= 1");
  check(c.solver.tol > 0.0 && c.solver.max_iter >= 1, "solver.tol must be positive and solver.max_iter >= 1");
  check(c.solver.eig_tol > 0.0 && c.solver.eig_max_iter >= 1,
        "solver.eig_tol must be positive and solver.eig_max_iter >= 1");
  check(c.boundary_condition == "neumann" || c.boundary_condition == "dirichlet",
        "boundary_condition must be neumann or dirichlet");
  check(c.backend == "auto" || c.backend == "dense" || c.backend == "matrix_free" || c.backend == "fft",
        "backend must be auto, dense, matrix_free or fft");
  check(c.fit_fraction > 0.0 && c.fit_fraction <= 1.0, "fit_fraction must lie in (0, 1]");
  check(c.threads >= 1, "threads must be at least 1");
  check(c.grid.cells_per_axis == 0 || c.grid.cells_per_axis >= 2, "grid.cells_per_axis must be 0 (auto) or >= 2");
  check(c.grid.cells_per_support >= 1, "grid.cells_per_support must be positive");
  if (!errors.empty() || !dom || !kernel_ok) return errors;

  // Resolution guards for every requested d, before any solve.
  for (double d : c.d_values()) {
    std::ostringstream where;
    where << "d = " << d << ": ";
    try {
      const std::size_t n = cells_for(c, d);
      const double total = std::pow(static_cast<double>(n), dom->dimension());
      if (total > static_cast<double>(kMaxTotalCells)) {
        errors.push_back(where.str() + "grid of " + std::to_string(n) + " cells per axis is too large");
        continue;
      }
      const Grid grid = build_grid(*dom, n);
      const Kernel kernel(make_kernel(c.kernel), dom->dimension());
      if (kernel.support_diameter() < 4.0 * grid.max_spacing() * (1.0 - 1e-12)) {
        errors.push_back(where.str() + "kernel support is under-resolved on " + std::to_string(n) + " cells");
      }
      if (c.backend == "dense" && grid.size() > DiscreteOperator::dense_limit) {
        errors.push_back(where.str() + "dense backend limited to " + std::to_string(DiscreteOperator::dense_limit) +
                         " cells");
      }
      if (c.backend == "fft" && !grid.is_full()) errors.push_back(where.str() + "fft backend needs an unmasked grid");
      if (r.family != "csv") (void)build_resource(c, grid, d);
    } catch (const std::exception& e) {
      errors.push_back(where.str() + e.what());
    }
  }
  return errors;
}

void require_valid(const ExperimentConfig& cfg) {
  const auto errors = validate(cfg);
  if (errors.empty()) return;
  std::ostringstream os;
  os << "invalid configuration:";
  for (const auto& e : errors) os << "\n  " << e;
  throw ConfigError(os.str(), errors);
}

Problem make_problem(const ExperimentConfig& cfg, double d) {
  const Grid grid = build_grid(make_domain(cfg.domain), cells_for(cfg, d));
  Problem p;
  p.op = std::make_shared<const DiscreteOperator>(build_operator(cfg, grid));
  p.m = build_resource(cfg, p.op->grid(), d);
  return p;
}

Family make_family(const ExperimentConfig& cfg) {
  struct Cache {
    std::mutex mutex;
    std::map<std::size_t, std::shared_ptr<const DiscreteOperator>> ops;
  };
  auto cache = std::make_shared<Cache>();
  Family f;
  std::ostringstream os;
  os << cfg.resource.family;
  if (cfg.resource.family == "power") os << "(alpha=" << cfg.resource.alpha << ", beta=" << cfg.resource.beta << ")";
  if (cfg.resource.family == "bangbang") os << "(height=" << cfg.resource.height << ")";
  if (cfg.resource.concentrated()) os << " placement=" << cfg.placement.mode;
  os << " kernel=" << make_kernel(cfg.kernel).name();
  f.descriptor = os.str();
  f.make = [cfg, cache](double d) {
    const std::size_t n = cells_for(cfg, d);
    std::shared_ptr<const DiscreteOperator> op;
    {
      std::lock_guard lock(cache->mutex);
      auto& slot = cache->ops[n];
      if (!slot) {
        const Grid grid = build_grid(make_domain(cfg.domain), n);
        slot = std::make_shared<const DiscreteOperator>(build_operator(cfg, grid));
      }
      op = slot;
    }
    Problem p;
    p.op = op;
    p.m = build_resource(cfg, op->grid(), d);
    return p;
  };
  return f;
}

}  // namespace nld
