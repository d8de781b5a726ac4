#pragma once

// Scenario configuration and the batch commands behind the `fracnull`
// executable. Kept in the library so the commands are unit-testable without
// spawning processes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include "json.hpp"

#include "fracnull/control.hpp"
#include "fracnull/errors.hpp"
#include "fracnull/fode.hpp"
#include "fracnull/inclusion.hpp"
#include "fracnull/mesh.hpp"
#include "fracnull/mlfun.hpp"
#include "fracnull/semigroup.hpp"

namespace fracnull::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kInfeasible = 2,
  kNonConvergence = 3,
  kVerifyFailed = 4,
};

/// Malformed or inconsistent configuration; the message starts with the
/// offending `file:line`.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---- configuration ----------------------------------------------------------

struct RunConfig {
  std::string scenario = "diffusion";
  std::uint64_t seed = 20240601;
  int probes = 50;
  std::vector<int> cascade;  // empty: top level only

  double alpha = 0.75;
  double alpha1 = -1.0;  // negative: alpha / 2
  double p = 2.0;
  double nu = 1.0;
  int n_x = 64;
  int n_t = 256;
  std::string rule = "rectangle";

  std::string generator = "diffusion";
  double lambda = -1.0;
  double a0 = 1.0;
  double a1 = 1.0;

  std::string control_map = "identity";
  double window_lo = 0.0;
  double window_hi = std::numbers::pi;
  double terminal_tol = 1e-5;  // relative to ‖x₀‖

  std::string initial = "sin";
  double amplitude = 1.0;

  std::string band = "arctanband";
  double m = 1.0;
  double envelope = 1.0;
  double band_value = 0.0;
  std::string b_profile = "cos";

  std::string nonlocal = "zero";
  double nl_c = 0.0;
  double nl_t1 = 1.0;
  double nl_radius = 0.0;
  bool nl_override = false;

  double tol = 1e-11;
  int max_iter = 50;
  std::string selection = "midpoint";
  std::string init_selection = "midpoint";

  double horizon = 2.0;  // multiple of ν
  double threshold = 1e-3;
  double memory_terminal_tol = 1e-6;

  std::vector<std::string> checks;
  bool checks_given = false;

  std::map<std::string, std::string> origin;  // "section.key" -> file:line
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double to_double(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a finite number, got '" + v + "'");
  }
}

inline int to_int(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected true/false, got '" + v + "'");
}

inline std::string one_of(const std::string& v, std::initializer_list<const char*> allowed,
                          const std::string& where) {
  for (const char* a : allowed) {
    if (v == a) return v;
  }
  std::string msg = where + ": '" + v + "' is not one of";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw ConfigError(msg);
}

}  // namespace detail

/// Scenario defaults. `scalar` is the closed-form linear case, `uncontrolled`
/// the same with 𝔹 = 0, `memory` the scalar case used for the post-horizon
/// extension.
inline void apply_preset(RunConfig& c, const std::string& name, const std::string& where) {
  if (name == "diffusion") {
    c = RunConfig{};
    c.cascade = {8, 16, 32, 64};
    return;
  }
  if (name == "scalar" || name == "uncontrolled" || name == "memory") {
    c = RunConfig{};
    c.scenario = name;
    c.n_x = 1;
    c.generator = "scalar";
    c.lambda = -1.0;
    c.alpha = 0.6;
    c.initial = "const";
    c.band = "zero";
    c.m = 0.0;
    c.b_profile = "const";
    c.terminal_tol = 1e-8;
    if (name == "uncontrolled") c.control_map = "zero";
    if (name == "memory") {
      c.alpha = 0.5;
      c.p = 3.0;
      c.rule = "trapezoid";
    }
    return;
  }
  throw ConfigError(where + ": unknown scenario '" + name +
                    "' (scalar, diffusion, memory, uncontrolled)");
}

/// Assigns one `section.key`; unknown keys and bad values are errors.
inline void set_key(RunConfig& c, const std::string& section, const std::string& key,
                    const std::string& v, const std::string& where) {
  using namespace detail;
  const std::string k = section + "." + key;
  c.origin[k] = where;
  auto num = [&](double& dst) { dst = to_double(v, where); };
  auto integer = [&](int& dst) { dst = to_int(v, where); };

  if (k == "run.scenario") return;  // handled before all other keys
  if (k == "run.seed") {
    c.seed = static_cast<std::uint64_t>(to_double(v, where));
  } else if (k == "run.probes") {
    integer(c.probes);
  } else if (k == "run.cascade") {
    c.cascade.clear();
    for (const auto& s : split_list(v)) c.cascade.push_back(to_int(s, where));
  } else if (k == "model.alpha") {
    num(c.alpha);
  } else if (k == "model.alpha1") {
    num(c.alpha1);
  } else if (k == "model.p") {
    num(c.p);
  } else if (k == "model.nu") {
    num(c.nu);
  } else if (k == "model.n_x") {
    integer(c.n_x);
  } else if (k == "model.n_t") {
    integer(c.n_t);
  } else if (k == "model.rule") {
    c.rule = one_of(v, {"rectangle", "trapezoid"}, where);
  } else if (k == "generator.kind") {
    c.generator = one_of(v, {"scalar", "diffusion", "zero"}, where);
  } else if (k == "generator.lambda") {
    num(c.lambda);
  } else if (k == "generator.a0") {
    num(c.a0);
  } else if (k == "generator.a1") {
    num(c.a1);
  } else if (k == "control.map") {
    c.control_map = one_of(v, {"identity", "zero", "window"}, where);
  } else if (k == "control.window_lo") {
    num(c.window_lo);
  } else if (k == "control.window_hi") {
    num(c.window_hi);
  } else if (k == "control.terminal_tol") {
    num(c.terminal_tol);
  } else if (k == "initial.kind") {
    c.initial = one_of(v, {"const", "sin", "bump"}, where);
  } else if (k == "initial.amplitude") {
    num(c.amplitude);
  } else if (k == "band.preset") {
    c.band = one_of(v, {"zero", "degenerate", "constband", "sinband", "arctanband"}, where);
  } else if (k == "band.m") {
    num(c.m);
  } else if (k == "band.envelope") {
    num(c.envelope);
  } else if (k == "band.value") {
    num(c.band_value);
  } else if (k == "band.b") {
    c.b_profile = one_of(v, {"const", "cos"}, where);
  } else if (k == "nonlocal.kind") {
    c.nonlocal = one_of(v, {"zero", "point", "box"}, where);
  } else if (k == "nonlocal.c") {
    num(c.nl_c);
  } else if (k == "nonlocal.t1") {
    num(c.nl_t1);
  } else if (k == "nonlocal.radius") {
    num(c.nl_radius);
  } else if (k == "nonlocal.allow_linear_growth") {
    c.nl_override = to_bool(v, where);
  } else if (k == "solver.tol") {
    num(c.tol);
  } else if (k == "solver.max_iter") {
    integer(c.max_iter);
  } else if (k == "solver.selection") {
    c.selection = one_of(v, {"midpoint", "lower", "upper", "project_previous"}, where);
  } else if (k == "solver.init_selection") {
    c.init_selection = one_of(v, {"midpoint", "lower", "upper"}, where);
  } else if (k == "memory.horizon") {
    num(c.horizon);
  } else if (k == "memory.threshold") {
    num(c.threshold);
  } else if (k == "memory.terminal_tol") {
    num(c.memory_terminal_tol);
  } else if (k == "verify.checks") {
    c.checks = split_list(v);
    c.checks_given = true;
  } else {
    throw ConfigError(where + ": unknown key '" + key + "' in section [" + section + "]");
  }
}

/// Range checks that cannot be expressed per key; messages name the key's
/// origin when it was set explicitly.
inline void validate(const RunConfig& c) {
  auto at = [&](const std::string& k) {
    auto it = c.origin.find(k);
    return it == c.origin.end() ? std::string("<preset>") : it->second;
  };
  try {
    FracOrder::make(c.alpha, c.p, c.alpha1 > 0 ? std::optional<double>(c.alpha1) : std::nullopt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(at(c.origin.count("model.p") ? "model.p" : "model.alpha") + ": " + e.what());
  }
  if (!(c.nu > 0.0)) throw ConfigError(at("model.nu") + ": nu must be positive");
  if (c.n_x < 1) throw ConfigError(at("model.n_x") + ": n_x must be >= 1");
  if (c.n_x == 1 && c.generator == "diffusion") {
    throw ConfigError(at("model.n_x") + ": the diffusion generator needs n_x >= 2");
  }
  if (c.n_t < 1) throw ConfigError(at("model.n_t") + ": n_t must be >= 1");
  if (c.probes < 0) throw ConfigError(at("run.probes") + ": probes must be >= 0");
  for (int n : c.cascade) {
    if (n < 1 || n > c.n_x) throw ConfigError(at("run.cascade") + ": levels must lie in [1, n_x]");
  }
  for (size_t i = 1; i < c.cascade.size(); ++i) {
    if (c.cascade[i] <= c.cascade[i - 1]) {
      throw ConfigError(at("run.cascade") + ": levels must be increasing");
    }
  }
  if (!(c.tol > 0.0)) throw ConfigError(at("solver.tol") + ": tol must be positive");
  if (c.max_iter < 1) throw ConfigError(at("solver.max_iter") + ": max_iter must be >= 1");
  if (!(c.terminal_tol > 0.0)) throw ConfigError(at("control.terminal_tol") + ": must be positive");
  if (!(c.horizon > 1.0)) throw ConfigError(at("memory.horizon") + ": horizon must exceed 1");
  if (c.m < 0.0) throw ConfigError(at("band.m") + ": m must be >= 0");
  if (c.envelope < 0.0) throw ConfigError(at("band.envelope") + ": envelope must be >= 0");
  if (c.nonlocal != "zero") {
    if (!(std::abs(c.nl_c) < 1.0)) throw ConfigError(at("nonlocal.c") + ": need |c| < 1");
    if (c.nl_c != 0.0 && !c.nl_override) {
      throw ConfigError(at("nonlocal.c") +
                        ": c != 0 violates the sublinear growth condition; set "
                        "allow_linear_growth = true to accept it");
    }
    if (c.nl_radius < 0.0) throw ConfigError(at("nonlocal.radius") + ": radius must be >= 0");
  }
}

/// Parses the sectioned key-value text. Later assignments come from
/// `overrides` ("section.key=value"). `default_scenario` seeds the preset
/// unless the file or an override names one.
inline RunConfig parse_config(std::istream& is, const std::string& name,
                              const std::vector<std::string>& overrides,
                              const std::string& default_scenario) {
  struct Item {
    std::string section, key, value, where;
  };
  std::vector<Item> items;
  std::map<std::string, std::string> seen;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      static const char* kSections[] = {"run",     "model", "generator", "control", "initial",
                                        "band",    "nonlocal", "solver", "memory",  "verify"};
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections)) {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of any section");
    Item it{section, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), where};
    if (it.key.empty()) throw ConfigError(where + ": empty key");
    const std::string full = section + "." + it.key;
    if (seen.count(full)) {
      throw ConfigError(where + ": duplicate key '" + it.key + "' (first set at " + seen[full] + ")");
    }
    seen[full] = where;
    items.push_back(it);
  }
  for (size_t i = 0; i < overrides.size(); ++i) {
    const std::string where = "--override #" + std::to_string(i + 1);
    const std::string& o = overrides[i];
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError(where + ": expected section.key=value, got '" + o + "'");
    }
    items.push_back({o.substr(0, dot), detail::trim(o.substr(dot + 1, eq - dot - 1)),
                     detail::trim(o.substr(eq + 1)), where});
  }

  RunConfig c;
  std::string scenario = default_scenario;
  std::string scen_where = "<command>";
  for (const Item& it : items) {
    if (it.section == "run" && it.key == "scenario") {
      scenario = it.value;
      scen_where = it.where;
    }
  }
  apply_preset(c, scenario, scen_where);
  c.scenario = scenario;
  for (const Item& it : items) set_key(c, it.section, it.key, it.value, it.where);
  validate(c);
  return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                             const std::string& default_scenario) {
  if (path.empty()) {
    std::istringstream empty;
    return parse_config(empty, "<none>", overrides, default_scenario);
  }
  std::ifstream f(path);
  if (!f) throw ConfigError(path + ":0: cannot open config file");
  return parse_config(f, path, overrides, default_scenario);
}

// ---- scenario assembly ------------------------------------------------------

struct Scenario {
  SpatialGrid grid;
  TimeMesh mesh;
  Generator gen;
  ControlMap B;
  GridFunction x0;
  BandNonlinearity band;
  NonlocalMap g;
  ProductRule rule;
  FixedPointOptions fp;
  double alpha1;
};

inline SelectionRule parse_rule(const std::string& s) {
  if (s == "lower") return SelectionRule::Lower;
  if (s == "upper") return SelectionRule::Upper;
  if (s == "project_previous") return SelectionRule::ProjectPrevious;
  return SelectionRule::Midpoint;
}

inline Scenario build(const RunConfig& c, double horizon_factor = 1.0) {
  const SpatialGrid grid =
      c.n_x == 1 ? SpatialGrid::point(c.p) : SpatialGrid::trapezoid(c.n_x, c.p);
  const double t_max = c.nu * horizon_factor;

  Generator gen = Generator::zero(c.n_x);
  if (c.generator == "scalar") {
    gen = Generator::scalar(c.lambda, c.n_x, t_max);
  } else if (c.generator == "diffusion") {
    GridFunction a(c.n_x);
    for (int i = 0; i < c.n_x; ++i) a(i) = c.a0 + c.a1 * grid.node(i) / std::numbers::pi;
    gen = Generator::diagonal_field(a, t_max);
  }

  ControlMap B = ControlMap::identity(c.n_x);
  if (c.control_map == "zero") B = ControlMap::zero(c.n_x);
  if (c.control_map == "window") B = ControlMap::window(grid, c.window_lo, c.window_hi);

  GridFunction x0(c.n_x);
  for (int i = 0; i < c.n_x; ++i) {
    const double tau = grid.node(i);
    if (c.initial == "const") {
      x0(i) = c.amplitude;
    } else if (c.initial == "sin") {
      x0(i) = c.amplitude * std::sin(tau);
    } else {
      x0(i) = c.amplitude * std::exp(-4.0 * (tau - 0.5 * std::numbers::pi) *
                                     (tau - 0.5 * std::numbers::pi));
    }
  }

  const GridFunction env = GridFunction::Constant(c.n_x, c.envelope);
  BandNonlinearity band = BandNonlinearity::zero(grid);
  if (c.band == "degenerate") band = BandNonlinearity::degenerate(grid, c.band_value, c.m);
  if (c.band == "constband") band = BandNonlinearity::constband(grid, c.m, env);
  if (c.band == "sinband") band = BandNonlinearity::sinband(grid, c.m, env);
  if (c.band == "arctanband") band = BandNonlinearity::arctanband(grid, c.m, env);
  if (c.band != "zero" && c.b_profile == "cos") {
    const double m = c.m;
    band.b = [m](double t, double) { return m * std::cos(t); };
  }

  const TimeMesh mesh = TimeMesh::uniform(c.nu, c.n_t);
  const int node = std::clamp(static_cast<int>(std::lround(c.nl_t1 / c.nu * c.n_t)), 0, c.n_t);
  NonlocalMap g = NonlocalMap::none();
  if (c.nonlocal == "point") g = NonlocalMap::point_eval(c.nl_c, node, c.nl_override);
  if (c.nonlocal == "box") g = NonlocalMap::box(c.nl_c, node, c.nl_radius, c.nl_override);

  FixedPointOptions fp;
  fp.tol = c.tol;
  fp.max_iter = c.max_iter;
  fp.rule = parse_rule(c.selection);
  fp.init_rule = parse_rule(c.init_selection);

  return Scenario{grid, mesh, gen, B, x0, band, g,
                  c.rule == "trapezoid" ? ProductRule::Trapezoid : ProductRule::Rectangle, fp,
                  c.alpha1 > 0 ? c.alpha1 : 0.5 * c.alpha};
}

// ---- reports ----------------------------------------------------------------

inline std::string sci(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*e", digits, x);
  return buf;
}

/// Human-readable lines plus one JSON object per machine record.
class Report {
 public:
  void line(const std::string& s) { text_ += s + "\n"; }
  void kv(const std::string& k, const std::string& v) { line(k + ": " + v); }
  void kv(const std::string& k, double v) { kv(k, sci(v)); }
  void record(nlohmann::json j) { jsonl_ += j.dump() + "\n"; }

  const std::string& text() const { return text_; }
  const std::string& jsonl() const { return jsonl_; }

  void write(const std::filesystem::path& dir) const {
    std::ofstream(dir / "report.txt") << text_;
    std::ofstream(dir / "report.jsonl") << jsonl_;
  }

 private:
  std::string text_;
  std::string jsonl_;
};

inline void write_csv(const std::filesystem::path& dir, const Trajectory& q, const ControlSignal* u) {
  std::ofstream tf(dir / "trajectory.csv");
  write_trajectory(tf, q);
  if (u) {
    std::ofstream uf(dir / "control.csv");
    write_control(uf, *u, q.mesh);
  }
}

/// Direct and D-form a-priori bounds for a controlled trajectory.
struct AprioriCheck {
  AprioriConstants constants;
  double eta_norm = 0.0;
  double sup_state = 0.0;
  double direct_bound = 0.0;  // M‖x₀+w‖ + (M/Γ(α))(κ₁‖η‖ + κ₂‖𝔹‖‖u‖)
  double d_bound = 0.0;       // D₁ + D₂‖η‖ + D₃‖w‖
  double radius = 0.0;        // N₀
  bool ok = false;
};

inline AprioriCheck apriori_check(const ControlProblem& cp, const Scenario& s, double alpha1,
                                  const Trajectory& q, const GridFunction& w, double u_norm,
                                  double sup_over_iterates) {
  AprioriCheck r;
  const double alpha = cp.alpha();
  const double M = cp.generator().bound();
  const double nB = cp.B().norm();
  const double x0n = lp_norm(s.x0, cp.grid());
  r.constants = apriori(alpha, alpha1, cp.p(), cp.mesh().nu(), M, nB, cp.inverse().inverse_norm(),
                        x0n);
  const auto eta = eta_growth_check(s.band, cp.grid(), alpha, alpha1, cp.mesh().nu(), {1.0});
  r.eta_norm = eta.front().eta_norm;
  r.sup_state = std::max(sup_over_iterates, fracnull::detail::sup_norm_in_time(q, cp.grid()));
  const double ga = std::tgamma(alpha);
  const double wn = lp_norm(w, cp.grid());
  r.direct_bound = M * lp_norm(s.x0 + w, cp.grid()) +
                   (M / ga) * (r.constants.kappa1 * r.eta_norm + r.constants.kappa2 * nB * u_norm);
  r.d_bound = r.constants.D1 + r.constants.D2 * r.eta_norm + r.constants.D3 * wn;
  r.radius = apriori_radius(r.constants, r.eta_norm, s.g, cp.grid());
  const double slack = 1e-12 * (1.0 + r.d_bound);
  r.ok = r.sup_state <= r.direct_bound + slack && r.sup_state <= r.d_bound + slack &&
         r.sup_state <= r.radius + slack;
  return r;
}

inline void report_apriori(Report& rep, const AprioriCheck& a, const std::string& tag) {
  rep.kv("kappa1", a.constants.kappa1);
  rep.kv("kappa2", a.constants.kappa2);
  rep.kv("D1", a.constants.D1);
  rep.kv("D2", a.constants.D2);
  rep.kv("D3", a.constants.D3);
  rep.kv("apriori sup_t |q(t)|", a.sup_state);
  rep.kv("apriori direct bound", a.direct_bound);
  rep.kv("apriori D-form bound", a.d_bound);
  rep.kv("apriori radius N0", a.radius);
  rep.kv("apriori check", a.ok ? "PASS" : "FAIL");
  rep.record({{"record", "apriori"},
              {"run", tag},
              {"kappa1", a.constants.kappa1},
              {"kappa2", a.constants.kappa2},
              {"D1", a.constants.D1},
              {"D2", a.constants.D2},
              {"D3", a.constants.D3},
              {"sup_state", a.sup_state},
              {"direct_bound", a.direct_bound},
              {"d_bound", a.d_bound},
              {"radius", a.radius},
              {"pass", a.ok}});
}

// ---- commands ---------------------------------------------------------------

struct CommandResult {
  int exit_code = kOk;
  Report report;
  std::optional<Trajectory> trajectory;
  std::optional<ControlSignal> control;
  std::string message;  // one-line summary for stderr
};

inline void header(Report& rep, const std::string& cmd, const RunConfig& c) {
  rep.line("fracnull " + cmd);
  rep.kv("scenario", c.scenario);
  rep.kv("alpha", c.alpha);
  rep.kv("p", c.p);
  rep.kv("nu", c.nu);
  rep.kv("n_x", std::to_string(c.n_x));
  rep.kv("n_t", std::to_string(c.n_t));
  rep.record({{"record", "config"},
              {"command", cmd},
              {"scenario", c.scenario},
              {"alpha", c.alpha},
              {"p", c.p},
              {"nu", c.nu},
              {"n_x", c.n_x},
              {"n_t", c.n_t},
              {"seed", c.seed}});
}

/// γ̂ on the canonical basis and `probes` random directions. Returns false
/// (and fills the report) when W has no range.
inline bool controllability_gate(const ControlProblem& cp, const RunConfig& c, Report& rep,
                                 GammaEstimate* out = nullptr) {
  const GammaEstimate est = estimate_gamma(cp.W(), cp.Zstar(), c.probes, c.seed);
  rep.kv("gamma_hat (estimate)", est.gamma);
  rep.kv("gamma probes used", std::to_string(est.used));
  rep.kv("W rank", std::to_string(cp.inverse().rank()));
  rep.record({{"record", "gamma"},
              {"gamma_hat", est.gamma},
              {"used", est.used},
              {"skipped", est.skipped},
              {"rank", cp.inverse().rank()}});
  if (out) *out = est;
  return est.gamma > 0.0 && cp.inverse().rank() > 0;
}

inline int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const InfeasibleError*>(&e)) return kInfeasible;
  if (dynamic_cast<const PreconditionError*>(&e)) return kInfeasible;
  if (dynamic_cast<const NonConvergenceError*>(&e)) return kNonConvergence;
  if (dynamic_cast<const AccuracyError*>(&e)) return kNonConvergence;
  return kConfigError;
}

/// Null control of the configured scenario at full projection level.
inline CommandResult cmd_synth(const RunConfig& c) {
  CommandResult res;
  header(res.report, "synth", c);
  const Scenario s = build(c);
  ControlProblem cp(s.gen, c.alpha, s.B, s.mesh, s.grid, c.p, s.rule);
  if (!controllability_gate(cp, c, res.report)) {
    res.exit_code = kInfeasible;
    res.message = "gamma_hat = 0: the pair (A, B) is not null controllable on this mesh";
    res.report.kv("status", "INFEASIBLE");
    return res;
  }
  const FixedPointResult r = galerkin_fixed_point(cp, s.x0, s.band, s.g, c.n_x, s.fp);
  const double x0n = lp_norm(s.x0, s.grid);
  res.report.kv("iterations", std::to_string(r.iterations));
  res.report.kv("control norm L^p", r.control_norm);
  res.report.kv("terminal norm", r.terminal_norm);
  res.report.kv("selection violation", r.membership.violation);
  res.report.record({{"record", "synth"},
                     {"iterations", r.iterations},
                     {"control_norm", r.control_norm},
                     {"terminal_norm", r.terminal_norm},
                     {"x0_norm", x0n},
                     {"membership_violation", r.membership.violation}});
  report_apriori(res.report, apriori_check(cp, s, s.alpha1, r.q, r.w, r.control_norm, r.sup_state),
                 "synth");
  const bool ok = r.terminal_norm <= c.terminal_tol * std::max(x0n, 1e-300) && r.membership.ok;
  res.exit_code = ok ? kOk : kInfeasible;
  res.report.kv("status", ok ? "OK" : "TERMINAL TOLERANCE MISSED");
  res.message = "terminal norm " + sci(r.terminal_norm, 3);
  res.trajectory = r.q;
  res.control = r.u;
  return res;
}

/// Outcome of the diffusion demo, shared with the acceptance harness.
struct DiffusionOutcome {
  CascadeReport cascade;
  GammaEstimate gamma;
  double inverse_norm = 0.0;
  double x0_norm = 0.0;
  std::vector<EtaRow> eta;
  std::optional<AprioriCheck> apriori;
  bool terminal_ok = false;
  bool monotone_ok = false;
  bool membership_ok = false;
};

inline DiffusionOutcome run_diffusion(const RunConfig& c, Report& rep) {
  DiffusionOutcome out;
  const Scenario s = build(c);
  ControlProblem cp(s.gen, c.alpha, s.B, s.mesh, s.grid, c.p, s.rule);
  if (!controllability_gate(cp, c, rep, &out.gamma)) {
    throw PreconditionError("gamma_hat = 0: the pair (A, B) is not null controllable");
  }
  out.inverse_norm = cp.inverse().inverse_norm();
  out.x0_norm = lp_norm(s.x0, s.grid);
  rep.kv("inverse norm |W~^-1|", out.inverse_norm);
  rep.kv("|x0|", out.x0_norm);

  std::vector<int> levels = c.cascade.empty() ? std::vector<int>{c.n_x} : c.cascade;
  out.cascade = cascade(cp, s.x0, s.band, s.g, levels, s.fp);
  rep.line("cascade: n iterations |q_n(nu)| defect |full terminal| |q_n - q_top|_inf |u| status");
  for (const CascadeRow& r : out.cascade.rows) {
    rep.line("  " + std::to_string(r.n) + " " + std::to_string(r.iterations) + " " +
             sci(r.terminal_norm, 3) + " " + sci(r.defect_norm, 3) + " " +
             sci(r.full_terminal, 3) + " " + sci(r.distance_to_top, 3) + " " +
             sci(r.control_norm, 4) + " " + (r.ok ? "ok" : "FAILED: " + r.error));
    rep.record({{"record", "cascade"},
                {"n", r.n},
                {"ok", r.ok},
                {"error", r.error},
                {"iterations", r.iterations},
                {"terminal_norm", r.terminal_norm},
                {"defect_norm", r.defect_norm},
                {"full_terminal", r.full_terminal},
                {"distance_to_top", r.distance_to_top},
                {"control_norm", r.control_norm},
                {"membership_violation", r.membership_violation}});
  }
  rep.line("note: weak and strong convergence coincide on the finite grid; terminal and "
           "Cauchy checks are strong.");

  const CascadeRow& top = out.cascade.rows.back();
  out.terminal_ok = top.ok && top.n == c.n_x && top.terminal_norm <= c.terminal_tol * out.x0_norm;
  out.monotone_ok = true;
  out.membership_ok = true;
  double prev = -1.0;
  for (const CascadeRow& r : out.cascade.rows) {
    if (!r.ok) {
      out.monotone_ok = out.membership_ok = false;
      continue;
    }
    out.membership_ok = out.membership_ok && r.membership_violation <= 1e-10;
    if (prev >= 0.0) {
      const double floor = std::max(prev, 1e-12 * out.x0_norm);
      out.monotone_ok = out.monotone_ok && r.terminal_norm <= 1.1 * floor;
    }
    prev = r.terminal_norm;
  }

  std::vector<double> Ns;
  for (double N = 1.0; N <= 1024.0; N *= 2.0) Ns.push_back(N);
  out.eta = eta_growth_check(s.band, s.grid, c.alpha, s.alpha1, c.nu, Ns);
  rep.line("eta growth: N eta |eta|_{L^{1/alpha1}} statistic");
  for (const EtaRow& e : out.eta) {
    rep.line("  " + sci(e.N, 1) + " " + sci(e.eta, 4) + " " + sci(e.eta_norm, 4) + " " +
             sci(e.statistic, 4));
    rep.record({{"record", "eta"}, {"N", e.N}, {"eta", e.eta}, {"statistic", e.statistic}});
  }

  if (!out.cascade.results.empty() && top.ok) {
    const FixedPointResult& r = out.cascade.results.back();
    double sup_all = 0.0;
    for (const FixedPointResult& l : out.cascade.results) sup_all = std::max(sup_all, l.sup_state);
    out.apriori = apriori_check(cp, s, s.alpha1, r.q, r.w, r.control_norm, sup_all);
    report_apriori(rep, *out.apriori, "demo-diffusion");
  }
  return out;
}

inline CommandResult cmd_demo_diffusion(const RunConfig& c) {
  CommandResult res;
  header(res.report, "demo-diffusion", c);
  const DiffusionOutcome out = run_diffusion(c, res.report);
  const CascadeRow& top = out.cascade.rows.back();
  res.report.kv("top-level terminal norm", top.terminal_norm);
  res.report.kv("terminal within tolerance", out.terminal_ok ? "yes" : "no");
  res.report.kv("terminal norms non-increasing (10% slack)", out.monotone_ok ? "yes" : "no");
  res.report.kv("selection membership", out.membership_ok ? "yes" : "no");
  res.report.record({{"record", "summary"},
                     {"terminal_ok", out.terminal_ok},
                     {"monotone_ok", out.monotone_ok},
                     {"membership_ok", out.membership_ok},
                     {"top_terminal", top.terminal_norm}});
  if (!top.ok) {
    res.exit_code = top.error.find("no convergence") != std::string::npos ? kNonConvergence
                                                                          : kInfeasible;
    res.message = "top level failed: " + top.error;
  } else {
    res.exit_code = out.terminal_ok ? kOk : kInfeasible;
    res.message = "top-level terminal norm " + sci(top.terminal_norm, 3);
    res.trajectory = out.cascade.results.back().q;
    res.control = out.cascade.results.back().u;
  }
  return res;
}

/// Independent check of the post-horizon state: S_α(t)x₀ plus the memory of
/// the piecewise-constant control, each cell integrated adaptively.
inline GridFunction memory_tail_oracle(const Generator& gen, double alpha, const GridFunction& x0,
                                       const GridSeries& u, const TimeMesh& mesh, double t) {
  using boost::math::quadrature::gauss_kronrod;
  GridFunction q(x0.size());
  const Eigen::VectorXd lam = gen.eigenvalues();
  for (int i = 0; i < x0.size(); ++i) {
    double v = mittag_leffler(alpha, 1.0, lam(i) * std::pow(t, alpha)) * x0(i);
    auto k = [&](double s) {
      const double l = t - s;
      return std::pow(l, alpha - 1.0) * mittag_leffler(alpha, alpha, lam(i) * std::pow(l, alpha));
    };
    for (int j = 0; j < mesh.cells(); ++j) {
      if (u(i, j) == 0.0) continue;
      v += u(i, j) * gauss_kronrod<double, 31>::integrate(k, mesh.t(j), mesh.t(j + 1), 8, 1e-12);
    }
    q(i) = v;
  }
  return q;
}

struct MemoryOutcome {
  Trajectory extended;
  ControlSignal u;
  double terminal = 0.0;
  double resurrection = 0.0;
  double t_peak = 0.0;
  double oracle = 0.0;
  double oracle_rel = 0.0;
  bool ok = false;
};

inline MemoryOutcome run_memory(const RunConfig& c, Report& rep) {
  if (c.band != "zero" || c.nonlocal != "zero") {
    const auto it = c.origin.find(c.band != "zero" ? "band.preset" : "nonlocal.kind");
    throw ConfigError((it == c.origin.end() ? std::string("<preset>") : it->second) +
                      ": demo-memory needs the linear scenario (band = zero, nonlocal = zero)");
  }
  const Scenario s = build(c, c.horizon);
  ControlProblem cp(s.gen, c.alpha, s.B, s.mesh, s.grid, c.p, s.rule);
  if (!controllability_gate(cp, c, rep)) {
    throw PreconditionError("gamma_hat = 0: the pair (A, B) is not null controllable");
  }
  const ControlResult r = null_control(cp, s.x0, GridSeries::Zero(c.n_x, c.n_t));
  const GridSeries bu = s.B.apply_series(r.u.values);
  Trajectory ext = memory_tail_extend(s.gen, c.alpha, s.x0, bu, s.mesh, c.horizon * c.nu, s.rule);
  MemoryOutcome out{ext, r.u};
  out.terminal = lp_norm(ext.states.col(c.n_t), s.grid);
  int kpk = c.n_t + 1;
  for (int k = c.n_t + 1; k < ext.nodes(); ++k) {
    const double v = lp_norm(ext.states.col(k), s.grid);
    if (v > out.resurrection) {
      out.resurrection = v;
      kpk = k;
    }
  }
  out.t_peak = ext.mesh.t(kpk);
  out.oracle = lp_norm(memory_tail_oracle(s.gen, c.alpha, s.x0, bu, s.mesh, out.t_peak), s.grid);
  out.oracle_rel = std::abs(out.oracle - out.resurrection) / std::max(out.oracle, 1e-300);
  out.ok = out.terminal <= c.memory_terminal_tol && out.resurrection >= c.threshold;

  rep.kv("control norm L^p", r.control_norm);
  rep.kv("|q(nu)|", out.terminal);
  rep.kv("max |q(t)| on (nu, horizon]", out.resurrection);
  rep.kv("attained at t", out.t_peak);
  rep.kv("quadrature oracle at that t", out.oracle);
  rep.kv("oracle relative discrepancy", out.oracle_rel);
  rep.line("note: for alpha = 1 the kernel (t-s)^0 T(t-s) transports q(nu) = 0 forward "
           "unchanged, so the tail vanishes identically; for alpha < 1 the memory of the "
           "control on [0, nu] keeps forcing the state after nu.");
  rep.record({{"record", "memory"},
              {"control_norm", r.control_norm},
              {"terminal", out.terminal},
              {"resurrection", out.resurrection},
              {"t_peak", out.t_peak},
              {"oracle", out.oracle},
              {"oracle_rel", out.oracle_rel},
              {"threshold", c.threshold},
              {"partial_success", out.terminal <= c.memory_terminal_tol},
              {"full_failure", out.resurrection >= c.threshold}});
  return out;
}

inline CommandResult cmd_demo_memory(const RunConfig& c) {
  CommandResult res;
  header(res.report, "demo-memory", c);
  MemoryOutcome out = run_memory(c, res.report);
  res.report.kv("status", out.ok ? "partial null control reached, state resurrects after nu"
                                 : "dichotomy not observed");
  res.exit_code = out.ok ? kOk : kInfeasible;
  res.message = "resurrection " + sci(out.resurrection, 3) + " after |q(nu)| = " +
                sci(out.terminal, 3);
  res.trajectory = std::move(out.extended);
  res.control = std::move(out.u);
  return res;
}

// ---- verification suite -----------------------------------------------------

struct CheckOutcome {
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

using CheckFn = std::function<CheckOutcome(bool inject_fault)>;

inline CheckOutcome le(double value, double tol) { return {value, tol, value <= tol}; }

namespace checks {

inline CheckOutcome mlfun(bool) {
  double err = 0.0;
  for (double a : {0.3, 0.5, 0.7, 0.9}) err = std::max(err, std::abs(mittag_leffler(a, 1.0, 0.0) - 1.0));
  for (double z : {-3.0, -0.5, 0.7, 2.0}) {
    err = std::max(err, std::abs(mittag_leffler(1.0, 1.0, z) - std::exp(z)) / std::exp(z));
  }
  for (double x : {0.5, 2.0, 5.0}) {
    const double ref = std::exp(x * x) * std::erfc(x);
    err = std::max(err, std::abs(mittag_leffler(0.5, 1.0, -x) - ref) / ref);
  }
  return le(err, 1e-12);
}

inline CheckOutcome density(bool) {
  double err = 0.0;
  for (double a : {0.3, 0.5, 0.7, 0.9}) {
    err = std::max(err, std::abs(density_moment(a, 0) - 1.0));
    err = std::max(err, std::abs(density_moment(a, 1) - 1.0 / std::tgamma(1.0 + a)));
  }
  return le(err, 1e-6);
}

inline CheckOutcome representation(bool) {
  const SpatialGrid grid = SpatialGrid::trapezoid(8, 2.0);
  GridFunction a(8);
  for (int i = 0; i < 8; ++i) a(i) = 1.0 + grid.node(i) / std::numbers::pi;
  double err = 0.0;
  const auto r1 = verify_integral_representation(Generator::scalar(-1.0), 0.6, 1.0,
                                                 GridFunction::Ones(1), SpatialGrid::point());
  const auto r2 = verify_integral_representation(Generator::diagonal_field(a), 0.6, 1.0,
                                                 GridFunction::Ones(8), grid);
  err = std::max({r1.s_residual, r1.t_residual, r2.s_residual, r2.t_residual});
  return le(err, 1e-5);
}

inline CheckOutcome solver(bool) {
  const Generator gen = Generator::scalar(-1.0);
  const GridFunction x0 = GridFunction::Ones(1);
  std::vector<double> d;
  for (int n : {128, 256, 512}) {
    const TimeMesh mesh = TimeMesh::uniform(1.0, n);
    const Trajectory a = MildSolver(gen, 0.6, mesh).solve(x0, GridSeries::Zero(1, n));
    const Trajectory b = pc_solve(gen, 0.6, x0, [](double, const GridFunction& q) {
      return GridFunction::Zero(q.size());
    }, mesh);
    d.push_back((a.states - b.states).cwiseAbs().maxCoeff());
  }
  double worst = 0.0;
  for (size_t i = 1; i < d.size(); ++i) worst = std::max(worst, std::abs(d[i - 1] / d[i] - 2.0) / 2.0);
  CheckOutcome r = le(worst, 0.2);
  r.pass = r.pass && d.back() <= 1e-3;
  return r;
}

inline GridFunction diffusion_field(const SpatialGrid& grid) {
  GridFunction a(grid.size());
  for (int i = 0; i < grid.size(); ++i) a(i) = 1.0 + grid.node(i) / std::numbers::pi;
  return a;
}

inline CheckOutcome duality(bool fault) {
  double worst = 0.0;
  for (double p : {2.0, 3.0}) {
    const SpatialGrid grid = SpatialGrid::trapezoid(16, p);
    const TimeMesh mesh = TimeMesh::uniform(1.0, 32);
    ControlProblem cp(Generator::diagonal_field(diffusion_field(grid)), 0.75,
                      ControlMap::window(grid, 0.5, 2.5), mesh, grid, p);
    if (fault) cp.W_mutable().inject_adjoint_fault(1e-3);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 50; ++k) {
      GridFunction xs(16);
      GridSeries u(16, 32);
      for (int i = 0; i < 16; ++i) xs(i) = nd(rng);
      for (int j = 0; j < u.size(); ++j) u.data()[j] = nd(rng);
      const double lhs = pairing(xs, cp.W().apply(u), grid);
      const double rhs = control_pairing(cp.W().adjoint(xs), u, mesh, grid);
      const double scale = lp_norm(xs, grid, conjugate_exponent(p)) * lp_time_norm(u, mesh, grid, p);
      worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
  }
  return le(worst, 1e-10);
}

inline CheckOutcome gramian(bool) {
  const SpatialGrid grid = SpatialGrid::trapezoid(12, 2.0);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 24);
  ControlProblem cp(Generator::diagonal_field(diffusion_field(grid)), 0.75,
                    ControlMap::identity(12), mesh, grid, 2.0);
  GridFunction x0(12);
  for (int i = 0; i < 12; ++i) x0(i) = std::sin(grid.node(i));
  const GridSeries u = null_control(cp, x0, GridSeries::Zero(12, 24)).u.values;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    GridSeries r(12, 24);
    for (int j = 0; j < r.size(); ++j) r.data()[j] = nd(rng);
    // r minus its minimum-norm representative lies in ker W.
    const GridSeries v = r - cp.inverse().solve(cp.W().apply(r)).u;
    const double nv = std::sqrt(control_pairing(v, v, mesh, grid));
    const double nu = std::sqrt(control_pairing(u, u, mesh, grid));
    worst = std::max(worst, std::abs(control_pairing(u, v, mesh, grid)) / (nu * nv));
  }
  return le(worst, 1e-8);
}

inline CheckOutcome gamma(bool) {
  const SpatialGrid grid = SpatialGrid::trapezoid(16, 2.0);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 32);
  const Generator gen = Generator::diagonal_field(diffusion_field(grid));
  ControlProblem on(gen, 0.75, ControlMap::identity(16), mesh, grid, 2.0);
  ControlProblem off(gen, 0.75, ControlMap::zero(16), mesh, grid, 2.0);
  const double g1 = estimate_gamma(on.W(), on.Zstar(), 50).gamma;
  const double g0 = estimate_gamma(off.W(), off.Zstar(), 50).gamma;
  return {g1, 0.0, g1 > 0.0 && g0 == 0.0};
}

inline CheckOutcome terminal_identity(bool) {
  const int n = 6;
  const SpatialGrid grid = SpatialGrid::trapezoid(n, 2.0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = -1.0 - i / 6.0;
    if (i + 1 < n) A(i, i + 1) = A(i + 1, i) = 0.2;
  }
  const Generator gen = Generator::dense(A, grid);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 32);
  ControlProblem cp(gen, 0.75, ControlMap::identity(n), mesh, grid, 2.0);
  GridFunction x0(n);
  for (int i = 0; i < n; ++i) x0(i) = 1.0 + 0.1 * i;
  double worst = 0.0;
  for (int level : {2, 3, 5, 6}) {
    const FixedPointResult r =
        galerkin_fixed_point(cp, x0, BandNonlinearity::zero(grid), NonlocalMap::none(), level);
    const GridSeries zero = GridSeries::Zero(n, mesh.cells());
    const GridFunction expect = project_Pn(cp.solver().terminal(x0, zero), level) -
                                project_Pn(cp.solver().terminal(project_Pn(x0, level), zero), level);
    worst = std::max(worst, (r.q.terminal() - expect).cwiseAbs().maxCoeff());
  }
  return le(worst, 1e-10);
}

inline CheckOutcome cascade_linear(bool) {
  const SpatialGrid grid = SpatialGrid::trapezoid(16, 2.0);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 32);
  ControlProblem cp(Generator::diagonal_field(diffusion_field(grid)), 0.75,
                    ControlMap::identity(16), mesh, grid, 2.0);
  GridFunction x0(16);
  for (int i = 0; i < 16; ++i) x0(i) = std::sin(grid.node(i));
  const FixedPointResult r =
      galerkin_fixed_point(cp, x0, BandNonlinearity::zero(grid), NonlocalMap::none(), 16);
  const ControlResult lin = null_control(cp, x0, GridSeries::Zero(16, 32));
  const double du = (r.u.values - lin.u.values).cwiseAbs().maxCoeff();
  CheckOutcome o = le(std::max(r.terminal_norm, du), 1e-10);
  o.pass = o.pass && r.iterations == 1;
  return o;
}

inline CheckOutcome selection(bool) {
  const SpatialGrid grid = SpatialGrid::trapezoid(16, 2.0);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 32);
  ControlProblem cp(Generator::diagonal_field(diffusion_field(grid)), 0.75,
                    ControlMap::identity(16), mesh, grid, 2.0);
  GridFunction x0(16);
  for (int i = 0; i < 16; ++i) x0(i) = std::sin(grid.node(i));
  BandNonlinearity band = BandNonlinearity::sinband(grid, 0.5, GridFunction::Ones(16));
  band.b = [](double t, double) { return 0.5 * std::cos(t); };
  const NonlocalMap g = NonlocalMap::box(0.0, 32, 0.05);
  const FixedPointResult r = galerkin_fixed_point(cp, x0, band, g, 16);
  return le(std::max({r.membership.violation, g.distance(r.w, r.q),
                      r.terminal_norm / lp_norm(x0, grid)}),
            1e-10);
}

}  // namespace checks

inline const std::vector<std::pair<std::string, CheckFn>>& check_registry() {
  static const std::vector<std::pair<std::string, CheckFn>> reg = {
      {"mlfun", checks::mlfun},
      {"density", checks::density},
      {"representation", checks::representation},
      {"solver", checks::solver},
      {"duality", checks::duality},
      {"gramian", checks::gramian},
      {"gamma", checks::gamma},
      {"terminal_identity", checks::terminal_identity},
      {"cascade_linear", checks::cascade_linear},
      {"selection", checks::selection},
  };
  return reg;
}

/// Runs the named checks (all when `c.checks` was not given). An explicitly
/// empty selection or an unknown name is a configuration error.
inline CommandResult cmd_verify(const RunConfig& c, bool inject_fault = false) {
  CommandResult res;
  header(res.report, "verify", c);
  std::vector<std::string> names;
  if (c.checks_given) {
    names = c.checks;
    if (names.empty()) {
      const auto it = c.origin.find("verify.checks");
      throw ConfigError((it == c.origin.end() ? std::string("--checks") : it->second) +
                        ": empty check selection");
    }
  } else {
    for (const auto& [n, f] : check_registry()) names.push_back(n);
  }
  std::vector<const std::pair<std::string, CheckFn>*> run;
  for (const std::string& n : names) {
    const auto& reg = check_registry();
    auto it = std::find_if(reg.begin(), reg.end(), [&](const auto& e) { return e.first == n; });
    if (it == reg.end()) throw ConfigError("--checks: unknown check '" + n + "'");
    run.push_back(&*it);
  }
  std::vector<std::string> failed;
  for (const auto* e : run) {
    CheckOutcome o;
    std::string err;
    try {
      o = e->second(inject_fault);
    } catch (const std::exception& ex) {
      o.pass = false;
      err = ex.what();
    }
    res.report.line("check " + e->first + " " + (o.pass ? "PASS" : "FAIL") + " value=" +
                    sci(o.value, 3) + " tol=" + sci(o.tol, 1) + (err.empty() ? "" : " error=" + err));
    res.report.record({{"record", "check"},
                       {"name", e->first},
                       {"pass", o.pass},
                       {"value", o.value},
                       {"tol", o.tol},
                       {"error", err}});
    if (!o.pass) failed.push_back(e->first);
  }
  if (failed.empty()) {
    res.message = "all " + std::to_string(run.size()) + " checks passed";
  } else {
    res.exit_code = kVerifyFailed;
    res.message = "failed checks:";
    for (const auto& f : failed) res.message += " " + f;
  }
  return res;
}

}  // namespace fracnull::cli
