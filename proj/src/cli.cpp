#include "nhdnls/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "nhdnls/errors.hpp"
#include "nhdnls/fields.hpp"
#include "nhdnls/geometry.hpp"
#include "nhdnls/nhd.hpp"
#include "nhdnls/solvers.hpp"
#include "nhdnls/spin_chain.hpp"
#include "nhdnls/su2.hpp"

#ifndef NHDNLS_VERSION
#define NHDNLS_VERSION "0.0.0"
#endif

namespace nhdnls::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr double kPi = std::numbers::pi;

// --- config schema -----------------------------------------------------------------

enum class Kind { number, integer, text, numbers, integers, pair, vec3 };

using Section = std::map<std::string, Kind>;

const std::map<std::string, Section>& schema() {
  static const std::map<std::string, Section> s = {
      {"grid", {{"N", Kind::integer}, {"L", Kind::number}}},
      {"time",
       {{"dt", Kind::number},
        {"T_final", Kind::number},
        {"steps", Kind::integer},
        {"snapshot_every", Kind::integer},
        {"log_every", Kind::integer},
        {"scheme", Kind::text}}},
      {"problem",
       {{"initial", Kind::text},
        {"amplitude", Kind::number},
        {"wavenumber", Kind::number},
        {"eta", Kind::number},
        {"rho", Kind::text},
        {"rho_value", Kind::number},
        {"rho_imag", Kind::number},
        {"rho_amplitude", Kind::number},
        {"rho_shift", Kind::number},
        {"alpha", Kind::number},
        {"alpha_prime", Kind::number},
        {"drag", Kind::number},
        {"drag_frequency", Kind::number},
        {"source", Kind::number},
        {"lower_limit", Kind::text},
        {"coupling", Kind::number},
        {"spacing", Kind::number},
        {"radius", Kind::number},
        {"normal_velocity", Kind::vec3},
        {"kappa_floor", Kind::number},
        {"ka", Kind::numbers}}},
      {"deformation",
       {{"mask_rel", Kind::number},
        {"support_rel", Kind::number},
        {"range", Kind::pair},
        {"h3_0", Kind::pair},
        {"hminus_0", Kind::pair},
        {"ode_tol", Kind::number}}},
      {"tolerances",
       {{"mass_drift", Kind::number},
        {"energy_drift", Kind::number},
        {"unit_defect", Kind::number},
        {"total_spin_drift", Kind::number},
        {"uniform_amplitude", Kind::number},
        {"zcc", Kind::number},
        {"rhs_mismatch", Kind::number},
        {"r04", Kind::number},
        {"r07", Kind::number},
        {"casimir", Kind::number},
        {"roundtrip", Kind::number},
        {"curve_roundtrip", Kind::number},
        {"radius_drift", Kind::number},
        {"speed", Kind::number},
        {"magnon_rel", Kind::number}}},
      {"sweep", {{"alpha", Kind::numbers}, {"order", Kind::integers}, {"threads", Kind::integer}}},
  };
  return s;
}

const std::map<std::string, std::vector<std::string>>& command_modes() {
  static const std::map<std::string, std::vector<std::string>> c = {
      {"zcc-check", {"nls", "ll"}},
      {"simulate", {"nls", "inls", "vortex", "ll", "chain", "filament"}},
      {"hasimoto", {"roundtrip", "forward", "inverse"}},
      {"nhd-closure", {"hsc", "vortex", "vortex_local"}},
      {"nhd-scan", {"continuum", "discrete"}},
      {"constraints", {"r04", "r07", "casimir"}},
      {"dispersion", {"magnon"}},
      {"sweep", {}},
  };
  return c;
}

bool kind_matches(const json& v, Kind k) {
  auto all = [&](auto pred, std::size_t n = 0) {
    if (!v.is_array() || (n && v.size() != n)) return false;
    return std::all_of(v.begin(), v.end(), pred);
  };
  switch (k) {
    case Kind::number: return v.is_number();
    case Kind::integer: return v.is_number_integer();
    case Kind::text: return v.is_string();
    case Kind::numbers: return all([](const json& e) { return e.is_number(); });
    case Kind::integers: return all([](const json& e) { return e.is_number_integer(); });
    case Kind::pair: return all([](const json& e) { return e.is_number(); }, 2);
    case Kind::vec3: return all([](const json& e) { return e.is_number(); }, 3);
  }
  return false;
}

void validate_config(const json& c) {
  if (!c.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [key, value] : c.items()) {
    if (key == "command" || key == "mode" || key == "output") {
      if (!value.is_string()) throw ConfigError("config: '" + key + "' must be a string");
      continue;
    }
    if (key == "seed") {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError("config: 'seed' must be a non-negative integer");
      }
      continue;
    }
    const auto sec = schema().find(key);
    if (sec == schema().end()) throw ConfigError("config: unknown key '" + key + "'");
    if (!value.is_object()) throw ConfigError("config: section '" + key + "' must be an object");
    for (const auto& [name, v] : value.items()) {
      const auto k = sec->second.find(name);
      if (k == sec->second.end()) throw ConfigError("config: unknown key '" + key + "." + name + "'");
      if (!kind_matches(v, k->second)) throw ConfigError("config: '" + key + "." + name + "' has the wrong type");
    }
  }
  if (!c.contains("command")) throw ConfigError("config: no command");
  const auto cmd = command_modes().find(c["command"].get<std::string>());
  if (cmd == command_modes().end()) throw ConfigError("config: unknown command '" + c["command"].get<std::string>() + "'");
  const std::string mode = c.value("mode", "");
  if (!cmd->second.empty() && std::find(cmd->second.begin(), cmd->second.end(), mode) == cmd->second.end()) {
    throw ConfigError("config: unknown mode '" + mode + "' for " + cmd->first);
  }
}

json defaults(const std::string& cmd, const std::string& mode) {
  json c;
  c["command"] = cmd;
  if (!mode.empty()) c["mode"] = mode;
  c["seed"] = 1;
  if (cmd == "sweep") return c;

  json grid = {{"N", 256}, {"L", 40.0}};
  json time = {{"T_final", 1.0}, {"snapshot_every", 0}, {"log_every", 10}, {"scheme", "rk4"}};
  json problem = json::object();
  json deformation = json::object();
  json tol = json::object();
  const json soliton = {{"initial", "soliton"}, {"amplitude", 1.0}, {"wavenumber", 0.0}};

  if (cmd == "zcc-check") {
    if (mode == "nls") {
      problem = {{"initial", "vacuum"}, {"amplitude", 1.0},    {"wavenumber", 0.5},   {"rho", "const"},
                 {"rho_value", 1.0},    {"rho_imag", 0.0},     {"rho_amplitude", 0.1}, {"rho_shift", 0.0}};
    } else {
      grid = {{"N", 128}, {"L", 2.0 * kPi}};
      problem = {{"amplitude", 0.4}};
    }
    tol = {{"zcc", 1e-8}};
  } else if (cmd == "simulate") {
    if (mode == "nls") {
      problem = soliton;
      problem["eta"] = 1.0;
      tol = {{"mass_drift", 1e-8}};
    } else if (mode == "inls") {
      problem = soliton;
      problem.update({{"rho", "tanh"}, {"rho_value", 1.0}, {"rho_amplitude", 0.1}, {"rho_shift", 0.0},
                      {"lower_limit", "left_edge"}});
    } else if (mode == "vortex") {
      problem = soliton;
      problem.update({{"alpha", 0.1}, {"alpha_prime", 0.0}, {"drag", 0.0}, {"drag_frequency", 0.0},
                      {"lower_limit", "left_edge"}});
      tol = {{"uniform_amplitude", 1e-4}};
    } else if (mode == "ll") {
      grid = {{"N", 128}, {"L", 2.0 * kPi}};
      time["T_final"] = 0.1;
      problem = {{"amplitude", 0.4}};
      tol = {{"energy_drift", 1e-6}, {"unit_defect", 1e-12}};
    } else if (mode == "chain") {
      grid = {{"N", 64}};
      time = {{"dt", 1e-3}, {"T_final", 10.0}, {"snapshot_every", 0}, {"log_every", 100}};
      problem = {{"amplitude", 0.3}, {"coupling", 1.0}, {"spacing", 1.0},
                 {"rho", "const"},   {"rho_amplitude", 0.1}, {"rho_shift", 0.0}};
      tol = {{"energy_drift", 1e-6}, {"unit_defect", 1e-12}, {"total_spin_drift", 1e-8}};
    } else {
      grid = {{"N", 64}};
      time = {{"T_final", 1.0}, {"snapshot_every", 0}, {"log_every", 100}};
      problem = {{"radius", 1.0}, {"alpha", 0.0}, {"alpha_prime", 0.0}, {"normal_velocity", {0.0, 0.0, 0.0}}};
      tol = {{"radius_drift", 1e-5}, {"speed", 1e-5}};
    }
  } else if (cmd == "hasimoto") {
    grid = {{"N", 128}, {"L", 2.0 * kPi}};
    if (mode == "inverse") {
      grid = {{"N", 256}, {"L", 40.0}};
      problem = soliton;
      problem["wavenumber"] = 0.5;
      problem["kappa_floor"] = 1e-6;
    } else if (mode == "forward") {
      tol = {{"roundtrip", 1e-10}};
    } else {
      tol = {{"roundtrip", 1e-10}, {"curve_roundtrip", 1e-6}};
    }
  } else if (cmd == "nhd-closure") {
    grid = {{"N", 256}, {"L", 2.0 * kPi}};
    deformation = {{"mask_rel", 1e-8}, {"support_rel", 1e-6}};
    if (mode == "hsc") {
      problem = {{"initial", "random"}, {"amplitude", 1.0}, {"rho", "random"}, {"rho_value", 1.0},
                 {"eta", 0.4},          {"source", 0.0},    {"lower_limit", "left_edge"}};
      tol = {{"rhs_mismatch", 1e-8}, {"zcc", 1e-6}};
    } else {
      problem = {{"initial", "random"}, {"amplitude", 1.0},   {"eta", 0.3},  {"alpha", 0.1},
                 {"alpha_prime", 0.05}, {"drag", 0.3},        {"drag_frequency", 1.0},
                 {"lower_limit", "left_edge"}};
      if (mode == "vortex") {
        problem.update({{"rho", "const"}, {"rho_value", 0.8}, {"rho_imag", 0.3}});
      } else {
        problem.update({{"rho", "random"}, {"rho_value", 1.0}, {"source", 0.0}});
      }
      tol = {{"rhs_mismatch", 1e-8}};
    }
  } else if (cmd == "nhd-scan") {
    grid = {{"N", 64}, {"L", 2.0 * kPi}};
    deformation = {{"range", {-3, 3}}};
  } else if (cmd == "constraints") {
    grid = {{"N", 512}, {"L", 60.0}};
    problem = soliton;
    problem.update({{"wavenumber", 0.4}, {"rho", "tanh"}, {"rho_value", 1.0}, {"rho_amplitude", 0.1},
                    {"rho_shift", 0.0}});
    deformation = {{"h3_0", {1.0, 0.0}}, {"hminus_0", {0.3, 0.2}}, {"ode_tol", 1e-13}};
    tol = {{mode, mode == "r07" ? 1e-6 : 1e-8}};
  } else if (cmd == "dispersion") {
    grid = {{"N", 256}};
    problem = {{"coupling", 1.0}, {"spacing", 1.0}, {"amplitude", 1e-3}, {"ka", {kPi / 4, kPi / 8, kPi / 16}}};
    tol = {{"magnon_rel", 0.02}};
  }
  c["grid"] = grid;
  if (cmd == "simulate") c["time"] = time;
  if (!problem.empty()) c["problem"] = problem;
  if (!deformation.empty()) c["deformation"] = deformation;
  c["tolerances"] = tol;
  return c;
}

// --- config access -------------------------------------------------------------------

class Config {
 public:
  explicit Config(const json& j) : j_(j) {}

  const json& raw() const { return j_; }
  bool has(const std::string& sec, const std::string& key) const {
    return j_.contains(sec) && j_[sec].contains(key);
  }
  double num(const std::string& sec, const std::string& key) const { return get(sec, key).get<double>(); }
  double num_or(const std::string& sec, const std::string& key, double d) const {
    return has(sec, key) ? num(sec, key) : d;
  }
  long long integer(const std::string& sec, const std::string& key) const { return get(sec, key).get<long long>(); }
  std::string str(const std::string& sec, const std::string& key) const { return get(sec, key).get<std::string>(); }
  std::string str_or(const std::string& sec, const std::string& key, const std::string& d) const {
    return has(sec, key) ? str(sec, key) : d;
  }
  std::vector<double> nums(const std::string& sec, const std::string& key) const {
    return get(sec, key).get<std::vector<double>>();
  }
  cplx complex(const std::string& sec, const std::string& key) const {
    const auto v = nums(sec, key);
    return {v[0], v[1]};
  }
  std::uint64_t seed() const { return j_.value("seed", 1ULL); }

  std::size_t grid_n() const {
    const long long n = integer("grid", "N");
    if (n < 8 || !is_power_of_two(static_cast<std::size_t>(n))) {
      throw ConfigError("grid.N must be a power of two >= 8");
    }
    return static_cast<std::size_t>(n);
  }
  double grid_l() const {
    const double l = num("grid", "L");
    if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("grid.L must be positive");
    return l;
  }
  LowerLimit lower() const {
    const std::string s = str_or("problem", "lower_limit", "left_edge");
    if (s == "left_edge") return LowerLimit::left_edge;
    if (s == "domain_center") return LowerLimit::domain_center;
    throw ConfigError("problem.lower_limit must be left_edge or domain_center");
  }
  std::optional<double> tolerance(const std::string& name) const {
    if (!has("tolerances", name)) return std::nullopt;
    return num("tolerances", name);
  }

 private:
  const json& get(const std::string& sec, const std::string& key) const {
    if (!has(sec, key)) throw ConfigError("config: missing " + sec + "." + key);
    return j_[sec][key];
  }

  const json& j_;
};

// --- artifacts --------------------------------------------------------------------------

struct Cell {
  std::string text;
  Cell(double v) {  // NOLINT(google-explicit-constructor)
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    text = buf;
  }
  Cell(int v) : text(std::to_string(v)) {}                  // NOLINT
  Cell(long long v) : text(std::to_string(v)) {}            // NOLINT
  Cell(std::size_t v) : text(std::to_string(v)) {}          // NOLINT
  Cell(bool v) : text(v ? "1" : "0") {}                     // NOLINT
  Cell(const char* v) : text(v) {}                          // NOLINT
  Cell(std::string v) : text(std::move(v)) {}               // NOLINT
};

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : width_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) body_ += (i ? "," : "") + header[i];
    body_ += '\n';
  }
  void row(std::initializer_list<Cell> cells) {
    if (cells.size() != width_) throw std::logic_error("csv: row width mismatch");
    bool first = true;
    for (const auto& c : cells) {
      if (!first) body_ += ',';
      body_ += c.text;
      first = false;
    }
    body_ += '\n';
  }
  const std::string& str() const { return body_; }

 private:
  std::size_t width_;
  std::string body_;
};

std::string join(const std::vector<int>& v, const char* sep = ";") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
  return s;
}

enum class Status { ok, tolerance_failure, config_error, numerical_blowup };

const char* status_name(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::tolerance_failure: return "tolerance_failure";
    case Status::config_error: return "config_error";
    case Status::numerical_blowup: return "numerical_blowup";
  }
  return "unknown";
}

int exit_code(Status s) {
  switch (s) {
    case Status::ok: return kOk;
    case Status::tolerance_failure: return kToleranceFailure;
    case Status::config_error: return kInvalidConfig;
    case Status::numerical_blowup: return kNumericalBlowup;
  }
  return kInvalidConfig;
}

struct Run {
  const json& cfg;
  Config c;
  fs::path dir;
  std::ostream& out;
  std::ostream& err;
  std::size_t threads = 1;
  json resolved = json::object();
  json metrics = json::object();
  json flags = json::object();
  json checks = json::array();
  json artifacts = json::array();
  bool pass = true;

  Run(const json& j, fs::path d, std::ostream& o, std::ostream& e) : cfg(j), c(j), dir(std::move(d)), out(o), err(e) {}

  std::string command() const { return cfg["command"].get<std::string>(); }
  std::string mode() const { return cfg.value("mode", ""); }

  /// value <= limit, NaN fails.
  void check(const std::string& name, double value, double limit) {
    const bool ok = value <= limit;
    checks.push_back({{"name", name}, {"value", value}, {"limit", limit}, {"pass", ok}});
    pass = pass && ok;
  }
  /// Checks against tolerances.<name> only when configured.
  void check_configured(const std::string& name, double value) {
    if (const auto tol = c.tolerance(name)) check(name, value, *tol);
  }
  void require(const std::string& name, bool ok) {
    checks.push_back({{"name", name}, {"value", ok}, {"limit", true}, {"pass", ok}});
    pass = pass && ok;
  }
  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir / name).string());
    f << content;
    artifacts.push_back(name);
  }
  void write_with(const std::string& name, const std::function<void(std::ostream&)>& fn) {
    std::ostringstream os;
    fn(os);
    write(name, os.str());
  }
  /// Runs a time loop; on blow-up writes the last finite state to diagnostic.csv and rethrows.
  void guarded(const std::function<void()>& loop, const std::function<void(std::ostream&)>& last_state) {
    try {
      loop();
    } catch (const NumericalBlowup&) {
      write_with("diagnostic.csv", last_state);
      throw;
    } catch (const SelfIntersection&) {
      write_with("diagnostic.csv", last_state);
      throw;
    }
  }
};

// --- shared builders ------------------------------------------------------------------------

GridField initial_field(const Config& c, std::size_t n, double length) {
  const std::string kind = c.str("problem", "initial");
  const double a = c.num_or("problem", "amplitude", 1.0);
  const double k = c.num_or("problem", "wavenumber", 0.0);
  if (kind == "soliton") {
    return GridField::sample(n, length, [=](double x) {
      const double y = x - 0.5 * length;
      return a / std::cosh(a * y) * std::exp(kI * (k * y));
    });
  }
  if (kind == "uniform") return GridField::constant(n, length / n, a);
  if (kind == "vacuum") return GridField(n, length / n);
  if (kind == "plane_wave") {
    const double m = k * length / (2.0 * kPi);
    if (std::abs(m - std::round(m)) > 1e-9) throw ConfigError("plane_wave: wavenumber must be a multiple of 2 pi / L");
    return GridField::sample(n, length, [=](double x) { return a * std::exp(kI * (k * x)); }).periodized();
  }
  if (kind == "random") return a * random_smooth_field(n, length, c.seed(), 4, false, 0.0);
  throw ConfigError("problem.initial must be soliton, uniform, vacuum, plane_wave or random");
}

GridField coupling_field(const Config& c, std::size_t n, double length) {
  const std::string kind = c.str_or("problem", "rho", "const");
  const cplx base{c.num_or("problem", "rho_value", 1.0), c.num_or("problem", "rho_imag", 0.0)};
  const double amp = c.num_or("problem", "rho_amplitude", 0.1);
  const double shift = c.num_or("problem", "rho_shift", 0.0);
  if (kind == "const") return GridField::constant(n, length / n, base);
  if (kind == "tanh") {
    const GridField profile = GridField::sample_real(
        n, length, [=](double x) { return 1.0 + amp * std::tanh(x - 0.5 * length - shift); });
    return base.imag() == 0.0 ? profile * base.real() : profile * base;
  }
  if (kind == "random") {
    const GridField r = random_smooth_field(n, length, c.seed() + 101, 4, true, 1.5);
    return base.imag() == 0.0 ? r * base.real() : r * base;
  }
  throw ConfigError("problem.rho must be const, tanh, random or a number");
}

TimeFn drag_fn(const Config& c) {
  const double a = c.num_or("problem", "drag", 0.0);
  const double w = c.num_or("problem", "drag_frequency", 0.0);
  if (a == 0.0) return zero_time_fn();
  return [a, w](double t) { return a * std::cos(w * t); };
}

TimeFn constant_fn(double v) {
  return [v](double) { return v; };
}

TangentField twist_field(std::size_t n, double length, double a) {
  const double w = 2.0 * kPi / length;
  return make_tangent_field(GridField::sample_real(n, length, [=](double x) { return a * std::cos(w * x); }),
                            GridField::sample_real(n, length,
                                                   [=](double x) {
                                                     return a * std::sin(w * x) + 0.5 * a * std::sin(2 * w * x);
                                                   }),
                            GridField::constant(n, length / n, 1.0).real())
      .normalized();
}

struct TimePlan {
  double dt = 0.0;
  std::size_t steps = 0;
  double t_final = 0.0;
};

/// dt given: T = steps * dt or steps = ceil(T / dt); otherwise dt from the bound (or T / steps).
TimePlan plan_time(Run& run, double bound, double auto_fraction = 0.9) {
  const Config& c = run.c;
  const double t_final = c.num("time", "T_final");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ConfigError("time.T_final must be non-negative");
  TimePlan p;
  const bool has_steps = c.has("time", "steps");
  if (has_steps && c.integer("time", "steps") < 0) throw ConfigError("time.steps must be non-negative");
  if (c.has("time", "dt")) {
    p.dt = c.num("time", "dt");
    if (!(p.dt > 0.0)) throw ConfigError("time.dt must be positive");
    if (has_steps) {
      p.steps = static_cast<std::size_t>(c.integer("time", "steps"));
    } else {
      p.steps = static_cast<std::size_t>(std::ceil(t_final / p.dt - 1e-9));
      if (p.steps > 0) p.dt = t_final / static_cast<double>(p.steps);
    }
  } else if (has_steps) {
    p.steps = static_cast<std::size_t>(c.integer("time", "steps"));
    p.dt = p.steps ? t_final / static_cast<double>(p.steps) : auto_fraction * bound;
  } else {
    p.steps = static_cast<std::size_t>(std::ceil(t_final / (auto_fraction * bound)));
    p.dt = p.steps ? t_final / static_cast<double>(p.steps) : auto_fraction * bound;
  }
  if (p.dt > bound * (1.0 + 1e-12)) {
    throw ConfigError("time step " + std::to_string(p.dt) + " exceeds the stability bound " + std::to_string(bound));
  }
  p.t_final = p.dt * static_cast<double>(p.steps);
  run.resolved["dt"] = p.dt;
  run.resolved["steps"] = p.steps;
  run.resolved["T_final"] = p.t_final;
  run.resolved["stability_bound"] = bound;
  return p;
}

std::size_t cadence(const Config& c, const char* key, std::size_t fallback) {
  if (!c.has("time", key)) return fallback;
  const long long v = c.integer("time", key);
  if (v < 0) throw ConfigError(std::string("time.") + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

double max_order_norm(const LaurentMatrixField& r) {
  double m = 0.0;
  for (const auto& [n, v] : order_norms(r)) m = std::max(m, v);
  return m;
}

void write_order_norms(Csv& csv, const std::string& variant, const LaurentMatrixField& r, double scale) {
  for (const auto& [order, v] : order_norms(r)) csv.row({variant, order, v / scale});
}

// --- zcc-check ------------------------------------------------------------------------------

void zcc_check(Run& run) {
  const Config& c = run.c;
  const std::size_t n = c.grid_n();
  const double length = c.grid_l();
  Csv csv({"variant", "order", "residual"});
  if (run.mode() == "nls") {
    const GridField q = initial_field(c, n, length);
    const GridField rho = coupling_field(c, n, length);
    const bool uniform = c.str_or("problem", "rho", "const") == "const";
    const GridField eta = c.has("problem", "eta") ? GridField::constant(n, length / n, c.num("problem", "eta"))
                                                  : -1.0 * rho.abs2();
    run.resolved["eta"] = c.has("problem", "eta") ? "problem.eta" : "-|rho|^2";
    const GridField zero(n, length / n);
    const GridField q_t = uniform ? rhs_standard(q, eta) : rhs_inhomogeneous(q, rho, c.lower());
    const double scale = std::max(1.0, max_abs(q));
    const auto bare = deformed_zcc_orders(q, rho, eta, {}, q_t, zero);
    write_order_norms(csv, "bare", bare, scale);
    double residual = max_order_norm(bare) / scale;
    run.metrics["bare_residual"] = residual;
    if (!uniform) {
      const FCoefficients f = f_coeffs(q, rho, eta, 0.0);
      const auto fixed = deformed_zcc_orders(q, rho, eta, {{0, {f.f3, f.fplus, f.fminus}}}, q_t, zero);
      write_order_norms(csv, "f_corrected", fixed, scale);
      // f removes the obstruction at order 1 and above; order 0 also needs the order -1 terms.
      residual = 0.0;
      for (const auto& [order, v] : order_norms(fixed)) {
        if (order >= 1) residual = std::max(residual, v / scale);
      }
      run.metrics["f_corrected_residual"] = residual;
      run.metrics["f_corrected_order0"] = fixed.at(0).max_norm() / scale;
    }
    run.check_configured("zcc", residual);
  } else {
    const TangentField t = twist_field(n, length, c.num("problem", "amplitude"));
    const MatrixGridField s = spin_matrix(t);
    const LaxPair lax = build_ll_lax(s);
    const auto res = zcc_residual(lax.spatial, lax.temporal, ll_lax_time_derivative(spin_matrix(rhs_ll(t))));
    write_order_norms(csv, "ll", res, 1.0);
    run.metrics["residual"] = max_order_norm(res);
    run.check_configured("zcc", max_order_norm(res));
  }
  run.write("residuals.csv", csv.str());
}

// --- simulate -------------------------------------------------------------------------------

void simulate_nls_family(Run& run) {
  const Config& c = run.c;
  const std::string mode = run.mode();
  const std::size_t n = c.grid_n();
  const double length = c.grid_l();
  const GridField q0 = initial_field(c, n, length);
  NlsProblem problem;
  if (mode == "nls") {
    problem = NlsProblem::standard(GridField::constant(n, length / n, c.num("problem", "eta")));
  } else if (mode == "inls") {
    problem = NlsProblem::inhomogeneous(coupling_field(c, n, length), c.lower());
  } else {
    problem = NlsProblem::vortex_filament(
        {c.num("problem", "alpha"), c.num("problem", "alpha_prime"), drag_fn(c)}, c.lower());
  }
  problem.validate(q0);
  const Scheme scheme = parse_scheme(c.str_or("time", "scheme", "rk4"));
  const TimePlan tp = plan_time(run, stability_limit(problem, q0));
  const std::size_t log_every = std::max<std::size_t>(1, cadence(c, "log_every", 10));
  const std::size_t snap_every = cadence(c, "snapshot_every", 0);

  Csv log({"t", "mass", "energy_proxy", "linf", "tail_mass"});
  Csv snaps({"t", "x", "re", "im", "abs"});
  std::vector<double> masses;
  auto record = [&](double t, const GridField& f) {
    const LogEntry e = monitor(t, f);
    if (!std::isfinite(e.mass)) throw NumericalBlowup("simulate: non-finite mass");
    log.row({e.t, e.mass, e.energy_proxy, e.linf, e.tail_mass});
    masses.push_back(e.mass);
  };
  auto snapshot = [&](double t, const GridField& f) {
    for (std::size_t k = 0; k < f.size(); ++k) snaps.row({t, f.x(k), f[k].real(), f[k].imag(), std::abs(f[k])});
  };

  GridField q = q0;
  double t = 0.0;
  const auto last_state = [&](std::ostream& os) {
    os << "# last finite state, t = " << Cell(t).text << "\n";
    write_csv(os, q);
  };
  record(0.0, q);
  if (snap_every) snapshot(0.0, q);
  run.guarded(
      [&] {
        for (std::size_t i = 0; i < tp.steps; ++i) {
          q = step(problem, q, tp.dt * static_cast<double>(i), tp.dt, scheme);
          t = tp.dt * static_cast<double>(i + 1);
          if ((i + 1) % log_every == 0 || i + 1 == tp.steps) record(t, q);
          if (snap_every && (i + 1) % snap_every == 0) snapshot(t, q);
        }
      },
      last_state);

  double drift = 0.0;
  for (double m : masses) drift = std::max(drift, std::abs(m - masses.front()));
  if (masses.front() > 0.0) drift /= masses.front();
  run.metrics["relative_mass_drift"] = drift;
  run.check_configured("mass_drift", drift);

  if (mode == "vortex") {
    const double alpha = c.num("problem", "alpha");
    bool decreasing = true;
    for (std::size_t i = 1; i < masses.size(); ++i) decreasing = decreasing && masses[i] < masses[i - 1];
    if (alpha > 0.0 && masses.front() > 0.0) run.require("mass_strictly_decreasing", decreasing);
    if (c.str("problem", "initial") == "uniform") {
      const double a0 = c.num_or("problem", "amplitude", 1.0);
      const double expected = a0 * a0 / (1.0 + 2.0 * alpha * a0 * a0 * tp.t_final);
      const double measured = integrate(q.abs2()).real() / length;
      run.metrics["final_amplitude2"] = measured;
      run.metrics["expected_amplitude2"] = expected;
      run.check_configured("uniform_amplitude", std::abs(measured - expected));
    }
  }
  run.write("log.csv", log.str());
  if (snap_every) run.write("snapshots.csv", snaps.str());
  run.write_with("final.csv", [&](std::ostream& os) { write_csv(os, q); });
}

void simulate_ll(Run& run) {
  const Config& c = run.c;
  const std::size_t n = c.grid_n();
  const double length = c.grid_l();
  TangentField t = twist_field(n, length, c.num("problem", "amplitude"));
  const double dx = length / n;
  const TimePlan tp = plan_time(run, 0.4 * dx * dx);
  const std::size_t log_every = std::max<std::size_t>(1, cadence(c, "log_every", 10));
  const std::size_t snap_every = cadence(c, "snapshot_every", 0);
  Csv log({"t", "energy", "unit_defect"});
  Csv snaps({"t", "s", "tx", "ty", "tz"});
  auto snapshot = [&](double time) {
    for (std::size_t k = 0; k < n; ++k) {
      snaps.row({time, dx * static_cast<double>(k), t.x[k].real(), t.y[k].real(), t.z[k].real()});
    }
  };
  const double e0 = ll_energy(t);
  double drift = 0.0, defect = t.unit_defect();
  log.row({0.0, e0, defect});
  if (snap_every) snapshot(0.0);
  for (std::size_t i = 0; i < tp.steps; ++i) {
    t = step_ll(t, tp.dt);
    const double time = tp.dt * static_cast<double>(i + 1);
    const double e = ll_energy(t);
    if (!std::isfinite(e)) throw NumericalBlowup("simulate ll: non-finite energy");
    drift = std::max(drift, std::abs(e - e0) / std::abs(e0));
    defect = std::max(defect, t.unit_defect());
    if ((i + 1) % log_every == 0 || i + 1 == tp.steps) log.row({time, e, t.unit_defect()});
    if (snap_every && (i + 1) % snap_every == 0) snapshot(time);
  }
  run.metrics["relative_energy_drift"] = drift;
  run.metrics["unit_defect"] = defect;
  run.check_configured("energy_drift", drift);
  run.check_configured("unit_defect", defect);
  run.write("log.csv", log.str());
  if (snap_every) run.write("snapshots.csv", snaps.str());
  Csv fin({"s", "tx", "ty", "tz"});
  for (std::size_t k = 0; k < n; ++k) fin.row({dx * static_cast<double>(k), t.x[k].real(), t.y[k].real(), t.z[k].real()});
  run.write("final.csv", fin.str());
}

void simulate_chain(Run& run) {
  const Config& c = run.c;
  const long long sites_ll = c.integer("grid", "N");
  if (sites_ll < 2) throw ConfigError("grid.N must be at least 2 sites");
  const std::size_t sites = static_cast<std::size_t>(sites_ll);
  const double a = c.num("problem", "spacing");
  const double j = c.num("problem", "coupling");
  const double amp = c.num("problem", "amplitude");
  if (!(a > 0.0)) throw ConfigError("problem.spacing must be positive");
  std::vector<Vec3> spins(sites);
  for (std::size_t i = 0; i < sites; ++i) {
    const double u = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(sites);
    spins[i] = normalized(Vec3{amp * std::cos(u), (2.0 / 3.0) * amp * std::sin(2 * u), 1.0});
  }
  std::vector<double> rho(sites, j);
  const std::string kind = c.str_or("problem", "rho", "const");
  const double length = a * static_cast<double>(sites);
  if (kind == "tanh") {
    const double ra = c.num_or("problem", "rho_amplitude", 0.1), shift = c.num_or("problem", "rho_shift", 0.0);
    for (std::size_t i = 0; i < sites; ++i) {
      rho[i] = j * (1.0 + ra * std::tanh(a * static_cast<double>(i) - 0.5 * length - shift));
    }
  } else if (kind == "random") {
    const GridField r = random_smooth_field(sites, length, c.seed() + 101, 4, true, 1.0);
    for (std::size_t i = 0; i < sites; ++i) rho[i] = j * r[i].real();
  } else if (kind != "const") {
    throw ConfigError("problem.rho must be const, tanh or random for the chain");
  }
  SpinLattice lat(spins, rho, a);
  run.flags["coupling_normalization"] = "rho(x_i) = rho_i * a^2";
  const TimePlan tp = plan_time(run, 0.1 / lat.max_coupling());
  const std::size_t log_every = std::max<std::size_t>(1, cadence(c, "log_every", 100));
  const std::size_t snap_every = cadence(c, "snapshot_every", 0);
  Csv log({"t", "energy", "Sx", "Sy", "Sz", "unit_defect"});
  Csv snaps({"t", "i", "Sx", "Sy", "Sz"});
  auto record = [&](double time) {
    const Vec3 m = total_spin(lat);
    log.row({time, chain_energy(lat), m.x, m.y, m.z, lat.unit_defect()});
  };
  auto snapshot = [&](double time) {
    for (std::size_t i = 0; i < sites; ++i) snaps.row({time, i, lat[i].x, lat[i].y, lat[i].z});
  };
  const double e0 = chain_energy(lat);
  const Vec3 m0 = total_spin(lat);
  double drift = 0.0, spin_drift = 0.0, defect = lat.unit_defect();
  double time = 0.0;
  const auto last_state = [&](std::ostream& os) {
    os << "# last finite state, t = " << Cell(time).text << "\n";
    write_lattice_csv(os, lat);
  };
  record(0.0);
  if (snap_every) snapshot(0.0);
  run.guarded(
      [&] {
        for (std::size_t i = 0; i < tp.steps; ++i) {
          lat = step_chain(lat, tp.dt);
          time = tp.dt * static_cast<double>(i + 1);
          drift = std::max(drift, std::abs(chain_energy(lat) - e0) / std::max(std::abs(e0), 1e-300));
          spin_drift = std::max(spin_drift, norm(total_spin(lat) - m0) / static_cast<double>(sites));
          defect = std::max(defect, lat.unit_defect());
          if ((i + 1) % log_every == 0 || i + 1 == tp.steps) record(time);
          if (snap_every && (i + 1) % snap_every == 0) snapshot(time);
        }
      },
      last_state);
  run.metrics["relative_energy_drift"] = drift;
  run.metrics["total_spin_drift_per_site"] = spin_drift;
  run.metrics["unit_defect"] = defect;
  run.check_configured("energy_drift", drift);
  run.check_configured("total_spin_drift", spin_drift);
  run.check_configured("unit_defect", defect);
  run.write("log.csv", log.str());
  if (snap_every) run.write("snapshots.csv", snaps.str());
  run.write_with("final.csv", [&](std::ostream& os) { write_lattice_csv(os, lat); });
}

void simulate_filament(Run& run) {
  const Config& c = run.c;
  const std::size_t n = c.grid_n();
  const double radius = c.num("problem", "radius");
  if (!(radius > 0.0)) throw ConfigError("problem.radius must be positive");
  const auto u = c.nums("problem", "normal_velocity");
  FilamentParams fp{c.num("problem", "alpha"), c.num("problem", "alpha_prime"), {u[0], u[1], u[2]}};
  fp.validate();
  std::vector<Vec3> circle(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    circle[i] = {radius * std::cos(s), radius * std::sin(s), 0.0};
  }
  CurveFrame f = frenet_from_curve(circle);
  // Friction shrinks the loop and raises the curvature, so the automatic step keeps a margin.
  const double bound = 0.4 * f.ds * f.ds / std::max(1.0, 1.0 / radius);
  const TimePlan tp = plan_time(run, bound, 0.5);
  const std::size_t log_every = std::max<std::size_t>(1, cadence(c, "log_every", 100));
  const std::size_t snap_every = cadence(c, "snapshot_every", 0);
  Csv log({"t", "mean_radius", "cx", "cy", "cz", "max_kappa"});
  Csv snaps({"t", "s", "x", "y", "z"});
  std::vector<double> radii;
  auto record = [&](double time) {
    const Vec3 g = centroid(f.points);
    log.row({time, mean_radius(f.points), g.x, g.y, g.z, max_abs(f.kappa)});
  };
  auto snapshot = [&](double time) {
    for (std::size_t k = 0; k < f.size(); ++k) {
      snaps.row({time, f.ds * static_cast<double>(k), f.points[k].x, f.points[k].y, f.points[k].z});
    }
  };
  double time = 0.0;
  const auto last_state = [&](std::ostream& os) {
    os << "# last finite state, t = " << Cell(time).text << "\n";
    write_curve_csv(os, f);
  };
  record(0.0);
  radii.push_back(mean_radius(f.points));
  if (snap_every) snapshot(0.0);
  run.guarded(
      [&] {
        for (std::size_t i = 0; i < tp.steps; ++i) {
          f = step_filament(f, fp, tp.dt);
          time = tp.dt * static_cast<double>(i + 1);
          radii.push_back(mean_radius(f.points));
          if ((i + 1) % log_every == 0 || i + 1 == tp.steps) record(time);
          if (snap_every && (i + 1) % snap_every == 0) snapshot(time);
        }
      },
      last_state);
  double drift = 0.0;
  bool shrinking = true;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    drift = std::max(drift, std::abs(radii[i] - radius) / radius);
    if (i) shrinking = shrinking && radii[i] < radii[i - 1];
  }
  const double speed = tp.t_final > 0.0 ? centroid(f.points).z / tp.t_final : 0.0;
  run.metrics["relative_radius_drift"] = drift;
  run.metrics["binormal_speed"] = speed;
  const bool pure_induction = fp.alpha == 0.0 && fp.alpha_prime == 0.0 && fp.normal_velocity == Vec3{};
  if (pure_induction) {
    run.check_configured("radius_drift", drift);
    if (tp.t_final > 0.0) run.check_configured("speed", std::abs(speed * radius - 1.0));
  } else if (fp.alpha > 0.0 && fp.normal_velocity == Vec3{} && tp.steps > 0) {
    run.require("radius_strictly_decreasing", shrinking);
  }
  run.write("log.csv", log.str());
  if (snap_every) run.write("snapshots.csv", snaps.str());
  run.write_with("final.csv", [&](std::ostream& os) { write_curve_csv(os, f); });
}

// --- hasimoto ------------------------------------------------------------------------------

double sample_diff(const GridField& a, const GridField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

void hasimoto(Run& run) {
  const Config& c = run.c;
  const std::size_t n = c.grid_n();
  const double length = c.grid_l();
  const double w = 2.0 * kPi / length;
  if (run.mode() == "inverse") {
    const GridField q = initial_field(c, n, length);
    const HasimotoInverse inv = hasimoto_inverse(q, c.num("problem", "kappa_floor"));
    Csv csv({"x", "kappa", "tau", "masked"});
    for (std::size_t k = 0; k < n; ++k) csv.row({q.x(k), inv.kappa[k].real(), inv.tau[k].real(), inv.masked[k]});
    run.metrics["masked_count"] = inv.masked_count;
    run.write("kappa_tau.csv", csv.str());
    return;
  }
  const GridField kappa = GridField::sample_real(n, length, [=](double x) { return 1.0 + 0.3 * std::cos(w * x); });
  const GridField tau = GridField::sample_real(n, length, [=](double x) { return 0.5 + 0.2 * std::sin(2 * w * x); });
  const GridField q = hasimoto_forward(kappa, tau);
  const HasimotoInverse inv = hasimoto_inverse(q, 1e-6);
  const double rt = std::max(sample_diff(inv.kappa, kappa), sample_diff(inv.tau, tau));
  run.metrics["roundtrip"] = rt;
  run.check_configured("roundtrip", rt);
  if (run.mode() == "forward") {
    run.write_with("q.csv", [&](std::ostream& os) { write_csv(os, q); });
    return;
  }
  Csv csv({"x", "kappa", "tau", "kappa_back", "tau_back"});
  for (std::size_t k = 0; k < n; ++k) {
    csv.row({q.x(k), kappa[k].real(), tau[k].real(), inv.kappa[k].real(), inv.tau[k].real()});
  }
  run.write("roundtrip.csv", csv.str());

  std::vector<Vec3> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    pts[i] = {std::cos(s), std::sin(s), 0.2 * std::sin(2 * s)};
  }
  const CurveFrame closed = frenet_from_curve(pts);
  const CurveFrame rebuilt = frame_reconstruct(closed.kappa, closed.tau);
  const CurveFrame back = frenet_from_curve(rebuilt.points, rebuilt.closure);
  const double crt = std::max(sample_diff(back.kappa, closed.kappa), sample_diff(back.tau, closed.tau));
  run.metrics["curve_roundtrip"] = crt;
  run.check_configured("curve_roundtrip", crt);
  run.write_with("curve.csv", [&](std::ostream& os) { write_curve_csv(os, rebuilt); });
}

// --- nhd-closure ----------------------------------------------------------------------------

void nhd_closure(Run& run) {
  const Config& c = run.c;
  const std::size_t n = c.grid_n();
  const double length = c.grid_l();
  const GridField q = initial_field(c, n, length);
  const GridField rho = coupling_field(c, n, length);
  const GridField eta = GridField::constant(n, length / n, c.num("problem", "eta")).real();
  const GridField rho_t(n, length / n);
  const double source = c.num_or("problem", "source", 0.0);
  ClosureParams cp;
  cp.closure = parse_closure(run.mode());
  cp.source = constant_fn(source);
  cp.lower = c.lower();
  cp.mask_rel = c.num("deformation", "mask_rel");
  cp.support_rel = c.num("deformation", "support_rel");
  GridField ref;
  if (cp.closure == Closure::hsc) {
    ref = rhs_inhomogeneous(q, rho, cp.lower);
  } else {
    const VortexParams vp{c.num("problem", "alpha"), c.num("problem", "alpha_prime"), drag_fn(c)};
    cp.alpha = vp.alpha;
    cp.alpha_prime = vp.alpha_prime;
    cp.drag = vp.drag;
    ref = rhs_vortex(q, vp, 0.0, cp.lower);
  }
  const DeformedEom eom = deformed_eom_rhs(q, rho, rho_t, eta, cp, 0.0);
  const double mismatch = max_abs(eom.q_t - ref);
  run.metrics["rhs_mismatch"] = mismatch;
  run.metrics["integrability"] = eom.integrability;
  run.metrics["dispersion"] = {eom.dispersion.real(), eom.dispersion.imag()};
  run.check_configured("rhs_mismatch", mismatch);
  if (cp.closure == Closure::vortex) {
    const cplx scale = std::sqrt(eom.dispersion / kI);
    run.flags["dispersion_rescaling"] = "x = s y with s^2 = c / i turns c q_xx into i q_yy";
    run.metrics["rescaling_factor"] = {scale.real(), scale.imag()};
  }

  Csv csv({"x", "qt_re", "qt_im", "ref_re", "ref_im", "h3_re", "h3_im", "masked"});
  for (std::size_t k = 0; k < n; ++k) {
    const cplx h3 = eom.h3 ? eom.h3->value[k] : cplx{};
    const bool masked = eom.h3 && eom.h3->masked[k];
    csv.row({q.x(k), eom.q_t[k].real(), eom.q_t[k].imag(), ref[k].real(), ref[k].imag(), h3.real(), h3.imag(), masked});
  }
  run.write("closure.csv", csv.str());

  if (cp.closure == Closure::hsc) {
    run.metrics["masked_fraction"] = eom.h3 ? eom.h3->masked_fraction() : 0.0;
    run.flags["mask_hits_support"] = eom.mask_hits_support;
    const FCoefficients f = f_coeffs(q, rho, eta, source);
    const HCoefficients h = h_coeffs_hsc(q, ref, rho, rho_t, source, cp.lower);
    const GridField h3 = h3_hsc(q, ref, rho, rho_t, source, cp.mask_rel, cp.lower).value;
    const auto res = deformed_zcc_orders(q, rho, eta, hsc_coefficients(f, h3, h), ref, rho_t);
    const double scale = std::max(1.0, max_abs(q) * max_abs(rho));
    Csv zcc({"variant", "order", "residual"});
    write_order_norms(zcc, "hsc", res, scale);
    run.write("zcc.csv", zcc.str());
    const double r = std::max(res.at(0).max_norm(), res.at(1).max_norm()) / scale;
    run.metrics["zcc_orders_0_1"] = r;
    run.check_configured("zcc", r);
  }
}

// --- nhd-scan -------------------------------------------------------------------------------

std::pair<int, int> scan_range(const Config& c) {
  const auto r = c.nums("deformation", "range");
  const double lo = r[0], hi = r[1];
  if (lo != std::floor(lo) || hi != std::floor(hi)) throw ConfigError("deformation.range must hold integers");
  if (lo < DeformationSpec::kMinOrder || hi > DeformationSpec::kMaxOrder) {
    throw ConfigError("deformation.range must lie within [-3, 3]");
  }
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

void nhd_scan(Run& run) {
  const Config& c = run.c;
  const std::size_t n = c.grid_n();
  const double length = c.grid_l();
  const auto [lo, hi] = scan_range(c);
  if (run.mode() == "continuum") {
    const ScanSample s = random_scan_sample(n, length, c.seed());
    const ScanReport r = continuum_spectral_scan(s.q, s.rho, s.eta, lo, hi);
    run.write("report.json", scan_report_json(r) + "\n");
    Csv csv({"order", "classification", "direct", "target_reachable", "footprint", "recursion_depth",
             "constraints_verified"});
    bool verified = true;
    for (const auto& e : r.entries) {
      bool ok = true;
      for (const auto& eq : e.constraints) ok = ok && eq.verified;
      if (e.classification == OrderClass::pure_constraint) verified = verified && ok && !e.constraints.empty();
      csv.row({e.order, to_string(e.classification), e.direct, e.target_reachable, join(e.footprint),
               e.recursion_depth, ok});
    }
    run.write("orders.csv", csv.str());
    run.metrics["eom_modifying"] = r.eom_modifying();
    run.metrics["target_reachable"] = r.target_reachable();
    run.require("constraints_verified", verified);
    if (r.edge) {
      run.metrics["free_term_coefficient"] = {r.edge->free_term_coefficient.real(),
                                              r.edge->free_term_coefficient.imag()};
      run.require("edge_pattern", r.edge->matches_pattern);
    }
    return;
  }
  const std::uint64_t seed = c.seed();
  const TangentField t = make_tangent_field(random_smooth_field(n, length, seed * 3 + 50, 3, true, 0.2),
                                            random_smooth_field(n, length, seed * 3 + 51, 3, true, -0.1),
                                            random_smooth_field(n, length, seed * 3 + 52, 3, true, 1.0))
                             .normalized();
  const DiscreteScanReport r = discrete_spectral_scan(spin_matrix(t), lo, hi, seed + 8);
  json report;
  report["eom_orders"] = r.eom_orders;
  report["eom_entering"] = r.eom_entering();
  json orders = json::array();
  Csv csv({"order", "enters_eom", "footprint", "constraints", "constraints_verified"});
  bool verified = true;
  for (const auto& e : r.entries) {
    json o = {{"order", e.order}, {"enters_eom", e.enters_eom}, {"footprint", e.footprint}};
    json norms = json::object();
    for (const auto& [m, v] : e.residual_norms) norms[std::to_string(m)] = v;
    o["residual_norms"] = norms;
    json cs = json::array();
    bool ok = true;
    for (const auto& k : e.constraints) {
      cs.push_back({{"order", k.order},
                    {"derivative_of", k.derivative_of},
                    {"commutator_with", k.commutator_with},
                    {"verified", k.verified}});
      ok = ok && k.verified;
    }
    o["constraints"] = cs;
    orders.push_back(o);
    if (!e.enters_eom) verified = verified && ok && !e.constraints.empty();
    csv.row({e.order, e.enters_eom, join(e.footprint), e.constraints.size(), ok});
  }
  report["orders"] = orders;
  run.write("report.json", report.dump(2) + "\n");
  run.write("orders.csv", csv.str());
  run.metrics["eom_entering"] = r.eom_entering();
  run.require("constraints_verified", verified);
}

// --- constraints ----------------------------------------------------------------------------

void constraints(Run& run) {
  const Config& c = run.c;
  const std::size_t n = c.grid_n();
  const double length = c.grid_l();
  const GridField p = coupling_field(c, n, length) * initial_field(c, n, length);
  const cplx h3_0 = c.complex("deformation", "h3_0");
  const cplx hm0 = c.complex("deformation", "hminus_0");
  const ConstraintSolution h = integrate_constraints(p, h3_0, -std::conj(hm0), hm0, c.num("deformation", "ode_tol"));
  const LinkedRelationResiduals r = linked_relation_residuals(p, h.h3, h.hplus, h.hminus);
  const GridField second = second_order_constraint_residual(p, h.h3, h.hplus, h.hminus);
  const GridField cas = casimir(h.h3, h.hplus, h.hminus);
  const double linked = std::max({max_abs(r.h3_relation), max_abs(r.hplus_relation), max_abs(r.hminus_relation)});
  run.metrics["r04"] = linked;
  run.metrics["r07"] = max_abs(second);
  run.metrics["casimir"] = casimir_variation(h.h3, h.hplus, h.hminus);
  run.check_configured("r04", linked);
  run.check_configured("r07", max_abs(second));
  run.check_configured("casimir", casimir_variation(h.h3, h.hplus, h.hminus));
  Csv fields({"x", "h3_re", "h3_im", "hplus_re", "hplus_im", "hminus_re", "hminus_im", "casimir_re", "casimir_im"});
  Csv res({"x", "h3_relation", "hplus_relation", "hminus_relation", "fourth_order"});
  for (std::size_t k = 0; k < n; ++k) {
    fields.row({p.x(k), h.h3[k].real(), h.h3[k].imag(), h.hplus[k].real(), h.hplus[k].imag(), h.hminus[k].real(),
                h.hminus[k].imag(), cas[k].real(), cas[k].imag()});
    res.row({p.x(k), std::abs(r.h3_relation[k]), std::abs(r.hplus_relation[k]), std::abs(r.hminus_relation[k]),
             std::abs(second[k])});
  }
  run.write("fields.csv", fields.str());
  run.write("residuals.csv", res.str());
}

// --- dispersion -----------------------------------------------------------------------------

void dispersion(Run& run) {
  const Config& c = run.c;
  const long long sites = c.integer("grid", "N");
  if (sites < 8) throw ConfigError("grid.N must be at least 8 sites");
  const double a = c.num("problem", "spacing");
  const double j = c.num("problem", "coupling");
  if (!(a > 0.0)) throw ConfigError("problem.spacing must be positive");
  Csv csv({"ka", "omega", "predicted", "continuum", "rel_err", "duration", "steps"});
  double worst = 0.0;
  for (double ka : c.nums("problem", "ka")) {
    const MagnonMeasurement m =
        magnon_dispersion(static_cast<std::size_t>(sites), a, j, ka / a, c.num("problem", "amplitude"));
    const double err = std::abs(m.omega - m.predicted) / std::abs(m.predicted);
    worst = std::max(worst, err);
    csv.row({ka, m.omega, m.predicted, m.continuum, err, m.duration, m.steps});
  }
  run.metrics["max_rel_err"] = worst;
  run.check_configured("magnon_rel", worst);
  run.write("dispersion.csv", csv.str());
}

// --- execution --------------------------------------------------------------------------------

struct Outcome {
  Status status = Status::ok;
  json metrics;
};

Outcome execute(const json& cfg, const fs::path& dir, std::size_t threads, std::ostream& out, std::ostream& err);

std::string child_name(std::size_t i) {
  char name[32];
  std::snprintf(name, sizeof(name), "run_%04zu", i);
  return name;
}

void sweep(Run& run) {
  const Config& c = run.c;
  const bool by_alpha = c.has("sweep", "alpha");
  const bool by_order = c.has("sweep", "order");
  if (by_alpha == by_order) throw ConfigError("sweep needs exactly one of sweep.alpha or sweep.order");

  // Template: the child's defaults patched by the sweep's own sections.
  json patch = run.cfg;
  for (const char* key : {"command", "mode", "sweep", "output"}) patch.erase(key);
  std::vector<json> children;
  if (by_alpha) {
    for (double alpha : c.nums("sweep", "alpha")) {
      json child = defaults("simulate", "vortex");
      child["grid"] = {{"N", 16}, {"L", 2.0 * kPi}};
      child["time"]["T_final"] = 10.0;
      child["problem"]["initial"] = "uniform";
      child.merge_patch(patch);
      child["problem"]["alpha"] = alpha;
      children.push_back(child);
    }
  } else {
    for (int order : c.raw()["sweep"]["order"].get<std::vector<int>>()) {
      json child = defaults("nhd-scan", "continuum");
      child.merge_patch(patch);
      child["deformation"]["range"] = {order, order};
      children.push_back(child);
    }
  }
  for (const auto& child : children) validate_config(child);

  std::vector<Outcome> results(children.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < children.size(); i = next++) {
      std::ostringstream sink;
      results[i] = execute(children[i], run.dir / child_name(i), 1, sink, sink);
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(1, run.threads), std::max<std::size_t>(1, children.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Status worst = Status::ok;
  for (const auto& r : results) worst = std::max(worst, r.status);
  if (by_alpha) {
    Csv csv({"index", "alpha", "status", "final_amplitude2", "decay_rate", "fit_residual"});
    for (std::size_t i = 0; i < children.size(); ++i) {
      // 1/|q|^2 grows linearly at twice the decay rate; the fit reads the child's log.
      double rate = std::nan(""), resid = std::nan(""), a2 = std::nan("");
      std::ifstream log(run.dir / child_name(i) / "log.csv");
      std::vector<double> ts, ys;
      std::string line;
      std::getline(log, line);
      const double length = children[i]["grid"]["L"].get<double>();
      while (std::getline(log, line)) {
        std::istringstream ls(line);
        std::string t_s, m_s;
        std::getline(ls, t_s, ',');
        std::getline(ls, m_s, ',');
        ts.push_back(std::stod(t_s));
        ys.push_back(length / std::stod(m_s));
      }
      if (ts.size() >= 2) {
        const double k = static_cast<double>(ts.size());
        double st = 0, sy = 0, stt = 0, sty = 0;
        for (std::size_t m = 0; m < ts.size(); ++m) {
          st += ts[m];
          sy += ys[m];
          stt += ts[m] * ts[m];
          sty += ts[m] * ys[m];
        }
        const double slope = (k * sty - st * sy) / (k * stt - st * st);
        const double icept = (sy - slope * st) / k;
        resid = 0.0;
        for (std::size_t m = 0; m < ts.size(); ++m) resid = std::max(resid, std::abs(icept + slope * ts[m] - ys[m]));
        rate = 0.5 * slope;
        a2 = 1.0 / ys.back();
      }
      csv.row({i, children[i]["problem"]["alpha"].get<double>(), status_name(results[i].status), a2, rate, resid});
    }
    run.write("sweep.csv", csv.str());
  } else {
    Csv csv({"index", "order", "status", "classification", "direct", "footprint"});
    for (std::size_t i = 0; i < children.size(); ++i) {
      const int order = children[i]["deformation"]["range"][0].get<int>();
      std::string cls = "", direct = "", footprint = "";
      std::ifstream in(run.dir / child_name(i) / "orders.csv");
      std::string line;
      std::getline(in, line);
      if (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string field;
        std::getline(ls, field, ',');
        std::getline(ls, cls, ',');
        std::getline(ls, direct, ',');
        std::getline(ls, field, ',');
        std::getline(ls, footprint, ',');
      }
      csv.row({i, order, status_name(results[i].status), cls, direct, footprint});
    }
    run.write("sweep.csv", csv.str());
  }
  run.resolved["runs"] = children.size();
  run.metrics["worst_child_status"] = status_name(worst);
  if (worst == Status::config_error) throw ConfigError("sweep: a child run was rejected");
  if (worst == Status::numerical_blowup) throw NumericalBlowup("sweep: a child run blew up");
  run.require("children_passed", worst == Status::ok);
}

void dispatch(Run& run) {
  const std::string cmd = run.command();
  const std::string mode = run.mode();
  if (cmd == "zcc-check") return zcc_check(run);
  if (cmd == "simulate") {
    if (mode == "ll") return simulate_ll(run);
    if (mode == "chain") return simulate_chain(run);
    if (mode == "filament") return simulate_filament(run);
    return simulate_nls_family(run);
  }
  if (cmd == "hasimoto") return hasimoto(run);
  if (cmd == "nhd-closure") return nhd_closure(run);
  if (cmd == "nhd-scan") return nhd_scan(run);
  if (cmd == "constraints") return constraints(run);
  if (cmd == "dispersion") return dispersion(run);
  if (cmd == "sweep") return sweep(run);
  throw ConfigError("unknown command '" + cmd + "'");
}

Outcome execute(const json& cfg, const fs::path& dir, std::size_t threads, std::ostream& out, std::ostream& err) {
  Run run(cfg, dir, out, err);
  run.threads = threads;
  Status status = Status::ok;
  std::string error;
  bool wrote_dir = false;
  try {
    validate_config(cfg);
    fs::create_directories(dir);
    wrote_dir = true;
    dispatch(run);
    status = run.pass ? Status::ok : Status::tolerance_failure;
  } catch (const ConfigError& e) {
    status = Status::config_error;
    error = e.what();
  } catch (const InvalidInput& e) {
    status = Status::config_error;
    error = e.what();
  } catch (const NumericalBlowup& e) {
    status = Status::numerical_blowup;
    error = e.what();
  } catch (const SelfIntersection& e) {
    status = Status::numerical_blowup;
    error = e.what();
  } catch (const nlohmann::json::exception& e) {
    status = Status::config_error;
    error = e.what();
  } catch (const fs::filesystem_error& e) {
    status = Status::config_error;
    error = e.what();
  }
  if (wrote_dir) {
    try {
      json meta;
      meta["command"] = run.command();
      if (!run.mode().empty()) meta["mode"] = run.mode();
      meta["version"] = version();
      meta["status"] = status_name(status);
      meta["exit_code"] = exit_code(status);
      if (!error.empty()) meta["error"] = error;
      json echo = cfg;
      echo.erase("output");
      meta["config"] = echo;
      meta["resolved"] = run.resolved;
      meta["tolerances"] = run.checks;
      meta["metrics"] = run.metrics;
      meta["flags"] = run.flags;
      meta["artifacts"] = run.artifacts;
      std::ofstream f(dir / "meta.json", std::ios::binary);
      f << meta.dump(2) << "\n";
    } catch (const std::exception& e) {
      err << "nhdnls: failed to write meta.json: " << e.what() << "\n";
    }
  }
  for (const auto& ch : run.checks) {
    out << (ch["pass"].get<bool>() ? "PASS " : "FAIL ") << ch["name"].get<std::string>() << ": " << ch["value"].dump()
        << " (limit " << ch["limit"].dump() << ")\n";
  }
  if (!error.empty()) err << "nhdnls: " << error << "\n";
  out << "status: " << status_name(status) << " -> " << dir.string() << "\n";
  return {status, run.metrics};
}

// --- argument handling ---------------------------------------------------------------------

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(what + ": not a number '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError(what + ": not an integer '" + s + "'");
  return v;
}

/// Numbers or multiples of pi: "0.3", "pi", "pi/4", "3pi/8", "3*pi/8".
double parse_angle(std::string s, const std::string& what) {
  const auto p = s.find("pi");
  if (p == std::string::npos) return parse_double(s, what);
  std::string num = s.substr(0, p);
  if (!num.empty() && num.back() == '*') num.pop_back();
  const double m = num.empty() ? 1.0 : parse_double(num, what);
  std::string rest = s.substr(p + 2);
  double d = 1.0;
  if (!rest.empty()) {
    if (rest[0] != '/') throw ConfigError(what + ": cannot read '" + s + "'");
    d = parse_double(rest.substr(1), what);
  }
  return m * kPi / d;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (s.back() == sep) out.emplace_back();
  return out;
}

std::pair<long long, long long> parse_range(const std::string& s, const std::string& what) {
  const auto p = s.find("..");
  if (p == std::string::npos) throw ConfigError(what + ": expected lo..hi, got '" + s + "'");
  return {parse_int(s.substr(0, p), what), parse_int(s.substr(p + 2), what)};
}

std::vector<long long> parse_orders(const std::string& s) {
  std::vector<long long> out;
  for (const auto& item : split(s, ',')) {
    if (item.find("..") != std::string::npos) {
      const auto [lo, hi] = parse_range(item, "--order");
      for (long long k = lo; k <= hi; ++k) out.push_back(k);
    } else {
      out.push_back(parse_int(item, "--order"));
    }
  }
  return out;
}

enum class FlagKind { number, integer, text, range, angles };

struct Flag {
  const char* name;
  const char* section;  // "" for top-level keys
  const char* key;
  FlagKind kind;
  const char* help;
};

const std::vector<Flag>& flags() {
  static const std::vector<Flag> f = {
      {"--N", "grid", "N", FlagKind::integer, "grid nodes (sites for chain and dispersion)"},
      {"--L", "grid", "L", FlagKind::number, "domain length"},
      {"--dt", "time", "dt", FlagKind::number, "time step (default: from the stability bound)"},
      {"--T", "time", "T_final", FlagKind::number, "final time"},
      {"--steps", "time", "steps", FlagKind::integer, "number of steps"},
      {"--snapshot-every", "time", "snapshot_every", FlagKind::integer, "steps between snapshots (0: none)"},
      {"--log-every", "time", "log_every", FlagKind::integer, "steps between log rows"},
      {"--scheme", "time", "scheme", FlagKind::text, "rk4 or splitstep"},
      {"--initial", "problem", "initial", FlagKind::text, "soliton, uniform, vacuum, plane_wave or random"},
      {"--amplitude", "problem", "amplitude", FlagKind::number, "initial amplitude"},
      {"--wavenumber", "problem", "wavenumber", FlagKind::number, "carrier wavenumber"},
      {"--eta", "problem", "eta", FlagKind::number, "cubic coefficient"},
      {"--rho-value", "problem", "rho_value", FlagKind::number, "coupling scale (real part)"},
      {"--rho-imag", "problem", "rho_imag", FlagKind::number, "coupling scale (imaginary part)"},
      {"--rho-amplitude", "problem", "rho_amplitude", FlagKind::number, "tanh profile amplitude"},
      {"--rho-shift", "problem", "rho_shift", FlagKind::number, "tanh profile offset from the centre"},
      {"--alpha-prime", "problem", "alpha_prime", FlagKind::number, "transverse friction coefficient"},
      {"--drag", "problem", "drag", FlagKind::number, "drag amplitude A"},
      {"--drag-frequency", "problem", "drag_frequency", FlagKind::number, "A(t) = drag cos(frequency t)"},
      {"--source", "problem", "source", FlagKind::number, "constant source T"},
      {"--lower-limit", "problem", "lower_limit", FlagKind::text, "left_edge or domain_center"},
      {"--coupling", "problem", "coupling", FlagKind::number, "chain exchange J"},
      {"--spacing", "problem", "spacing", FlagKind::number, "lattice spacing a"},
      {"--radius", "problem", "radius", FlagKind::number, "filament loop radius"},
      {"--kappa-floor", "problem", "kappa_floor", FlagKind::number, "curvature floor for the inverse map"},
      {"--ka", "problem", "ka", FlagKind::angles, "comma list of k*a values (pi/4 style allowed)"},
      {"--mask-rel", "deformation", "mask_rel", FlagKind::number, "relative mask threshold"},
      {"--support-rel", "deformation", "support_rel", FlagKind::number, "support threshold for mask warnings"},
      {"--range", "deformation", "range", FlagKind::range, "spectral orders lo..hi"},
      {"--order", "sweep", "order", FlagKind::text, "sweep orders: comma list or lo..hi"},
      {"--threads", "sweep", "threads", FlagKind::integer, "sweep worker threads"},
      {"--seed", "", "seed", FlagKind::integer, "seed for randomized inputs"},
  };
  return f;
}

struct Parsed {
  std::string command;
  std::string mode;
  std::string config_path;
  std::string out;
  json patch = json::object();
};

void set_path(json& patch, const std::string& section, const std::string& key, json value) {
  if (section.empty()) {
    patch[key] = std::move(value);
  } else {
    patch[section][key] = std::move(value);
  }
}

/// Joins "--flag value" into "--flag=value" when the value starts with a dash, so "-3..3" is not an option.
std::vector<std::string> join_negative_values(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0 && a.find('=') == std::string::npos && i + 1 < args.size()) {
      const std::string& v = args[i + 1];
      if (v.size() >= 2 && v[0] == '-' && (std::isdigit(static_cast<unsigned char>(v[1])) || v[1] == '.')) {
        out.push_back(a + "=" + v);
        ++i;
        continue;
      }
    }
    out.push_back(a);
  }
  return out;
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

std::optional<std::size_t> env_threads() {
  const char* v = std::getenv("NHDNLS_THREADS");
  if (!v || !*v) return std::nullopt;
  const long long n = parse_int(v, "NHDNLS_THREADS");
  if (n < 1) throw ConfigError("NHDNLS_THREADS must be positive");
  return static_cast<std::size_t>(n);
}

}  // namespace

std::string version() { return NHDNLS_VERSION; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Non-holonomic deformations of the NLS family: simulations and verification suites", "nhdnls"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1, 1);

  std::map<std::string, std::string> values;
  std::string mode, config_path, out_dir, alpha, rho, uniform;
  std::vector<std::string> tols;
  const std::map<std::string, const char*> help = {
      {"zcc-check", "per-order zero-curvature residuals (nls | ll)"},
      {"simulate", "time evolution (nls | inls | vortex | ll | chain | filament)"},
      {"hasimoto", "curve <-> field maps (roundtrip | forward | inverse)"},
      {"nhd-closure", "closure residual suites (hsc | vortex | vortex_local)"},
      {"nhd-scan", "per-order deformation scan (continuum | discrete)"},
      {"constraints", "order -1 coefficient relations (r04 | r07 | casimir)"},
      {"dispersion", "chain spin-wave dispersion (magnon)"},
      {"sweep", "parameter sweep over --alpha (vortex decay) or --order (scan)"},
  };
  for (const auto& [name, modes] : command_modes()) {
    CLI::App* sc = app.add_subcommand(name, help.at(name));
    if (!modes.empty()) sc->add_option("mode", mode, "mode (default: " + modes.front() + ")");
    sc->add_option("--config", config_path, "JSON config file");
    sc->add_option("--out", out_dir, "output directory");
    sc->add_option("--tol", tols, "tolerance override name=value (repeatable)");
    sc->add_option("--alpha", alpha, name == "sweep" ? "comma list of friction values" : "friction coefficient");
    sc->add_option("--rho", rho, "coupling: const, tanh, random or a constant value");
    sc->add_option("--uniform", uniform, "uniform initial state with this amplitude");
    for (const auto& f : flags()) sc->add_option(f.name, values[f.name], f.help);
  }

  std::vector<std::string> argv = join_negative_values(args);
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidConfig;
  }

  CLI::App* sc = app.get_subcommands().front();
  const std::string cmd = sc->get_name();
  auto given = [&](const std::string& name) { return sc->get_option(name)->count() > 0; };
  try {
    json patch = json::object();
    for (const auto& f : flags()) {
      if (!given(f.name)) continue;
      const std::string& v = values[f.name];
      switch (f.kind) {
        case FlagKind::number: set_path(patch, f.section, f.key, parse_double(v, f.name)); break;
        case FlagKind::integer: set_path(patch, f.section, f.key, parse_int(v, f.name)); break;
        case FlagKind::text:
          if (std::string(f.name) == "--order") {
            set_path(patch, f.section, f.key, parse_orders(v));
          } else {
            set_path(patch, f.section, f.key, v);
          }
          break;
        case FlagKind::range: {
          const auto [lo, hi] = parse_range(v, f.name);
          set_path(patch, f.section, f.key, json::array({lo, hi}));
          break;
        }
        case FlagKind::angles: {
          json list = json::array();
          for (const auto& item : split(v, ',')) list.push_back(parse_angle(item, f.name));
          set_path(patch, f.section, f.key, list);
          break;
        }
      }
    }
    if (given("--alpha")) {
      if (cmd == "sweep") {
        json list = json::array();
        for (const auto& item : split(alpha, ',')) list.push_back(parse_double(item, "--alpha"));
        patch["sweep"]["alpha"] = list;
      } else {
        patch["problem"]["alpha"] = parse_double(alpha, "--alpha");
      }
    }
    if (given("--rho")) {
      double v = 0.0;
      const auto r = std::from_chars(rho.data(), rho.data() + rho.size(), v);
      if (r.ec == std::errc() && r.ptr == rho.data() + rho.size()) {
        patch["problem"]["rho"] = "const";
        patch["problem"]["rho_value"] = v;
      } else {
        patch["problem"]["rho"] = rho;
      }
    }
    if (given("--uniform")) {
      patch["problem"]["initial"] = "uniform";
      patch["problem"]["amplitude"] = parse_double(uniform, "--uniform");
    }
    for (const auto& t : tols) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("--tol expects name=value, got '" + t + "'");
      patch["tolerances"][t.substr(0, eq)] = parse_double(t.substr(eq + 1), "--tol");
    }

    json file = json::object();
    if (!config_path.empty()) {
      file = read_config_file(config_path);
      if (!file.is_object()) throw ConfigError("config: top level must be an object");
      if (file.contains("command") && file["command"] != cmd) {
        throw ConfigError("config command '" + file["command"].dump() + "' does not match '" + cmd + "'");
      }
      if (!mode.empty() && file.contains("mode") && file["mode"] != mode) {
        throw ConfigError("config mode " + file["mode"].dump() + " does not match '" + mode + "'");
      }
    }
    const auto& modes = command_modes().at(cmd);
    std::string resolved_mode = mode;
    if (resolved_mode.empty() && file.contains("mode") && file["mode"].is_string()) {
      resolved_mode = file["mode"].get<std::string>();
    }
    if (resolved_mode.empty() && !modes.empty()) resolved_mode = modes.front();

    json cfg = defaults(cmd, resolved_mode);
    cfg.merge_patch(file);
    cfg.merge_patch(patch);
    validate_config(cfg);

    fs::path dir;
    if (!out_dir.empty()) {
      dir = out_dir;
    } else if (const char* env = std::getenv("NHDNLS_OUT"); env && *env) {
      dir = env;
    } else if (cfg.contains("output")) {
      dir = cfg["output"].get<std::string>();
    } else {
      dir = fs::path("nhdnls_out") / (resolved_mode.empty() ? cmd : cmd + "_" + resolved_mode);
    }

    std::size_t threads = std::max(1U, std::thread::hardware_concurrency());
    if (cfg.contains("sweep") && cfg["sweep"].contains("threads")) {
      threads = static_cast<std::size_t>(std::max(1LL, cfg["sweep"]["threads"].get<long long>()));
    }
    if (const auto env = env_threads(); env && !given("--threads")) threads = *env;

    return exit_code(execute(cfg, dir, threads, out, err).status);
  } catch (const Error& e) {
    err << "nhdnls: " << e.what() << "\n";
    return kInvalidConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "nhdnls: " << e.what() << "\n";
    return kInvalidConfig;
  }
}

}  // namespace nhdnls::cli
