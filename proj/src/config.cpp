#include "bipolar/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "bipolar/basis.hpp"
#include "bipolar/ergodics.hpp"
#include "bipolar/hash.hpp"
#include "bipolar/io.hpp"

namespace bipolar {
namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string s = "invalid configuration:";
  for (const auto& e : errors) s += "\n  " + e;
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("expected a number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (*end != '\0' || errno == ERANGE || !std::isfinite(v)) throw std::invalid_argument("'" + s + "' is not a finite number");
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("'" + s + "' is not a nonnegative integer");
  }
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), nullptr, 10);
  if (errno == ERANGE) throw std::invalid_argument("'" + s + "' is out of range");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("'" + s + "' is not true or false");
}

template <class T, class F>
std::vector<T> to_list(const std::string& s, F convert) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) out.push_back(static_cast<T>(convert(item)));
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F format) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format(v[i]);
  return s;
}

std::string num(double v) { return format_double(v); }
std::string uint_str(std::uint64_t v) { return std::to_string(v); }
std::string str(const std::string& s) { return s; }

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

Field dbl(std::string key, double ExperimentConfig::*p) {
  return {std::move(key), [p](ExperimentConfig& c, const std::string& v) { c.*p = to_double(v); },
          [p](const ExperimentConfig& c) { return num(c.*p); }};
}
Field size(std::string key, std::size_t ExperimentConfig::*p) {
  return {std::move(key), [p](ExperimentConfig& c, const std::string& v) { c.*p = to_uint(v); },
          [p](const ExperimentConfig& c) { return uint_str(c.*p); }};
}
Field flag(std::string key, bool ExperimentConfig::*p) {
  return {std::move(key), [p](ExperimentConfig& c, const std::string& v) { c.*p = to_bool(v); },
          [p](const ExperimentConfig& c) { return std::string(c.*p ? "true" : "false"); }};
}
Field text(std::string key, std::string ExperimentConfig::*p) {
  return {std::move(key), [p](ExperimentConfig& c, const std::string& v) { c.*p = v; },
          [p](const ExperimentConfig& c) { return c.*p; }};
}
Field dlist(std::string key, std::vector<double> ExperimentConfig::*p) {
  return {std::move(key), [p](ExperimentConfig& c, const std::string& v) { c.*p = to_list<double>(v, to_double); },
          [p](const ExperimentConfig& c) { return join(c.*p, num); }};
}
Field slist(std::string key, std::vector<std::string> ExperimentConfig::*p) {
  return {std::move(key), [p](ExperimentConfig& c, const std::string& v) { c.*p = split_list(v); },
          [p](const ExperimentConfig& c) { return join(c.*p, str); }};
}
Field optional_dbl(std::string key, std::optional<double> ExperimentConfig::*p) {
  return {std::move(key),
          [p](ExperimentConfig& c, const std::string& v) {
            if (v == "auto") {
              c.*p = std::nullopt;
            } else {
              c.*p = to_double(v);
            }
          },
          [p](const ExperimentConfig& c) { return c.*p ? num(*(c.*p)) : std::string("auto"); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      {"experiment", [](C& c, const std::string& v) { c.experiment = experiment_from_string(v); },
       [](const C& c) { return to_string(c.experiment); }},
      text("output", &C::output),

      {"fluid.kappa0", [](C& c, const std::string& v) { c.fluid.kappa0 = to_double(v); },
       [](const C& c) { return num(c.fluid.kappa0); }},
      {"fluid.kappa1", [](C& c, const std::string& v) { c.fluid.kappa1 = to_double(v); },
       [](const C& c) { return num(c.fluid.kappa1); }},
      {"fluid.varkappa", [](C& c, const std::string& v) { c.fluid.varkappa = to_double(v); },
       [](const C& c) { return num(c.fluid.varkappa); }},
      {"fluid.p", [](C& c, const std::string& v) { c.fluid.p = to_double(v); },
       [](const C& c) { return num(c.fluid.p); }},

      {"discretization.dim",
       [](C& c, const std::string& v) { c.dim = static_cast<int>(std::min<std::uint64_t>(to_uint(v), 1000)); },
       [](const C& c) { return std::to_string(c.dim); }},
      size("discretization.m", &C::m),
      optional_dbl("discretization.dt", &C::dt),
      dbl("discretization.horizon", &C::horizon),
      {"discretization.scheme", [](C& c, const std::string& v) { c.scheme = scheme_from_string(v); },
       [](const C& c) { return to_string(c.scheme); }},
      {"discretization.jumps", [](C& c, const std::string& v) { c.jumps = jump_handling_from_string(v); },
       [](const C& c) { return to_string(c.jumps); }},
      flag("discretization.stress", &C::stress),
      flag("discretization.convection", &C::convection),
      {"discretization.levels", [](C& c, const std::string& v) { c.levels = to_list<std::size_t>(v, to_uint); },
       [](const C& c) { return join(c.levels, uint_str); }},

      {"noise.kind", [](C& c, const std::string& v) { c.noise.kind = noise_kind_from_string(v); },
       [](const C& c) { return to_string(c.noise.kind); }},
      {"noise.rates", [](C& c, const std::string& v) { c.noise.rates = to_list<double>(v, to_double); },
       [](const C& c) { return join(c.noise.rates, num); }},
      {"noise.jump_sizes", [](C& c, const std::string& v) { c.noise.jump_sizes = to_list<double>(v, to_double); },
       [](const C& c) { return join(c.noise.jump_sizes, num); }},
      {"noise.multipliers", [](C& c, const std::string& v) { c.noise.multipliers = to_list<double>(v, to_double); },
       [](const C& c) { return join(c.noise.multipliers, num); }},
      {"noise.layout", [](C& c, const std::string& v) { c.noise.layout = forcing_layout_from_string(v); },
       [](const C& c) { return to_string(c.noise.layout); }},
      {"noise.forcing_modes", [](C& c, const std::string& v) { c.noise.forcing_modes = to_uint(v); },
       [](const C& c) { return uint_str(c.noise.forcing_modes); }},
      {"noise.decay", [](C& c, const std::string& v) { c.noise.decay = to_double(v); },
       [](const C& c) { return num(c.noise.decay); }},
      optional_dbl("noise.l0", &C::l0),
      optional_dbl("noise.l1", &C::l1),
      optional_dbl("noise.l2", &C::l2),
      optional_dbl("noise.l3", &C::l3),

      size("ensemble.paths", &C::paths),
      {"ensemble.seed", [](C& c, const std::string& v) { c.seed = to_uint(v); },
       [](const C& c) { return uint_str(c.seed); }},

      {"initial.kind", [](C& c, const std::string& v) { c.initial.kind = v; },
       [](const C& c) { return c.initial.kind; }},
      {"initial.coefficients",
       [](C& c, const std::string& v) { c.initial.coefficients = to_list<double>(v, to_double); },
       [](const C& c) { return join(c.initial.coefficients, num); }},
      {"initial.scale", [](C& c, const std::string& v) { c.initial.scale = to_double(v); },
       [](const C& c) { return num(c.initial.scale); }},
      {"initial.modes", [](C& c, const std::string& v) { c.initial.modes = to_uint(v); },
       [](const C& c) { return uint_str(c.initial.modes); }},
      {"initial.decay", [](C& c, const std::string& v) { c.initial.decay = to_double(v); },
       [](const C& c) { return num(c.initial.decay); }},

      {"moments.orders",
       [](C& c, const std::string& v) {
         c.orders = to_list<int>(v, [](const std::string& s) { return std::min<std::uint64_t>(to_uint(s), 1000); });
       },
       [](const C& c) { return join(c.orders, [](int r) { return std::to_string(r); }); }},

      dlist("contraction.separations", &C::separations),
      size("contraction.samples", &C::samples),

      slist("semigroup.functionals", &C::ck_functionals),
      dbl("semigroup.t", &C::ck_t),
      dbl("semigroup.s", &C::ck_s),
      size("semigroup.outer", &C::ck_outer),
      size("semigroup.inner", &C::ck_inner),
      text("semigroup.feller_functional", &C::feller_functional),
      size("semigroup.feller_count", &C::feller_count),
      size("semigroup.feller_mode", &C::feller_mode),

      slist("occupation.functionals", &C::occupation_functionals),
      dlist("occupation.schedule", &C::schedule),
      dbl("occupation.burn_in", &C::burn_in),
      dbl("occupation.block_length", &C::block_length),
      size("occupation.replicas", &C::replicas),

      dbl("invariant.tolerance", &C::tolerance),
      dbl("invariant.zero_floor", &C::zero_floor),
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

using Problems = std::vector<std::pair<std::string, std::string>>;  // (key, message)

Problems check(const ExperimentConfig& c) {
  Problems out;
  auto bad = [&](const std::string& key, const std::string& msg) { out.emplace_back(key, msg); };
  auto positive = [&](const std::string& key, double v) {
    if (!(v > 0)) bad(key, num(v) + " must be positive");
  };

  positive("fluid.kappa0", c.fluid.kappa0);
  positive("fluid.kappa1", c.fluid.kappa1);
  positive("fluid.varkappa", c.fluid.varkappa);
  if (!(c.fluid.p > 1 && c.fluid.p <= 2)) bad("fluid.p", num(c.fluid.p) + " is outside the admissible interval (1, 2]");

  if (c.dim != 2 && c.dim != 3) bad("discretization.dim", std::to_string(c.dim) + " must be 2 or 3");
  if (c.m == 0) bad("discretization.m", "must be at least 1");
  if (c.dt) positive("discretization.dt", *c.dt);
  if (!(c.horizon >= 0)) bad("discretization.horizon", "must be nonnegative");
  const auto lv = c.effective_levels();
  const bool has_step = c.dt ? *c.dt > 0
                             : (c.dim == 2 || c.dim == 3) && c.fluid.kappa1 > 0 &&
                                   std::find(lv.begin(), lv.end(), 0) == lv.end();
  if (has_step && c.horizon > 0 && c.horizon < c.time_step()) bad("discretization.horizon", "must be 0 or at least dt");
  for (std::size_t i = 0; i < c.levels.size(); ++i) {
    if (c.levels[i] == 0) bad("discretization.levels", "levels must be at least 1");
    if (i && c.levels[i] <= c.levels[i - 1]) bad("discretization.levels", "levels must be strictly increasing");
  }
  if ((c.experiment == Experiment::Cauchy) && c.effective_levels().size() < 2) {
    bad("discretization.levels", "cauchy needs at least two levels");
  }

  try {
    c.noise.validate();
  } catch (const std::exception& e) {
    // "noise: <field> ..." names the offending key.
    std::string msg = e.what();
    if (msg.rfind("noise: ", 0) == 0) msg = msg.substr(7);
    const std::string field = msg.substr(0, msg.find(' '));
    bad(find_field("noise." + field) ? "noise." + field : "noise.kind", msg);
  }
  for (const auto& [key, v] : {std::pair{"noise.l0", c.l0}, {"noise.l1", c.l1}, {"noise.l2", c.l2}, {"noise.l3", c.l3}}) {
    if (v && *v < 0) bad(key, "declared constants must be nonnegative");
  }

  if (c.paths < 2) bad("ensemble.paths", "must be at least 2");
  if (c.initial.kind != "fixed" && c.initial.kind != "gaussian") {
    bad("initial.kind", "'" + c.initial.kind + "' is not fixed or gaussian");
  }
  if (c.initial.kind == "gaussian") {
    if (c.initial.modes == 0) bad("initial.modes", "must be at least 1");
    if (!(c.initial.scale >= 0)) bad("initial.scale", "must be nonnegative");
  }

  for (int r : c.orders) {
    if (r != 1 && r != 2) bad("moments.orders", std::to_string(r) + " is not 1 or 2");
  }
  if (c.orders.empty()) bad("moments.orders", "needs at least one order");
  for (double s : c.separations) positive("contraction.separations", s);
  if (c.experiment == Experiment::Contraction && c.separations.empty()) bad("contraction.separations", "is empty");
  if (c.samples < 2) bad("contraction.samples", "must be at least 2");

  auto registered = [&](const std::string& key, const std::string& name, bool need_bounded) {
    try {
      const Functional& f = functional(name);
      if (need_bounded && !f.bounded) bad(key, "'" + name + "' is not a bounded functional");
    } catch (const std::invalid_argument& e) {
      bad(key, e.what());
    }
  };
  for (const auto& n : c.ck_functionals) registered("semigroup.functionals", n, true);
  registered("semigroup.feller_functional", c.feller_functional, true);
  if (!(c.ck_t >= 0)) bad("semigroup.t", "must be nonnegative");
  if (!(c.ck_s >= 0)) bad("semigroup.s", "must be nonnegative");
  if (c.ck_outer < 2) bad("semigroup.outer", "must be at least 2");
  if (c.ck_inner < 1) bad("semigroup.inner", "must be at least 1");
  if (c.feller_count < 2) bad("semigroup.feller_count", "must be at least 2");
  if (c.feller_mode >= c.m) bad("semigroup.feller_mode", "must be below discretization.m");

  for (const auto& n : c.occupation_functionals) registered("occupation.functionals", n, false);
  if (c.schedule.empty()) bad("occupation.schedule", "is empty");
  for (std::size_t i = 0; i < c.schedule.size(); ++i) {
    if (!(c.schedule[i] > c.burn_in)) bad("occupation.schedule", "entries must exceed occupation.burn_in");
    if (i && !(c.schedule[i] > c.schedule[i - 1])) bad("occupation.schedule", "must be strictly increasing");
  }
  if (!(c.burn_in >= 0)) bad("occupation.burn_in", "must be nonnegative");
  positive("occupation.block_length", c.block_length);
  if (c.replicas == 0) bad("occupation.replicas", "must be at least 1");
  if (!(c.tolerance >= 0)) bad("invariant.tolerance", "must be nonnegative");
  positive("invariant.zero_floor", c.zero_floor);

  if (c.experiment == Experiment::InvariantBound && out.empty()) {
    const double lambda1 = poincare_lambda1(build_basis(c.m, c.dim));
    const RegimeReport r = ergodic_regime(c.fluid.kappa1, lambda1, c.declared_constants().l1);
    if (!r.admissible) bad("noise.l1", "regime violation: " + r.message);
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Moments: return "moments";
    case Experiment::Cauchy: return "cauchy";
    case Experiment::Contraction: return "contraction";
    case Experiment::Feller: return "feller";
    case Experiment::Occupation: return "occupation";
    case Experiment::InvariantBound: return "invariant-bound";
    case Experiment::Audit: return "audit";
  }
  return "unknown";
}

std::vector<std::string> experiment_names() {
  return {"moments", "cauchy", "contraction", "feller", "occupation", "invariant-bound", "audit"};
}

Experiment experiment_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Experiment::Audit); ++i) {
    if (to_string(static_cast<Experiment>(i)) == s) return static_cast<Experiment>(i);
  }
  std::string known;
  for (const auto& n : experiment_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown experiment '" + s + "' (expected one of " + known + ")");
}

NoiseConstants ExperimentConfig::declared_constants() const {
  NoiseConstants k = noise.closed_form_constants(dim);
  if (l0) k.l0 = *l0;
  if (l1) k.l1 = *l1;
  if (l2) k.l2 = *l2;
  if (l3) k.l3 = *l3;
  return k;
}

double ExperimentConfig::time_step() const {
  if (dt) return *dt;
  const auto lv = effective_levels();
  return default_time_step(build_basis(*std::max_element(lv.begin(), lv.end()), dim), fluid.kappa1);
}

SolverConfig ExperimentConfig::solver(std::size_t level) const {
  SolverConfig s;
  s.fluid = fluid;
  s.m = level;
  s.dt = time_step();
  s.horizon = horizon;
  s.scheme = scheme;
  s.jumps = jumps;
  s.stress = stress;
  s.convection = convection;
  return s;
}

void validate_config(const ExperimentConfig& config) {
  const Problems p = check(config);
  if (p.empty()) return;
  std::vector<std::string> errors;
  for (const auto& [key, msg] : p) errors.push_back(key + ": " + msg);
  throw ConfigError(errors);
}

ExperimentConfig parse_config_text(const std::string& content, const std::string& source) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::map<std::string, std::size_t> seen;
  std::string section;
  std::istringstream in(content);
  std::string raw;
  std::size_t lineno = 0;
  auto at = [&](std::size_t n) { return source + ":" + std::to_string(n) + ": "; };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        errors.push_back(at(lineno) + "malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(at(lineno) + "expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string name = trim(line.substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    const std::string value = trim(line.substr(eq + 1));
    if (const auto it = seen.find(key); it != seen.end()) {
      errors.push_back(at(lineno) + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) +
                       ", again on line " + std::to_string(lineno) + ")");
      continue;
    }
    seen[key] = lineno;
    const Field* f = find_field(key);
    if (!f) {
      errors.push_back(at(lineno) + "unknown key '" + key + "'");
      continue;
    }
    try {
      f->set(cfg, value);
    } catch (const std::exception& e) {
      errors.push_back(at(lineno) + key + ": " + e.what());
    }
  }
  if (errors.empty()) {
    std::vector<std::pair<std::size_t, std::string>> located;
    for (const auto& [key, msg] : check(cfg)) {
      // Attribute to the line that set the key (or its section) when there is one.
      std::size_t line = 0;
      for (const auto& [k, n] : seen) {
        if (k == key || k.rfind(key + ".", 0) == 0) {
          line = n;
          break;
        }
      }
      located.emplace_back(line, (line ? at(line) : source + ": ") + key + ": " + msg);
    }
    std::stable_sort(located.begin(), located.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [line, msg] : located) errors.push_back(std::move(msg));
  }
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open config file"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string canonical_text(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : f.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += name + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) { return git_blob_hash(canonical_text(config)); }

}  // namespace bipolar
