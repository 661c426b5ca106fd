#ifndef FML_EXPERIMENTS_HPP
#define FML_EXPERIMENTS_HPP

// Scenario configs, runners, CSV records and SVG line charts.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fml/bounds.hpp"
#include "fml/decomposition.hpp"
#include "fml/magnus.hpp"
#include "fml/parallel.hpp"
#include "fml/propagator.hpp"
#include "fml/report.hpp"
#include "fml/system.hpp"

namespace fml {

using json = nlohmann::ordered_json;

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

// ---- small utilities

/// splitmix64 of (seed, index): per-instance seeds independent of scheduling.
inline std::uint64_t instance_seed(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---- configuration

struct TermSpec {
  std::string sites = "";  // "", "each" or "each_bond"
  std::vector<int> site_list;
  std::string letters;
  std::vector<double> poly;
};

struct SystemSpec {
  int sites = 8;
  bool periodic = true;
  std::string model = "custom";  // custom | heisenberg | paper_ring | random
  std::vector<double> couplings{1.5, 1.0, 0.5};
  std::vector<std::pair<int, int>> bonds;  // empty: chain bonds
  std::vector<TermSpec> static_terms;
  std::vector<TermSpec> driving;
  std::string time = "absolute";  // absolute | scaled (polynomials in t/T)
  std::vector<int> order;
  RandomSystemOptions random;
};

struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  SystemSpec system;
  std::vector<double> periods;
  int n_max = 0;
  std::vector<long> periods_m;
  PropagatorOptions prop;
  std::string output_dir = "runs";
  json params = json::object();
  json resolved;  // the full config after defaults
};

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> n{"fig2",           "theorem1_sweep",         "theorem2_local",         "absorption",
                                          "prethermalization", "dynamical_localization", "integrability_breaking", "lemma_suite"};
  return n;
}

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const std::exception&) {
    throw ConfigError(where + ": wrong type");
  }
}

inline double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + ": not finite");
  return v;
}

inline std::vector<double> get_numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(get_number(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

inline std::vector<int> get_ints(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of integers");
  std::vector<int> v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) throw ConfigError(where + ": expected integers");
    v.push_back(j[i].get<int>());
  }
  return v;
}

inline TermSpec parse_term(const json& j, const std::string& where) {
  check_keys(j, {"sites", "letters", "poly"}, where);
  if (!j.contains("sites") || !j.contains("letters")) throw ConfigError(where + ": needs 'sites' and 'letters'");
  TermSpec t;
  if (j["sites"].is_string()) {
    t.sites = j["sites"].get<std::string>();
    if (t.sites != "each" && t.sites != "each_bond") throw ConfigError(where + ": sites must be a list, \"each\" or \"each_bond\"");
  } else {
    t.site_list = get_ints(j["sites"], where + ".sites");
  }
  if (!j["letters"].is_string()) throw ConfigError(where + ".letters: expected a string");
  t.letters = j["letters"].get<std::string>();
  t.poly = j.contains("poly") ? get_numbers(j["poly"], where + ".poly") : std::vector<double>{1.0};
  if (t.poly.empty()) throw ConfigError(where + ".poly: empty");
  if (t.sites == "each" && t.letters.size() != 1) throw ConfigError(where + ": \"each\" needs one letter");
  if (t.sites == "each_bond" && t.letters.size() != 2) throw ConfigError(where + ": \"each_bond\" needs two letters");
  return t;
}

inline json term_json(const TermSpec& t) {
  json j;
  if (t.sites.empty())
    j["sites"] = t.site_list;
  else
    j["sites"] = t.sites;
  j["letters"] = t.letters;
  j["poly"] = t.poly;
  return j;
}

inline SystemSpec parse_system(const json& j) {
  check_keys(j, {"sites", "periodic", "model", "couplings", "bonds", "static", "driving", "time", "order", "random"}, "system");
  SystemSpec s;
  if (j.contains("sites")) {
    if (!j["sites"].is_number_integer()) throw ConfigError("system.sites: expected an integer");
    s.sites = j["sites"].get<int>();
  }
  if (s.sites < 1 || s.sites > 12) throw ConfigError("system.sites: must lie in 1..12");
  if (j.contains("periodic")) {
    if (!j["periodic"].is_boolean()) throw ConfigError("system.periodic: expected a boolean");
    s.periodic = j["periodic"].get<bool>();
  }
  if (j.contains("model")) {
    s.model = get_as<std::string>(j["model"], "system.model");
    if (s.model != "custom" && s.model != "heisenberg" && s.model != "paper_ring" && s.model != "random")
      throw ConfigError("system.model: unknown model '" + s.model + "'");
  }
  if (j.contains("couplings")) {
    s.couplings = get_numbers(j["couplings"], "system.couplings");
    if (s.couplings.size() != 3) throw ConfigError("system.couplings: expected [jx, jy, jz]");
  }
  if (j.contains("bonds")) {
    if (!j["bonds"].is_array()) throw ConfigError("system.bonds: expected an array");
    for (const auto& b : j["bonds"]) {
      const auto v = get_ints(b, "system.bonds");
      if (v.size() != 2) throw ConfigError("system.bonds: each bond needs two sites");
      s.bonds.emplace_back(v[0], v[1]);
    }
  }
  for (const char* key : {"static", "driving"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_array()) throw ConfigError(std::string("system.") + key + ": expected an array");
    auto& dst = std::string(key) == "static" ? s.static_terms : s.driving;
    for (std::size_t i = 0; i < j[key].size(); ++i)
      dst.push_back(parse_term(j[key][i], std::string("system.") + key + "[" + std::to_string(i) + "]"));
  }
  for (const auto& t : s.static_terms)
    if (t.poly.size() != 1) throw ConfigError("system.static: static terms take a single coefficient");
  if (j.contains("time")) {
    s.time = get_as<std::string>(j["time"], "system.time");
    if (s.time != "absolute" && s.time != "scaled") throw ConfigError("system.time: expected \"absolute\" or \"scaled\"");
  }
  if (j.contains("order")) s.order = get_ints(j["order"], "system.order");
  if (j.contains("random")) {
    const auto& r = j["random"];
    check_keys(r, {"degree", "scale", "two_site_driving", "zero_mean", "pieces"}, "system.random");
    if (r.contains("degree")) s.random.degree = get_as<int>(r["degree"], "system.random.degree");
    if (r.contains("scale")) s.random.scale = get_number(r["scale"], "system.random.scale");
    if (r.contains("two_site_driving")) s.random.two_site_driving = get_as<bool>(r["two_site_driving"], "system.random.two_site_driving");
    if (r.contains("zero_mean")) s.random.zero_mean = get_as<bool>(r["zero_mean"], "system.random.zero_mean");
    if (r.contains("pieces")) s.random.pieces = get_as<int>(r["pieces"], "system.random.pieces");
    if (s.random.degree < 0 || s.random.pieces < 1) throw ConfigError("system.random: bad degree or pieces");
  }
  s.random.n_sites = s.sites;
  s.random.periodic = s.periodic;
  return s;
}

inline json system_json(const SystemSpec& s) {
  json j;
  j["sites"] = s.sites;
  j["periodic"] = s.periodic;
  j["model"] = s.model;
  j["couplings"] = s.couplings;
  json b = json::array();
  for (auto [x, y] : s.bonds) b.push_back({x, y});
  j["bonds"] = b;
  j["static"] = json::array();
  for (const auto& t : s.static_terms) j["static"].push_back(term_json(t));
  j["driving"] = json::array();
  for (const auto& t : s.driving) j["driving"].push_back(term_json(t));
  j["time"] = s.time;
  j["order"] = s.order;
  j["random"] = {{"degree", s.random.degree},
                 {"scale", s.random.scale},
                 {"two_site_driving", s.random.two_site_driving},
                 {"zero_mean", s.random.zero_mean},
                 {"pieces", s.random.pieces}};
  return j;
}

/// Fills scenario parameters with defaults and rejects unknown ones.
inline json resolve_params(const std::string& scenario, const json& given, int n_sites) {
  json d;
  std::vector<int> mid{std::max(0, n_sites / 2 - 1), n_sites / 2};
  if (n_sites < 2) mid = {0};
  std::string neel;
  for (int i = 0; i < n_sites; ++i) neel += (i % 2) ? '1' : '0';
  if (scenario == "fig2") {
    d = json::object();
  } else if (scenario == "theorem1_sweep") {
    d = {{"instances", 30}, {"n0", {1, 2, 3}}};
  } else if (scenario == "theorem2_local") {
    d = {{"region", mid}, {"period_rule", "n0"}, {"target_n0", 2}, {"period_factor", 1.0}, {"initial_state", neel}};
  } else if (scenario == "absorption") {
    d = {{"order", 0},           {"de_points", 8},          {"de_max_fraction", 0.8}, {"period_rule", "tau"},
         {"period_factor", 1.0}, {"noise_floor", 1e-24},    {"control", true}};
  } else if (scenario == "prethermalization") {
    d = {{"observable", json::array({{{"sites", {0, 1}}, {"letters", "ZZ"}, {"poly", {1.0}}}})},
         {"initial_state", neel},
         {"shell_half_width", 0.05},
         {"window", {0.25, 0.75}},
         {"period_rule", "explicit"},
         {"period_factor", 1.0},
         {"target_n0", 1}};
  } else if (scenario == "dynamical_localization") {
    d = {{"omega_factors", {2.0, 4.0, 8.0}}, {"initial_state", "ground"}};
  } else if (scenario == "integrability_breaking") {
    d = {{"epsilons", {0.0, 0.01, 0.02, 0.04, 1.0}},
         {"perturbation", json::array({{{"sites", "each_bond"}, {"letters", "ZZ"}, {"poly", {1.0}}}})},
         {"observable", json::array({{{"sites", {0}}, {"letters", "Z"}, {"poly", {1.0}}}})},
         {"initial_state", neel},
         {"threshold", 0.05}};
  } else if (scenario == "lemma_suite") {
    d = {{"instances", 100},          {"min_sites", 4}, {"max_sites", 6}, {"lemma1_orders", 8},
         {"theorem1_periods", 10},    {"lemma6_constant", "corrected"},  {"inject_violating", false}};
  } else {
    throw ConfigError("scenario: unknown scenario '" + scenario + "'");
  }
  if (!given.is_object()) throw ConfigError("params: expected an object");
  for (const auto& [k, v] : given.items()) {
    if (!d.contains(k)) throw ConfigError("params: unknown key '" + k + "' for scenario " + scenario);
    const auto& dv = d[k];
    const bool same = (dv.is_number() && v.is_number()) || (dv.is_boolean() && v.is_boolean()) ||
                      (dv.is_string() && v.is_string()) || (dv.is_array() && v.is_array());
    if (!same) throw ConfigError("params." + k + ": wrong type");
    d[k] = v;
  }
  // value checks
  auto positive_int = [&](const char* k) {
    if (d.contains(k) && (!d[k].is_number_integer() || d[k].get<long>() < 1)) throw ConfigError(std::string("params.") + k + ": must be a positive integer");
  };
  for (const char* k : {"instances", "de_points", "min_sites", "max_sites", "lemma1_orders", "theorem1_periods"}) positive_int(k);
  if (d.contains("period_rule")) {
    const auto r = d["period_rule"].get<std::string>();
    if (r != "explicit" && r != "n0" && r != "theorem1" && r != "tau") throw ConfigError("params.period_rule: expected explicit, n0, theorem1 or tau");
  }
  if (d.contains("lemma6_constant")) {
    const auto r = d["lemma6_constant"].get<std::string>();
    if (r != "corrected" && r != "printed" && r != "both") throw ConfigError("params.lemma6_constant: expected corrected, printed or both");
  }
  if (d.contains("initial_state")) {
    const auto s = d["initial_state"].get<std::string>();
    const bool ok = s == "ground" || (static_cast<int>(s.size()) == n_sites && s.find_first_not_of("01") == std::string::npos);
    if (!ok) throw ConfigError("params.initial_state: expected \"ground\" or a bit string of length " + std::to_string(n_sites));
  }
  for (const char* k : {"region"}) {
    if (!d.contains(k)) continue;
    const auto v = get_ints(d[k], std::string("params.") + k);
    if (v.empty()) throw ConfigError("params.region: empty");
    for (int s : v)
      if (s < 0 || s >= n_sites) throw ConfigError("params.region: site out of range");
  }
  for (const char* k : {"observable", "perturbation"})
    if (d.contains(k))
      for (std::size_t i = 0; i < d[k].size(); ++i) parse_term(d[k][i], std::string("params.") + k);
  for (const char* k : {"omega_factors", "epsilons", "window"})
    if (d.contains(k)) get_numbers(d[k], std::string("params.") + k);
  if (d.contains("window")) {
    const auto w = get_numbers(d["window"], "params.window");
    if (w.size() != 2 || !(w[0] >= 0 && w[0] < w[1] && w[1] <= 1)) throw ConfigError("params.window: expected [a, b] with 0 <= a < b <= 1");
  }
  if (d.contains("omega_factors") && d["omega_factors"].size() < 3) throw ConfigError("params.omega_factors: need at least 3 values");
  return d;
}

inline std::vector<double> default_periods(const std::string& sc) {
  if (sc == "fig2") return {0.2, 0.3, 0.4, 0.5};
  if (sc == "prethermalization" || sc == "integrability_breaking") return {0.2};
  return {1.0};
}

inline int default_n_max(const std::string& sc) { return sc == "fig2" ? 25 : 6; }

inline std::vector<long> default_periods_m(const std::string& sc) {
  auto range = [](long a, long b) {
    std::vector<long> v;
    for (long m = a; m <= b; ++m) v.push_back(m);
    return v;
  };
  if (sc == "absorption") return {1, 10, 100};
  if (sc == "theorem1_sweep") return range(1, 50);
  if (sc == "theorem2_local") return range(1, 20);
  if (sc == "prethermalization") return range(0, 200);
  if (sc == "dynamical_localization") return range(0, 100);
  if (sc == "integrability_breaking") return range(0, 500);
  return range(1, 10);
}

}  // namespace detail

inline DrivenSystem build_system(const SystemSpec& spec, double T, std::uint64_t seed);
namespace detail {
inline PauliOperator build_operator(const json& terms, const DrivenSystem& sys);
}

/// Parses and validates a scenario config; every field is checked before anything runs.
inline ScenarioConfig parse_config(const json& j) {
  detail::check_keys(j, {"scenario", "seed", "system", "periods", "orders", "periods_m", "tolerances", "output_dir", "params"}, "config");
  ScenarioConfig c;
  if (!j.contains("scenario") || !j["scenario"].is_string()) throw ConfigError("config: 'scenario' is required");
  c.scenario = j["scenario"].get<std::string>();
  if (std::find(scenario_names().begin(), scenario_names().end(), c.scenario) == scenario_names().end())
    throw ConfigError("scenario: unknown scenario '" + c.scenario + "'");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) throw ConfigError("seed: expected a non-negative integer");
    if (j["seed"].is_number_integer() && j["seed"].get<long long>() < 0) throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.system = detail::parse_system(j.contains("system") ? j["system"] : json::object());
  c.periods = j.contains("periods") ? detail::get_numbers(j["periods"], "periods") : detail::default_periods(c.scenario);
  if (c.periods.empty()) throw ConfigError("periods: empty");
  for (double T : c.periods)
    if (!(T > 0)) throw ConfigError("periods: must be positive");
  c.n_max = detail::default_n_max(c.scenario);
  if (j.contains("orders")) {
    detail::check_keys(j["orders"], {"max"}, "orders");
    if (j["orders"].contains("max")) c.n_max = detail::get_as<int>(j["orders"]["max"], "orders.max");
  }
  if (c.n_max < 0 || c.n_max > kMaxMagnusOrder) throw ConfigError("orders.max: must lie in 0..40");
  c.periods_m = detail::default_periods_m(c.scenario);
  if (j.contains("periods_m")) {
    const auto& pm = j["periods_m"];
    c.periods_m.clear();
    if (pm.is_array()) {
      for (const auto& v : pm) {
        if (!v.is_number_integer() || v.get<long>() < 0) throw ConfigError("periods_m: expected non-negative integers");
        c.periods_m.push_back(v.get<long>());
      }
    } else {
      detail::check_keys(pm, {"min", "max"}, "periods_m");
      const long lo = pm.contains("min") ? detail::get_as<long>(pm["min"], "periods_m.min") : 1;
      const long hi = pm.contains("max") ? detail::get_as<long>(pm["max"], "periods_m.max") : 10;
      if (lo < 0 || hi < lo) throw ConfigError("periods_m: bad range");
      for (long m = lo; m <= hi; ++m) c.periods_m.push_back(m);
    }
    if (c.periods_m.empty()) throw ConfigError("periods_m: empty");
    if (!std::is_sorted(c.periods_m.begin(), c.periods_m.end())) throw ConfigError("periods_m: must be sorted");
  }
  if (j.contains("tolerances")) {
    detail::check_keys(j["tolerances"], {"propagator", "max_doublings", "initial_steps"}, "tolerances");
    const auto& t = j["tolerances"];
    if (t.contains("propagator")) c.prop.tol = detail::get_number(t["propagator"], "tolerances.propagator");
    if (t.contains("max_doublings")) c.prop.max_doublings = detail::get_as<int>(t["max_doublings"], "tolerances.max_doublings");
    if (t.contains("initial_steps")) c.prop.initial_steps = detail::get_as<int>(t["initial_steps"], "tolerances.initial_steps");
    if (!(c.prop.tol >= 1e-13) || c.prop.max_doublings < 1 || c.prop.initial_steps < 1)
      throw ConfigError("tolerances: propagator >= 1e-13, positive step counts");
  }
  if (j.contains("output_dir")) c.output_dir = detail::get_as<std::string>(j["output_dir"], "output_dir");
  c.params = detail::resolve_params(c.scenario, j.contains("params") ? j["params"] : json::object(), c.system.sites);
  {
    // building once catches bad sites and letters before anything runs
    const auto sys = build_system(c.system, c.periods.front(), c.seed);
    for (const char* k : {"observable", "perturbation"})
      if (c.params.contains(k)) (void)detail::build_operator(c.params[k], sys);
  }
  c.resolved = json{{"scenario", c.scenario},
                    {"seed", c.seed},
                    {"system", detail::system_json(c.system)},
                    {"periods", c.periods},
                    {"orders", {{"max", c.n_max}}},
                    {"periods_m", c.periods_m},
                    {"tolerances", {{"propagator", c.prop.tol}, {"max_doublings", c.prop.max_doublings}, {"initial_steps", c.prop.initial_steps}}},
                    {"output_dir", c.output_dir},
                    {"params", c.params}};
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---- building systems from specs

namespace detail {

inline std::vector<double> to_absolute(std::vector<double> poly, const std::string& time, double T) {
  if (time == "scaled")
    for (std::size_t k = 0; k < poly.size(); ++k) poly[k] /= std::pow(T, static_cast<double>(k));
  return poly;
}

template <class Add>
void expand_term(const TermSpec& t, const DrivenSystem& sys, Add add) {
  if (t.sites == "each") {
    for (int i = 0; i < sys.n_sites(); ++i) add(PauliString({i}, t.letters));
  } else if (t.sites == "each_bond") {
    for (auto [a, b] : sys.bonds()) add(PauliString({a, b}, t.letters));
  } else {
    if (t.site_list.size() != t.letters.size()) throw ConfigError("term: sites and letters differ in length");
    for (int s : t.site_list)
      if (s < 0 || s >= sys.n_sites()) throw ConfigError("term: site index out of range");
    add(PauliString(t.site_list, t.letters));
  }
}

inline PauliOperator build_operator(const json& terms, const DrivenSystem& sys) {
  PauliOperator o(sys.n_sites());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto t = parse_term(terms[i], "operator");
    if (t.poly.size() != 1) throw ConfigError("operator terms take a single coefficient");
    expand_term(t, sys, [&](PauliString s) {
      s.coefficient *= t.poly[0];
      o.add(s);
    });
  }
  return o.prune();
}

inline void add_static_terms(DrivenSystem& sys, const json& terms, double scale) {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto t = parse_term(terms[i], "operator");
    if (t.poly.size() != 1) throw ConfigError("operator terms take a single coefficient");
    if (t.poly[0] * scale == 0.0) continue;
    expand_term(t, sys, [&](PauliString s) {
      s.coefficient *= t.poly[0] * scale;
      sys.add_static(s);
    });
  }
}

}  // namespace detail

inline DrivenSystem build_system(const SystemSpec& spec, double T, std::uint64_t seed) {
  DrivenSystem sys;
  if (spec.model == "random") {
    RandomSystemOptions ro = spec.random;
    ro.n_sites = spec.sites;
    ro.periodic = spec.periodic;
    sys = random_system(seed, T, ro);
  } else {
    sys = DrivenSystem(spec.sites, T);
    if (spec.bonds.empty()) {
      add_chain_bonds(sys, spec.periodic);
    } else {
      for (auto [a, b] : spec.bonds) {
        if (a < 0 || b < 0 || a >= spec.sites || b >= spec.sites || a == b) throw ConfigError("system.bonds: bad bond");
        sys.add_bond(a, b);
      }
    }
    if (spec.model == "heisenberg") add_heisenberg(sys, spec.couplings[0], spec.couplings[1], spec.couplings[2]);
    if (spec.model == "paper_ring") {
      add_heisenberg(sys, 1.5, 1.0, 0.5);
      for (int i = 0; i < spec.sites; ++i) sys.add_driving(PauliString({i}, "Z"), Profile::polynomial({0.0, 1.0}));
    }
  }
  try {
    for (const auto& t : spec.static_terms)
      detail::expand_term(t, sys, [&](PauliString s) {
        s.coefficient *= t.poly[0];
        sys.add_static(s);
      });
    for (const auto& t : spec.driving) {
      const auto poly = detail::to_absolute(t.poly, spec.time, T);
      detail::expand_term(t, sys, [&](PauliString s) { sys.add_driving(s, Profile::polynomial(poly)); });
    }
    if (!spec.order.empty()) sys.set_order(spec.order);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  return sys;
}

/// Fixed point T = f(lambda(T)); lambda can depend on T through the profiles.
inline DrivenSystem system_with_period(const SystemSpec& spec, std::uint64_t seed, double T0,
                                       const std::function<double(const LocalityMetrics&)>& rule) {
  DrivenSystem sys = build_system(spec, T0, seed);
  for (int it = 0; it < 60; ++it) {
    const double T = rule(locality_metrics(sys));
    if (!(T > 0) || !std::isfinite(T)) throw DomainError("period rule gave a non-positive period");
    if (std::abs(T - sys.period()) <= 1e-14 * T) break;
    sys = build_system(spec, T, seed);
  }
  return sys;
}

/// Period chosen so that floor(1/(16 lambda T)) = n0.
inline DrivenSystem instance_with_n0(const SystemSpec& spec, std::uint64_t seed, int n0) {
  auto sys = system_with_period(spec, seed, 1.0, [&](const LocalityMetrics& m) { return 1.0 / (16.0 * m.lambda * (n0 + 0.6)); });
  if (optimal_order_n0(locality_metrics(sys), sys.period()) != n0) throw DomainError("instance_with_n0: could not reach n0");
  return sys;
}

/// The period a scenario runs at: explicit, or from lambda via the named rule.
inline DrivenSystem scenario_system(const ScenarioConfig& c, double T_explicit) {
  const std::string rule = c.params.value("period_rule", std::string("explicit"));
  const double f = c.params.value("period_factor", 1.0);
  if (rule == "explicit") return build_system(c.system, T_explicit, c.seed);
  if (rule == "n0") return instance_with_n0(c.system, c.seed, c.params.value("target_n0", 1));
  if (rule == "theorem1")
    return system_with_period(c.system, c.seed, T_explicit, [&](const LocalityMetrics& m) { return f / (4.0 * m.lambda); });
  return system_with_period(c.system, c.seed, T_explicit, [&](const LocalityMetrics& m) { return f * theorem3_tau(m); });
}

inline Vector product_state(const std::string& bits) {
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] == '1') idx |= std::uint64_t{1} << i;
  Vector v = Vector::Zero(Eigen::Index{1} << bits.size());
  v(static_cast<Eigen::Index>(idx)) = 1.0;
  return v;
}

inline double expectation(const Vector& psi, const Matrix& o) { return (psi.adjoint() * (o * psi))(0).real(); }

// ---- records

struct PlotSpec {
  std::string name;
  std::string title;
  std::string x;
  std::string y;  // columns separated by '|'
  std::string series;
  std::string where;  // column:value
  bool logy = false;
  bool logx = false;
  std::string line() const {
    std::string s = "# plot name=" + name + ";title=" + title + ";x=" + x + ";y=" + y;
    if (!series.empty()) s += ";series=" + series;
    if (!where.empty()) s += ";where=" + where;
    if (logx) s += ";logx=1";
    if (logy) s += ";logy=1";
    return s;
  }
};

using Cell = std::variant<double, long, std::string>;

struct ExperimentRecord {
  std::string scenario;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<PlotSpec> plots;
  json parameters;
  json summary = json::object();
  int violations = 0;
  int not_applicable = 0;
  int passed = 0;
  double wall_seconds = 0.0;

  void add(std::vector<Cell> cells) {
    if (cells.size() != columns.size()) throw Error("record: row width differs from the header");
    std::vector<std::string> r;
    for (const auto& c : cells) {
      if (const double* d = std::get_if<double>(&c))
        r.push_back(format_number(*d));
      else if (const long* l = std::get_if<long>(&c))
        r.push_back(std::to_string(*l));
      else
        r.push_back(std::get<std::string>(c));
    }
    rows.push_back(std::move(r));
  }
  void count(const BoundReport& b) {
    if (b.status == BoundStatus::Fail) ++violations;
    else if (b.status == BoundStatus::NotApplicable) ++not_applicable;
    else ++passed;
  }

  std::string csv() const {
    std::string s = "# schema fml." + scenario + ".v" + std::to_string(kSchemaVersion) + "\n";
    for (const auto& p : plots) s += p.line() + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
    s += "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
      s += "\n";
    }
    return s;
  }
};

struct RunOptions {
  int threads = 1;
};

namespace detail {

inline std::string params_string(const BoundReport& b) {
  std::string p;
  for (const auto& [k, v] : b.params) p += (p.empty() ? "" : ";") + k + "=" + format_number(v);
  if (!b.label.empty()) p += (p.empty() ? "" : ";") + std::string("label=") + b.label;
  return p;
}

inline BlockOp same_basis(const UnitaryResult& uf, const BlockOp& like) {
  return uf.blocks.basis() == like.basis() ? uf.blocks : BlockOp::from_full(like.basis(), uf.matrix);
}

}  // namespace detail

// ---- scenarios

/// Per period: ||T^n Omega_n||, ||H_F^(n)|| and ||U_F - exp(-i H_F^(n) T)|| for n = 0..n_max.
inline ExperimentRecord run_fig2(const ScenarioConfig& c, const RunOptions& ro = {}) {
  ExperimentRecord r;
  r.scenario = "fig2";
  r.columns = {"T", "n", "weighted_norm", "hf_norm", "error"};
  r.plots = {{"weighted_norm", "norm of T^n Omega_n", "n", "weighted_norm", "T", "", true},
             {"hf_norm", "norm of H_F^(n)", "n", "hf_norm", "T", "", true},
             {"error", "error of exp(-i H_F^(n) T)", "n", "error", "T", "", true}};
  struct Out {
    std::vector<double> w, h, e;
    double lambda = 0;
    int n0 = 0;
    double tol = 0;
  };
  std::vector<Out> outs(c.periods.size());
  parallel_for(static_cast<int>(c.periods.size()), ro.threads, [&](int i) {
    const double T = c.periods[static_cast<std::size_t>(i)];
    const auto sys = build_system(c.system, T, c.seed);
    const auto series = omega_series(sys, c.n_max);
    PropagatorOptions po = c.prop;
    const auto uf = exact_floquet(sys, po);
    auto& o = outs[static_cast<std::size_t>(i)];
    const auto m = locality_metrics(sys);
    o.lambda = m.lambda;
    o.n0 = optimal_order_n0(m, T);
    o.tol = uf.tol;
    const BlockOp u = detail::same_basis(uf, series.omega(0));
    for (int n = 0; n <= c.n_max; ++n) {
      const auto h = truncate(series, n).op;
      o.w.push_back(series.weighted_norm(n));
      o.h.push_back(h.norm());
      o.e.push_back((u - expm_hermitian(h, T)).norm());
    }
  });
  json per = json::array();
  for (std::size_t i = 0; i < c.periods.size(); ++i) {
    const auto& o = outs[i];
    for (int n = 0; n <= c.n_max; ++n)
      r.add({c.periods[i], long(n), o.w[static_cast<std::size_t>(n)], o.h[static_cast<std::size_t>(n)], o.e[static_cast<std::size_t>(n)]});
    const auto emin = std::min_element(o.e.begin(), o.e.end());
    const auto wmin = std::min_element(o.w.begin(), o.w.end());
    per.push_back({{"T", c.periods[i]},
                   {"lambda", o.lambda},
                   {"n0", o.n0},
                   {"floquet_tol", o.tol},
                   {"argmin_error", emin - o.e.begin()},
                   {"min_error", *emin},
                   {"argmin_weighted_norm", wmin - o.w.begin()},
                   {"min_weighted_norm", *wmin},
                   {"last_weighted_norm", o.w.back()}});
  }
  r.summary["periods"] = per;
  return r;
}

/// Theorem 1 on random instances whose period is set to hit each requested n0.
inline ExperimentRecord run_theorem1_sweep(const ScenarioConfig& c, const RunOptions& ro = {}) {
  ExperimentRecord r;
  r.scenario = "theorem1_sweep";
  r.columns = {"instance", "n0", "T", "m", "lhs", "rhs", "margin", "status"};
  r.plots = {{"lhs", "left side against m", "m", "lhs", "instance", "", true},
             {"ratio", "bounds per instance", "m", "lhs|rhs", "", "instance:0", true}};
  const int count = c.params["instances"].get<int>();
  const auto n0s = detail::get_ints(c.params["n0"], "params.n0");
  if (n0s.empty()) throw ConfigError("params.n0: empty");
  const long m_max = c.periods_m.back();
  std::vector<std::vector<BoundReport>> out(static_cast<std::size_t>(count));
  std::vector<double> periods(static_cast<std::size_t>(count));
  parallel_for(count, ro.threads, [&](int i) {
    const int n0 = n0s[static_cast<std::size_t>(i) % n0s.size()];
    const auto sys = instance_with_n0(c.system, instance_seed(c.seed, static_cast<std::uint64_t>(i)), n0);
    const auto m = locality_metrics(sys);
    out[static_cast<std::size_t>(i)] = check_theorem1(sys, exact_floquet(sys, c.prop), omega_series(sys, n0), static_cast<int>(m_max), m);
    periods[static_cast<std::size_t>(i)] = sys.period();
  });
  for (int i = 0; i < count; ++i)
    for (const auto& b : out[static_cast<std::size_t>(i)]) {
      const long mm = static_cast<long>(b.param("m"));
      if (!std::binary_search(c.periods_m.begin(), c.periods_m.end(), mm)) continue;
      r.count(b);
      r.add({long(i), long(b.param("n0")), periods[static_cast<std::size_t>(i)], mm, b.lhs, b.rhs, b.margin(), to_string(b.status)});
    }
  return r;
}

/// Theorem 2 with the measured Lieb-Robinson profile.
inline ExperimentRecord run_theorem2_local(const ScenarioConfig& c, const RunOptions& ro = {}) {
  ExperimentRecord r;
  r.scenario = "theorem2_local";
  r.columns = {"kind", "m", "l", "t", "value", "rhs", "status"};
  r.plots = {{"bound", "reduced-state error against m (empirical G)", "m", "value|rhs", "", "kind:bound", true},
             {"profile", "measured G(l, t)", "t", "value", "l", "kind:profile", false}};
  const auto sys = scenario_system(c, c.periods.front());
  const auto m = locality_metrics(sys);
  const double T = sys.period();
  const int n0 = std::min(optimal_order_n0(m, T), kMaxMagnusOrder);
  const auto region = detail::get_ints(c.params["region"], "params.region");
  const long m_max = c.periods_m.back();
  std::vector<double> grid;
  for (long k = 0; k <= m_max; ++k) grid.push_back(static_cast<double>(k) * T);
  std::vector<std::vector<int>> ys;
  for (int s = 0; s < sys.n_sites(); ++s)
    if (std::find(region.begin(), region.end(), s) == region.end()) ys.push_back({s});
  for (int s : region) ys.push_back({s});
  const auto profile = measure_lr_profile(sys, region, ys, grid, c.prop, ro.threads);
  const auto series = omega_series(sys, n0);
  const auto uf = exact_floquet(sys, c.prop);
  const auto reports = check_theorem2(sys, uf, series, region, static_cast<int>(m_max), profile,
                                      product_state(c.params["initial_state"].get<std::string>()), m);
  for (const auto& b : reports) {
    r.count(b);
    r.add({std::string("bound"), static_cast<long>(b.param("m")), static_cast<long>(b.param("l0")), b.param("m") * T, b.lhs, b.rhs,
           to_string(b.status)});
  }
  for (std::size_t li = 0; li < profile.distances.size(); ++li)
    for (std::size_t j = 0; j < grid.size(); ++j)
      r.add({std::string("profile"), long(j), long(profile.distances[li]), grid[j], profile.G[li][j], std::string(""), std::string("")});
  r.summary = {{"T", T}, {"n0", n0}, {"lambda", m.lambda}, {"l0", theorem2_l0(sys, region, n0)},
               {"label", "empirical-G"}, {"dictionary", profile.dictionary}};
  return r;
}

/// Energy absorption from the ground state of H_F^(n), with the Theorem 3 overlay.
inline ExperimentRecord run_absorption(const ScenarioConfig& c, const RunOptions& ro = {}) {
  ExperimentRecord r;
  r.scenario = "absorption";
  r.columns = {"arm", "kind", "m", "dE", "P", "rhs", "trivial_rhs", "status"};
  r.plots = {{"absorption", "absorption probability against dE", "dE", "P", "m", "kind:point", true}};
  const auto driven = scenario_system(c, c.periods.front());
  const bool control = c.params["control"].get<bool>();
  const int n = c.params["order"].get<int>();
  if (n < 0 || n > kMaxMagnusOrder) throw ConfigError("params.order: out of range");
  const int points = c.params["de_points"].get<int>();
  const double frac = c.params["de_max_fraction"].get<double>();
  const double floor = c.params["noise_floor"].get<double>();
  std::vector<DrivenSystem> arms{driven};
  if (control) {
    arms.push_back(driven.undriven());
  }
  struct Out {
    std::vector<Theorem3Result> res;
    double tau = 0, E = 0, span = 0;
  };
  std::vector<Out> outs(arms.size());
  const auto m_driven = locality_metrics(driven);
  parallel_for(static_cast<int>(arms.size()), ro.threads, [&](int a) {
    const auto& sys = arms[static_cast<std::size_t>(a)];
    const auto series = omega_series(sys, n);
    const EnergyFilter f(truncate(series, n).full());
    const auto uf = exact_floquet(sys, c.prop);
    const double e = 0.5 * (f.energies()(0) + f.energies()(1));
    std::vector<double> grid;
    for (int j = 1; j <= points; ++j) grid.push_back(frac * f.span() * j / points);
    auto& o = outs[static_cast<std::size_t>(a)];
    o.E = e;
    o.span = f.span();
    // the control arm keeps the driven metrics so both share one right side
    o.tau = theorem3_tau(m_driven);
    for (long m : c.periods_m) o.res.push_back(check_theorem3(sys, series, n, uf, f, f.ground_state(), e, grid, m, m_driven, floor));
  });
  json fits = json::array();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const std::string arm = a == 0 ? "driven" : "undriven";
    for (std::size_t k = 0; k < c.periods_m.size(); ++k) {
      const auto& res = outs[a].res[k];
      for (const auto& b : res.reports) {
        if (a == 0) r.count(b);
        if (b.name == "theorem3") {
          r.add({arm, std::string("point"), c.periods_m[k], b.param("dE"), b.lhs, b.rhs, b.param("trivial_rhs"), to_string(b.status)});
        } else {
          r.add({arm, std::string("fit"), c.periods_m[k], std::string(""), b.lhs, b.rhs, std::string(""), to_string(b.status)});
          fits.push_back({{"arm", arm}, {"m", c.periods_m[k]}, {"slope", std::isfinite(res.slope) ? json(res.slope) : json(nullptr)},
                          {"points", res.fit_points}, {"status", to_string(b.status)}});
        }
      }
    }
  }
  r.summary = {{"T", driven.period()}, {"tau", outs[0].tau}, {"E", outs[0].E}, {"span", outs[0].span},
               {"lambda", m_driven.lambda}, {"lambda_tilde", m_driven.lambda_tilde}, {"V0", m_driven.V0},
               {"n0", optimal_order_n0(m_driven, driven.period())}, {"fits", fits}};
  return r;
}

/// Observable traces against the H_F^(0) microcanonical and infinite-temperature values.
inline ExperimentRecord run_prethermalization(const ScenarioConfig& c, const RunOptions& ro = {}) {
  (void)ro;
  ExperimentRecord r;
  r.scenario = "prethermalization";
  r.columns = {"m", "expectation", "microcanonical", "infinite_temperature"};
  r.plots = {{"trace", "observable against m", "m", "expectation|microcanonical|infinite_temperature", "", "", false}};
  const auto sys = scenario_system(c, c.periods.front());
  if (sys.n_sites() > 10) throw ConfigError("prethermalization: at most 10 sites");
  const Matrix o = to_dense(detail::build_operator(c.params["observable"], sys), sys.n_sites());
  const auto series = omega_series(sys, 0);
  const EnergyFilter f(truncate(series, 0).full());
  const std::string init = c.params["initial_state"].get<std::string>();
  const Vector psi0 = init == "ground" ? f.ground_state() : product_state(init);
  const double e0 = expectation(psi0, truncate(series, 0).full());
  const double half = c.params["shell_half_width"].get<double>() * f.span();
  double micro = 0.0;
  int shell = 0;
  for (Eigen::Index j = 0; j < f.energies().size(); ++j)
    if (std::abs(f.energies()(j) - e0) <= half) {
      micro += expectation(f.vectors().col(j), o);
      ++shell;
    }
  if (shell == 0) throw DomainError("prethermalization: empty microcanonical shell");
  micro /= shell;
  const double inf_t = o.trace().real() / static_cast<double>(o.rows());
  const Matrix uf = exact_floquet(sys, c.prop).matrix;
  Vector psi = psi0;
  long at = 0;
  std::vector<double> values;
  for (long m : c.periods_m) {
    psi = evolve(psi, uf, m - at);
    at = m;
    values.push_back(expectation(psi, o));
    r.add({m, values.back(), micro, inf_t});
  }
  const auto w = detail::get_numbers(c.params["window"], "params.window");
  const long lo = c.periods_m.front(), hi = c.periods_m.back();
  double avg = 0.0;
  int cnt = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double x = static_cast<double>(c.periods_m[k] - lo) / std::max<double>(1.0, static_cast<double>(hi - lo));
    if (x >= w[0] && x <= w[1]) {
      avg += values[k];
      ++cnt;
    }
  }
  avg = cnt ? avg / cnt : std::nan("");
  r.summary = {{"T", sys.period()},
               {"initial_energy", e0},
               {"shell_states", shell},
               {"microcanonical", micro},
               {"infinite_temperature", inf_t},
               {"window_average", avg},
               {"nearer_microcanonical", std::abs(avg - micro) < std::abs(avg - inf_t)}};
  return r;
}

/// Drift of <H_F^(n0)> at stroboscopic times for several driving frequencies.
inline ExperimentRecord run_dynamical_localization(const ScenarioConfig& c, const RunOptions& ro = {}) {
  ExperimentRecord r;
  r.scenario = "dynamical_localization";
  r.columns = {"kind", "omega_factor", "omega", "T", "n0", "m", "drift", "control_drift"};
  r.plots = {{"drift", "energy drift against m", "m", "drift", "omega_factor", "kind:trace", false},
             {"rate", "drift rate per period against omega", "omega", "drift", "", "kind:rate", true}};
  const auto factors = detail::get_numbers(c.params["omega_factors"], "params.omega_factors");
  const std::string init = c.params["initial_state"].get<std::string>();
  struct Out {
    double T = 0, omega = 0, rate = 0, control_rate = 0;
    int n0 = 0;
    std::vector<double> drift, control;
  };
  std::vector<Out> outs(factors.size());
  parallel_for(static_cast<int>(factors.size()), ro.threads, [&](int i) {
    const double cf = factors[static_cast<std::size_t>(i)];
    const auto sys = system_with_period(c.system, c.seed, c.periods.front(),
                                        [&](const LocalityMetrics& m) { return 2.0 * std::numbers::pi / (cf * m.lambda); });
    auto& o = outs[static_cast<std::size_t>(i)];
    o.T = sys.period();
    o.omega = 2.0 * std::numbers::pi / o.T;
    o.n0 = std::min(optimal_order_n0(locality_metrics(sys), o.T), c.n_max);
    const Matrix h = truncate(omega_series(sys, o.n0), o.n0).full();
    const EnergyFilter f(h);
    const Vector psi0 = init == "ground" ? f.ground_state() : product_state(init);
    const double e0 = expectation(psi0, h);
    const Matrix uf = exact_floquet(sys, c.prop).matrix;
    const Matrix v = expm_hermitian(h, o.T);
    Vector a = psi0, b = psi0;
    long at = 0;
    double worst = 0, worst_c = 0;
    for (long m : c.periods_m) {
      a = evolve(a, uf, m - at);
      b = evolve(b, v, m - at);
      at = m;
      o.drift.push_back(expectation(a, h) - e0);
      o.control.push_back(expectation(b, h) - e0);
      worst = std::max(worst, std::abs(o.drift.back()));
      worst_c = std::max(worst_c, std::abs(o.control.back()));
    }
    const double span = static_cast<double>(std::max<long>(1, c.periods_m.back()));
    o.rate = worst / span;
    o.control_rate = worst_c / span;
  });
  json rates = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const auto& o = outs[i];
    for (std::size_t k = 0; k < c.periods_m.size(); ++k)
      r.add({std::string("trace"), factors[i], o.omega, o.T, long(o.n0), c.periods_m[k], o.drift[k], o.control[k]});
    r.add({std::string("rate"), factors[i], o.omega, o.T, long(o.n0), std::string(""), o.rate, o.control_rate});
    rates.push_back({{"omega_factor", factors[i]}, {"omega", o.omega}, {"T", o.T}, {"rate", o.rate}, {"control_rate", o.control_rate}});
    if (i > 0 && factors[i] > factors[i - 1] && !(o.rate < outs[i - 1].rate)) monotone = false;
  }
  r.summary = {{"rates", rates}, {"rate_definition", "max_m |drift(m)| / m_max"}, {"monotone_decreasing", monotone}};
  return r;
}

/// Relaxation traces of H*(t) + eps V and the time the eps run leaves the eps = 0 run.
inline ExperimentRecord run_integrability_breaking(const ScenarioConfig& c, const RunOptions& ro = {}) {
  ExperimentRecord r;
  r.scenario = "integrability_breaking";
  r.columns = {"kind", "epsilon", "m", "value"};
  r.plots = {{"trace", "observable against m", "m", "value", "epsilon", "kind:trace", false}};
  const auto eps = detail::get_numbers(c.params["epsilons"], "params.epsilons");
  const double threshold = c.params["threshold"].get<double>();
  const auto base = build_system(c.system, c.periods.front(), c.seed);
  const Matrix o = to_dense(detail::build_operator(c.params["observable"], base), base.n_sites());
  const Vector psi0 = product_state(c.params["initial_state"].get<std::string>() == "ground" ? std::string(base.n_sites(), '0')
                                                                                              : c.params["initial_state"].get<std::string>());
  auto trace = [&](double e) {
    DrivenSystem sys = base;
    detail::add_static_terms(sys, c.params["perturbation"], e);
    const Matrix uf = exact_floquet(sys, c.prop).matrix;
    Vector psi = psi0;
    long at = 0;
    std::vector<double> out;
    for (long m : c.periods_m) {
      psi = evolve(psi, uf, m - at);
      at = m;
      out.push_back(expectation(psi, o));
    }
    return out;
  };
  std::vector<std::vector<double>> traces(eps.size());
  const auto ref = trace(0.0);
  parallel_for(static_cast<int>(eps.size()), ro.threads, [&](int i) { traces[static_cast<std::size_t>(i)] = trace(eps[static_cast<std::size_t>(i)]); });
  json cross = json::array();
  std::vector<std::pair<double, long>> crossings;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    long at = -1;
    for (std::size_t k = 0; k < ref.size(); ++k)
      if (std::abs(traces[i][k] - ref[k]) > threshold) {
        at = c.periods_m[k];
        break;
      }
    for (std::size_t k = 0; k < ref.size(); ++k) r.add({std::string("trace"), eps[i], c.periods_m[k], traces[i][k]});
    r.add({std::string("crossing"), eps[i], at, std::string("")});
    cross.push_back({{"epsilon", eps[i]}, {"crossing_m", at}, {"eps_times_crossing", at >= 0 ? json(eps[i] * at * base.period()) : json(nullptr)}});
    crossings.emplace_back(eps[i], at);
  }
  std::sort(crossings.begin(), crossings.end());
  bool shortens = true;
  for (std::size_t i = 1; i < crossings.size(); ++i) {
    const auto [e0, c0] = crossings[i - 1];
    const auto [e1, c1] = crossings[i];
    if (e0 <= 0.0 || c1 < 0) continue;
    if (c0 >= 0 && c1 > c0) shortens = false;
  }
  r.summary = {{"T", base.period()}, {"threshold", threshold}, {"crossings", cross}, {"shortens_with_epsilon", shortens}};
  return r;
}

/// Every verifier over seeded random instances inside the hypotheses.
inline ExperimentRecord run_lemma_suite(const ScenarioConfig& c, const RunOptions& ro = {}) {
  ExperimentRecord r;
  r.scenario = "lemma_suite";
  r.columns = {"instance", "sites", "name", "status", "lhs", "rhs", "margin", "params"};
  r.plots = {{"margins", "left side against right side", "rhs", "lhs", "name", "", true, true}};
  const int count = c.params["instances"].get<int>();
  const int lo = c.params["min_sites"].get<int>(), hi = c.params["max_sites"].get<int>();
  if (lo > hi || hi > 8) throw ConfigError("params: need min_sites <= max_sites <= 8");
  const int n1 = c.params["lemma1_orders"].get<int>();
  const int m_max = c.params["theorem1_periods"].get<int>();
  const std::string l6 = c.params["lemma6_constant"].get<std::string>();
  const bool inject = c.params["inject_violating"].get<bool>();
  std::vector<std::vector<BoundReport>> out(static_cast<std::size_t>(count));
  std::vector<int> sizes(static_cast<std::size_t>(count));
  parallel_for(count, ro.threads, [&](int i) {
    const std::uint64_t seed = instance_seed(c.seed, static_cast<std::uint64_t>(i));
    std::mt19937_64 rng(seed);
    SystemSpec spec = c.system;
    spec.model = "random";
    spec.sites = lo + i % (hi - lo + 1);
    spec.random.n_sites = spec.sites;
    spec.random.degree = 1 + i % 2;
    spec.static_terms.clear();
    spec.driving.clear();
    spec.order.clear();
    const int target = 1 + i % 3;
    auto sys = instance_with_n0(spec, seed, target);
    const bool violating = inject && i % 10 == 9;
    if (violating) sys.set_period(2.0 / locality_metrics(sys).lambda);
    const int N = sys.n_sites();
    sizes[static_cast<std::size_t>(i)] = N;
    const auto m = locality_metrics(sys);
    const double T = sys.period();
    const int n0 = std::min(optimal_order_n0(m, T), 6);
    auto& rep = out[static_cast<std::size_t>(i)];
    const auto series = omega_series(sys, std::max(n1, n0 + 1));
    for (auto& b : check_lemma1(series, m, n1)) rep.push_back(b);
    const auto uf = exact_floquet(sys, c.prop);
    if (violating) {
      for (auto& b : check_theorem1(sys, uf, omega_series(sys, 1), m_max, m)) rep.push_back(b);
    } else {
      for (auto& b : check_theorem1(sys, uf, series, m_max, m)) rep.push_back(b);
      for (int n = 0; n <= n0; ++n) rep.push_back(check_corollary1(sys, uf, series, n, m));
    }
    if (!violating)  // out-of-hypothesis periods make the stage propagation very long
      for (auto& b : lemma2_check(sys, n0)) rep.push_back(b);
    // operators drawn from the instance: H(t) at random times, local pieces, random strings
    auto h_at = [&](double t) {
      PauliOperator h = sys.h0();
      h += sys.driving_at(t);
      return h.prune();
    };
    auto random_string = [&](int weight) {
      const int start = static_cast<int>(rng() % static_cast<std::uint64_t>(N));
      std::vector<int> sites;
      std::string letters;
      for (int w = 0; w < weight; ++w) {
        sites.push_back((start + w) % N);
        letters += "XYZ"[rng() % 3];
      }
      std::sort(sites.begin(), sites.end());
      sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
      letters.resize(sites.size());
      return PauliOperator(N, PauliString(sites, letters, uniform(rng, 0.5, 1.5)));
    };
    std::vector<PauliOperator> hs;
    for (int d = 0; d < 4; ++d) hs.push_back(h_at(T * uniform(rng, 0.0, 1.0)));
    const int depth = 1 + i % 4;
    rep.push_back(check_lemma3(std::vector<PauliOperator>(hs.begin(), hs.begin() + depth), random_string(1 + static_cast<int>(rng() % 2))));
    rep.push_back(check_lemma4(hs[0], random_string(1 + static_cast<int>(rng() % 3))));
    rep.push_back(check_lemma5(std::vector<PauliOperator>(hs.begin(), hs.begin() + std::min(4, 2 + i % 3))));
    // Lemma 6 needs T <= tau, which is shorter than the n0 rule above
    const auto sys6 = system_with_period(spec, seed, T, [](const LocalityMetrics& mm) { return 0.9 * theorem3_tau(mm); });
    const auto m6 = locality_metrics(sys6);
    const double tau = theorem3_tau(m6);
    const int n0l6 = std::min(optimal_order_n0(m6, sys6.period()), 3);
    const auto series6 = omega_series(sys6, n0l6);
    for (double x : {0.0, 0.5 * tau, tau}) {
      const auto a = random_string(1 + static_cast<int>(rng() % 2));
      const auto l = check_lemma6(series6, n0l6, a, x, m6);
      if (l6 != "printed") rep.push_back(l.corrected);
      if (l6 != "corrected") rep.push_back(l.printed);
    }
  });
  std::map<std::string, std::array<int, 3>> tally;
  for (int i = 0; i < count; ++i)
    for (const auto& b : out[static_cast<std::size_t>(i)]) {
      r.count(b);
      auto& t = tally[b.name];
      ++t[b.status == BoundStatus::Pass ? 0 : b.status == BoundStatus::Fail ? 1 : 2];
      r.add({long(i), long(sizes[static_cast<std::size_t>(i)]), b.name, to_string(b.status), b.lhs, b.rhs, b.margin(), detail::params_string(b)});
    }
  json tj = json::object();
  for (const auto& [k, v] : tally) tj[k] = {{"pass", v[0]}, {"fail", v[1]}, {"not_applicable", v[2]}};
  r.summary = {{"instances", count}, {"by_bound", tj}};
  return r;
}

inline ExperimentRecord run_scenario(const ScenarioConfig& c, const RunOptions& ro = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentRecord r;
  if (c.scenario == "fig2") r = run_fig2(c, ro);
  else if (c.scenario == "theorem1_sweep") r = run_theorem1_sweep(c, ro);
  else if (c.scenario == "theorem2_local") r = run_theorem2_local(c, ro);
  else if (c.scenario == "absorption") r = run_absorption(c, ro);
  else if (c.scenario == "prethermalization") r = run_prethermalization(c, ro);
  else if (c.scenario == "dynamical_localization") r = run_dynamical_localization(c, ro);
  else if (c.scenario == "integrability_breaking") r = run_integrability_breaking(c, ro);
  else if (c.scenario == "lemma_suite") r = run_lemma_suite(c, ro);
  else throw ConfigError("scenario: unknown scenario '" + c.scenario + "'");
  r.parameters = c.resolved;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---- CSV reading and SVG rendering

struct CsvTable {
  std::string schema;
  std::vector<PlotSpec> plots;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw ConfigError("csv: no column '" + name + "'");
  }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline PlotSpec parse_plot_line(const std::string& body) {
  PlotSpec p;
  for (const auto& kv : split(body, ';')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "name") p.name = v;
    else if (k == "title") p.title = v;
    else if (k == "x") p.x = v;
    else if (k == "y") p.y = v;
    else if (k == "series") p.series = v;
    else if (k == "where") p.where = v;
    else if (k == "logx") p.logx = v == "1";
    else if (k == "logy") p.logy = v == "1";
  }
  return p;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  if (s == "nan") return false;
  if (s == "inf" || s == "-inf") return false;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string tick_label(double v, bool log) {
  char buf[64];
  if (log) {
    std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", std::abs(v) < 1e-12 ? 0.0 : v);
  }
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char ch : s) {
    if (ch == '<') o += "&lt;";
    else if (ch == '>') o += "&gt;";
    else if (ch == '&') o += "&amp;";
    else o += ch;
  }
  return o;
}

inline std::vector<double> ticks(double lo, double hi, bool log) {
  std::vector<double> t;
  if (log) {
    const int a = static_cast<int>(std::ceil(lo - 1e-9)), b = static_cast<int>(std::floor(hi + 1e-9));
    const int step = std::max(1, (b - a) / 8 + 1);
    for (int k = a; k <= b; k += step) t.push_back(k);
    return t;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= raw) {
      step = f * mag;
      break;
    }
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(v);
  return t;
}

}  // namespace detail

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# schema ", 0) == 0) {
      t.schema = line.substr(9);
    } else if (line.rfind("# plot ", 0) == 0) {
      t.plots.push_back(detail::parse_plot_line(line.substr(7)));
    } else if (line[0] == '#') {
      continue;
    } else if (!header) {
      t.columns = detail::split(line, ',');
      header = true;
    } else {
      auto cells = detail::split(line, ',');
      // the params column may hold ';' but never ','; anything past the header width is folded back
      while (cells.size() > t.columns.size()) {
        cells[cells.size() - 2] += "," + cells.back();
        cells.pop_back();
      }
      if (cells.size() != t.columns.size()) throw ConfigError("csv: row width differs from the header");
      t.rows.push_back(std::move(cells));
    }
  }
  if (!header) throw ConfigError("csv: no header row");
  return t;
}

/// Line chart of one plot spec; output depends only on the table.
inline std::string render_svg(const CsvTable& t, const PlotSpec& p) {
  constexpr double W = 720, H = 450, L = 80, R = 170, Tm = 40, B = 55;
  const int xc = t.column(p.x);
  int wc = -1;
  std::string wv;
  if (!p.where.empty()) {
    const auto pos = p.where.find(':');
    wc = t.column(p.where.substr(0, pos));
    wv = p.where.substr(pos + 1);
  }
  const int sc = p.series.empty() ? -1 : t.column(p.series);
  const auto ycols = detail::split(p.y, '|');
  struct Line {
    std::string label;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Line> lines;
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) {
    if (wc >= 0 && row[static_cast<std::size_t>(wc)] != wv) continue;
    double x = 0;
    if (!detail::parse_double(row[static_cast<std::size_t>(xc)], x)) continue;
    if (p.logx) {
      if (!(x > 0)) continue;
      x = std::log10(x);
    }
    for (const auto& yc : ycols) {
      double y = 0;
      if (!detail::parse_double(row[static_cast<std::size_t>(t.column(yc))], y)) continue;
      if (p.logy) {
        if (!(y > 0)) continue;
        y = std::log10(y);
      }
      std::string label = sc >= 0 ? p.series + "=" + row[static_cast<std::size_t>(sc)] : std::string();
      if (ycols.size() > 1 || label.empty()) label = label.empty() ? yc : yc + ", " + label;
      auto it = index.find(label);
      if (it == index.end()) {
        it = index.emplace(label, lines.size()).first;
        lines.push_back({label, {}});
      }
      lines[it->second].pts.emplace_back(x, y);
    }
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& l : lines)
    for (auto [x, y] : l.pts) {
      if (first) {
        x0 = x1 = x;
        y0 = y1 = y;
        first = false;
      }
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.04 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - Tm - B); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22"};
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fixed(W, 0) + "\" height=\"" + detail::fixed(H, 0) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + detail::fixed(W / 2 - R / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + detail::xml_escape(p.title) + "</text>\n";
  s += "<rect x=\"" + detail::fixed(L) + "\" y=\"" + detail::fixed(Tm) + "\" width=\"" + detail::fixed(W - L - R) + "\" height=\"" +
       detail::fixed(H - Tm - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double v : detail::ticks(x0, x1, p.logx)) {
    s += "<line x1=\"" + detail::fixed(px(v)) + "\" y1=\"" + detail::fixed(H - B) + "\" x2=\"" + detail::fixed(px(v)) + "\" y2=\"" +
         detail::fixed(H - B + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fixed(px(v)) + "\" y=\"" + detail::fixed(H - B + 18) + "\" text-anchor=\"middle\">" +
         detail::tick_label(v, p.logx) + "</text>\n";
  }
  for (double v : detail::ticks(y0, y1, p.logy)) {
    s += "<line x1=\"" + detail::fixed(L - 5) + "\" y1=\"" + detail::fixed(py(v)) + "\" x2=\"" + detail::fixed(W - R) + "\" y2=\"" +
         detail::fixed(py(v)) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + detail::fixed(L - 8) + "\" y=\"" + detail::fixed(py(v) + 4) + "\" text-anchor=\"end\">" +
         detail::tick_label(v, p.logy) + "</text>\n";
  }
  s += "<text x=\"" + detail::fixed(L + (W - L - R) / 2) + "\" y=\"" + detail::fixed(H - 12) + "\" text-anchor=\"middle\">" +
       detail::xml_escape(p.x) + (p.logx ? " (log)" : "") + "</text>\n";
  s += "<text x=\"18\" y=\"" + detail::fixed(Tm + (H - Tm - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       detail::fixed(Tm + (H - Tm - B) / 2) + ")\">" + detail::xml_escape(p.y) + (p.logy ? " (log)" : "") + "</text>\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const char* col = kColors[i % 10];
    std::string pts;
    for (auto [x, y] : lines[i].pts) pts += (pts.empty() ? "" : " ") + detail::fixed(px(x)) + "," + detail::fixed(py(y));
    s += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = Tm + 14 + 16 * static_cast<double>(i);
    s += "<line x1=\"" + detail::fixed(W - R + 10) + "\" y1=\"" + detail::fixed(ly - 4) + "\" x2=\"" + detail::fixed(W - R + 30) +
         "\" y2=\"" + detail::fixed(ly - 4) + "\" stroke=\"" + col + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + detail::fixed(W - R + 35) + "\" y=\"" + detail::fixed(ly) + "\">" + detail::xml_escape(lines[i].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

inline std::string render_svg(const std::string& csv_text, const std::string& plot_name = "") {
  const auto t = parse_csv(csv_text);
  if (t.plots.empty()) throw ConfigError("csv: no plot lines");
  for (const auto& p : t.plots)
    if (plot_name.empty() || p.name == plot_name) return render_svg(t, p);
  throw ConfigError("csv: no plot named '" + plot_name + "'");
}

// ---- output directory

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

inline json meta_json(const ExperimentRecord& r, const ScenarioConfig& c, int threads) {
  return json{{"scenario", r.scenario},
              {"artifact_version", kArtifactVersion},
              {"schema_version", kSchemaVersion},
              {"config", c.resolved},
              {"seed", c.seed},
              {"threads", threads},
              {"versions", {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"compiler", __VERSION__},
                            {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
              {"wall_seconds", r.wall_seconds},
              {"bounds", {{"pass", r.passed}, {"fail", r.violations}, {"not_applicable", r.not_applicable}}},
              {"summary", r.summary}};
}

/// Writes data.csv, meta.json and plot_<name>.svg; returns the run directory.
inline std::filesystem::path write_outputs(const ExperimentRecord& r, const ScenarioConfig& c, const std::filesystem::path& root,
                                           int threads) {
  namespace fs = std::filesystem;
  const std::string stem = r.scenario + "_" + utc_timestamp();
  fs::path dir = root / stem;
  for (int k = 1; fs::exists(dir); ++k) dir = root / (stem + "_" + std::to_string(k));
  fs::create_directories(dir);
  const std::string csv = r.csv();
  std::ofstream(dir / "data.csv", std::ios::binary) << csv;
  std::ofstream(dir / "meta.json", std::ios::binary) << meta_json(r, c, threads).dump(2) << "\n";
  const auto table = parse_csv(csv);
  for (const auto& p : table.plots) std::ofstream(dir / ("plot_" + p.name + ".svg"), std::ios::binary) << render_svg(table, p);
  return dir;
}

}  // namespace fml

#endif  // FML_EXPERIMENTS_HPP
