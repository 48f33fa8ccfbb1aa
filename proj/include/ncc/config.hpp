#pragma once

// Run configuration: a versioned JSON document describing a scenario grid.
//
//   {
//     "schema_version": 1,
//     "setting": "2A",
//     "design":     {"arms": 4, "entry_spacing": 250, "arm_size": 250,
//                    "control_mean": 0, "sigma": 1, "evaluated_arm": 3},
//     "trend":      {"patterns": ["linear"], "lambda": {"from": -0.5, "to": 0.5, "step": 0.125},
//                    "lambda_profile": [1, 1, 1, 1, 1], "turning_point": 750, "cycles": 1},
//     "analysis":   {"estimators": ["fixed_period"], "c_length": [100], "spline_degree": 3,
//                    "alpha": 0.025, "sided": "one_greater"},
//     "simulation": {"hypotheses": ["null"], "effect": 0.25, "replicates": 1000, "seed": 42}
//   }
//
// Numeric axes accept a number, a list, or an inclusive {from, to, step} range.
// Unknown keys are rejected.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ncc/error.hpp"
#include "ncc/simharness.hpp"

namespace ncc {

inline constexpr int config_schema_version = 1;

namespace detail {

using nlohmann::json;

// Typed access to one JSON object; remembers which keys were read so the
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_.empty() ? "document" : path_, "expected an object");
  }

  static void fail(const std::string& field, const std::string& msg) { throw ConfigError(field + ": " + msg); }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    return as_number(*v, field(key));
  }

  long long integer(const std::string& key, long long fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    return as_integer(*v, field(key));
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(field(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (v->is_string()) return {v->get<std::string>()};
    if (!v->is_array()) fail(field(key), "expected a string or a list of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string()) fail(field(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  // Number, list of numbers, or {from, to, step}.
  std::vector<double> axis(const std::string& key, std::vector<double> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    const std::string f = field(key);
    if (v->is_number()) return {as_number(*v, f)};
    if (v->is_array()) {
      std::vector<double> out;
      for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_number((*v)[i], f + "[" + std::to_string(i) + "]"));
      return out;
    }
    if (v->is_object()) {
      ObjectReader r(*v, f);
      const json* from = r.find("from");
      const json* to = r.find("to");
      const json* step = r.find("step");
      r.finish();
      if (!from || !to || !step) fail(f, "range needs from, to and step");
      const double a = as_number(*from, f + ".from");
      const double b = as_number(*to, f + ".to");
      const double s = as_number(*step, f + ".step");
      if (!(s > 0.0)) fail(f + ".step", "must be > 0");
      if (b < a) fail(f + ".to", "must be >= from");
      const double count = (b - a) / s;
      const auto n = static_cast<long long>(std::floor(count + 1e-9));
      if (n > 100000) fail(f, "range has too many values");
      std::vector<double> out;
      for (long long i = 0; i <= n; ++i) {
        double x = a + static_cast<double>(i) * s;
        // Snap values like 0.30000000000000004 produced by decimal steps.
        const double snapped = std::round(x * 1e9) / 1e9;
        if (std::fabs(snapped - x) < 1e-12 * (1.0 + std::fabs(x))) x = snapped;
        out.push_back(x);
      }
      return out;
    }
    fail(f, "expected a number, a list of numbers or a {from, to, step} range");
    return {};
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) fail(field(it.key()), "unknown key");
  }

  static double as_number(const json& v, const std::string& f) {
    if (!v.is_number()) fail(f, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(f, "must be finite");
    return x;
  }

  static long long as_integer(const json& v, const std::string& f) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::fabs(x) < 9e15) return static_cast<long long>(x);
    }
    fail(f, "expected an integer");
    return 0;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T, typename Parse>
std::vector<T> parse_names(const std::vector<std::string>& names, const std::string& field, Parse parse) {
  std::vector<T> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    try {
      out.push_back(parse(names[i]));
    } catch (const ConfigError& e) {
      throw ConfigError(field + "[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

inline int checked_int(long long v, const std::string& field, long long lo, long long hi) {
  if (v < lo || v > hi)
    throw ConfigError(field + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

}  // namespace detail

inline GridSpec grid_from_json(const nlohmann::json& doc) {
  using detail::ObjectReader;
  ObjectReader root(doc, "");
  const long long version = root.integer("schema_version", -1);
  if (version != config_schema_version)
    throw ConfigError("schema_version: expected " + std::to_string(config_schema_version));

  GridSpec g;
  g.setting = root.string("setting", g.setting);

  if (const auto* d = root.find("design")) {
    ObjectReader r(*d, "design");
    g.base.num_arms = detail::checked_int(r.integer("arms", g.base.num_arms), "design.arms", 2, 1000);
    std::vector<double> spacings = r.axis("entry_spacing", {static_cast<double>(g.spacings.front())});
    g.spacings.clear();
    for (std::size_t i = 0; i < spacings.size(); ++i) {
      const std::string f = "design.entry_spacing[" + std::to_string(i) + "]";
      if (spacings[i] != std::floor(spacings[i])) throw ConfigError(f + ": expected an integer");
      g.spacings.push_back(detail::checked_int(static_cast<long long>(spacings[i]), f, 0, 1000000));
    }
    g.base.arm_size = detail::checked_int(r.integer("arm_size", g.base.arm_size), "design.arm_size", 2, 1000000);
    g.base.control_mean = r.number("control_mean", g.base.control_mean);
    g.base.sigma = r.number("sigma", g.base.sigma);
    if (!(g.base.sigma > 0.0)) throw ConfigError("design.sigma: must be > 0");
    g.base.evaluated_arm =
        detail::checked_int(r.integer("evaluated_arm", g.base.evaluated_arm), "design.evaluated_arm", 1,
                            g.base.num_arms);
    r.finish();
  }

  if (const auto* t = root.find("trend")) {
    ObjectReader r(*t, "trend");
    g.patterns = detail::parse_names<TrendPattern>(r.strings("patterns", {"linear"}), "trend.patterns",
                                                   parse_trend_pattern);
    g.lambdas = r.axis("lambda", g.lambdas);
    if (const auto* p = r.find("lambda_profile")) {
      if (!p->is_array()) ObjectReader::fail("trend.lambda_profile", "expected a list of numbers");
      g.lambda_profile.clear();
      for (std::size_t i = 0; i < p->size(); ++i)
        g.lambda_profile.push_back(
            ObjectReader::as_number((*p)[i], "trend.lambda_profile[" + std::to_string(i) + "]"));
      if (g.lambda_profile.size() != static_cast<std::size_t>(g.base.num_arms) + 1)
        ObjectReader::fail("trend.lambda_profile", "needs arms + 1 entries (control first)");
    }
    if (const auto* tp = r.find("turning_point")) {
      g.turning_point = ObjectReader::as_number(*tp, "trend.turning_point");
      if (!(*g.turning_point > 1.0)) ObjectReader::fail("trend.turning_point", "must be > 1");
    }
    g.cycles = r.number("cycles", g.cycles);
    if (!(g.cycles > 0.0)) ObjectReader::fail("trend.cycles", "must be > 0");
    r.finish();
  }

  if (const auto* a = root.find("analysis")) {
    ObjectReader r(*a, "analysis");
    g.estimators = detail::parse_names<Estimator>(r.strings("estimators", {"fixed_period"}), "analysis.estimators",
                                                  parse_estimator);
    g.c_lengths = r.axis("c_length", {});
    for (std::size_t i = 0; i < g.c_lengths.size(); ++i)
      if (!(g.c_lengths[i] >= 1.0))
        ObjectReader::fail("analysis.c_length[" + std::to_string(i) + "]", "must be >= 1");
    g.spline_degree =
        detail::checked_int(r.integer("spline_degree", g.spline_degree), "analysis.spline_degree", 1, 3);
    g.alpha = r.number("alpha", g.alpha);
    if (!(g.alpha > 0.0 && g.alpha < 1.0)) ObjectReader::fail("analysis.alpha", "must lie in (0, 1)");
    try {
      g.sided = parse_sided(r.string("sided", std::string(to_string(g.sided))));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("analysis.sided: ") + e.what());
    }
    r.finish();
  }

  if (const auto* s = root.find("simulation")) {
    ObjectReader r(*s, "simulation");
    g.hypotheses = detail::parse_names<Hypothesis>(r.strings("hypotheses", {"null"}), "simulation.hypotheses",
                                                   parse_hypothesis);
    g.effect = r.number("effect", g.effect);
    g.replicates =
        detail::checked_int(r.integer("replicates", g.replicates), "simulation.replicates", 1, 100000000);
    const long long seed = r.integer("seed", static_cast<long long>(g.seed));
    if (seed < 0) ObjectReader::fail("simulation.seed", "must be >= 0");
    g.seed = static_cast<std::uint64_t>(seed);
    r.finish();
  }
  root.finish();

  if (g.needs_calendar() && g.c_lengths.empty())
    throw ConfigError("analysis.c_length: required by calendar-time estimators");
  g.validate();
  for (const auto& cell : grid_scenarios(g)) cell.scenario.validate();
  return g;
}

inline GridSpec parse_run_config(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return grid_from_json(doc);
}

inline GridSpec load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

// Canonical form: every field explicit, ranges expanded.
inline nlohmann::json to_json(const GridSpec& g) {
  using nlohmann::json;
  json j;
  j["schema_version"] = config_schema_version;
  j["setting"] = g.setting;
  j["design"] = {{"arms", g.base.num_arms},           {"entry_spacing", g.spacings},
                 {"arm_size", g.base.arm_size},       {"control_mean", g.base.control_mean},
                 {"sigma", g.base.sigma},             {"evaluated_arm", g.base.evaluated_arm}};
  json patterns = json::array();
  for (auto p : g.patterns) patterns.push_back(std::string(to_string(p)));
  j["trend"] = {{"patterns", patterns}, {"lambda", g.lambdas}, {"cycles", g.cycles}};
  if (!g.lambda_profile.empty()) j["trend"]["lambda_profile"] = g.lambda_profile;
  if (g.turning_point) j["trend"]["turning_point"] = *g.turning_point;
  json estimators = json::array();
  for (auto e : g.estimators) estimators.push_back(std::string(to_string(e)));
  j["analysis"] = {{"estimators", estimators},
                   {"c_length", g.c_lengths},
                   {"spline_degree", g.spline_degree},
                   {"alpha", g.alpha},
                   {"sided", std::string(to_string(g.sided))}};
  json hypotheses = json::array();
  for (auto h : g.hypotheses) hypotheses.push_back(std::string(to_string(h)));
  j["simulation"] = {{"hypotheses", hypotheses},
                     {"effect", g.effect},
                     {"replicates", g.replicates},
                     {"seed", g.seed}};
  return j;
}

}  // namespace ncc
