#pragma once

// Monte-Carlo operating characteristics: type I error rate and power of each
// estimator over replicated trials, and cartesian scenario grids.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ncc/analysis.hpp"
#include "ncc/datagen.hpp"
#include "ncc/design.hpp"
#include "ncc/error.hpp"
#include "ncc/io.hpp"
#include "ncc/rng.hpp"

namespace ncc {

enum class Hypothesis { null, alternative };

inline std::string_view to_string(Hypothesis h) { return h == Hypothesis::null ? "null" : "alternative"; }

inline Hypothesis parse_hypothesis(std::string_view s) {
  if (s == "null") return Hypothesis::null;
  if (s == "alternative") return Hypothesis::alternative;
  throw ConfigError("unknown hypothesis '" + std::string(s) + "' (use null or alternative)");
}

struct Scenario {
  std::string setting;
  TrialConfig config;  // effects are derived from the hypothesis
  TrendSpec trend;
  std::vector<ModelSpec> estimators;
  Hypothesis hypothesis = Hypothesis::null;
  double effect = 0.25;  // theta of every experimental arm under the alternative
  int replicates = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    config.validate();
    trend.validate(config.num_arms);
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    if (estimators.empty()) throw ConfigError("scenario has no estimators");
    for (const auto& e : estimators) e.validate();
  }

  double true_effect() const { return hypothesis == Hypothesis::null ? 0.0 : effect; }

  TrialConfig trial_config() const {
    TrialConfig c = config;
    c.effects.assign(static_cast<std::size_t>(c.num_arms), true_effect());
    return c;
  }

  // Fingerprint of everything that shapes the generated data. Analysis options
  // are excluded so all estimators and calendar lengths see the same replicates.
  std::uint64_t data_hash() const {
    Hasher h;
    h.add(config.num_arms).add(config.entry_spacing).add(config.arm_size).add(config.control_mean);
    h.add(config.sigma).add(config.evaluated_arm);
    h.add(to_string(trend.pattern));
    for (double l : trend.lambda) h.add(l);
    h.add(trend.turning_point ? *trend.turning_point : -1.0).add(trend.cycles);
    h.add(to_string(hypothesis)).add(true_effect());
    return h.value();
  }
};

struct EstimatorSummary {
  std::string estimator;
  std::optional<double> c_length;
  int replicates = 0;
  int failures = 0;
  double reject_rate = 0.0;
  double mc_se = 0.0;
  double mean_estimate = 0.0;
  double empirical_se = 0.0;
  double bias = 0.0;
};

struct OperatingCharacteristics {
  std::vector<EstimatorSummary> estimators;
};

inline double rejection_mc_se(double rate, int replicates) {
  if (replicates <= 0) return 0.0;
  return std::sqrt(rate * (1.0 - rate) / replicates);
}

struct RunOptions {
  unsigned threads = 1;
};

namespace detail {

struct ReplicateOutcome {
  double estimate = 0.0;
  bool reject = false;
  bool failed = false;
};

// Runs body(i) for i in [0, count) on up to `threads` workers.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::jthread> workers;
  for (unsigned t = 0; t < threads; ++t)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  workers.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

inline OperatingCharacteristics run_scenario(const Scenario& s, const RunOptions& opt = {}) {
  s.validate();
  const TrialConfig config = s.trial_config();
  const std::uint64_t hash = s.data_hash();
  const std::size_t reps = static_cast<std::size_t>(s.replicates);
  const std::size_t E = s.estimators.size();
  std::vector<detail::ReplicateOutcome> outcomes(reps * E);

  detail::parallel_for(reps, opt.threads, [&](std::size_t i) {
    const auto data = generate_trial(config, s.trend, replicate_seed(s.seed, hash, i));
    const ArmAnalysis analysis(data, config.evaluated_arm);
    for (std::size_t e = 0; e < E; ++e) {
      auto& out = outcomes[i * E + e];
      try {
        const auto r = fit(analysis, s.estimators[e]);
        out.estimate = r.theta_hat;
        out.reject = r.reject;
        out.failed = !r.diagnostics.converged || !std::isfinite(r.theta_hat);
      } catch (const std::exception&) {
        out.failed = true;
      }
    }
  });

  OperatingCharacteristics oc;
  const double truth = s.true_effect();
  for (std::size_t e = 0; e < E; ++e) {
    EstimatorSummary sum;
    sum.estimator = s.estimators[e].label();
    if (uses_calendar(s.estimators[e].estimator)) sum.c_length = s.estimators[e].c_length;
    sum.replicates = s.replicates;
    int valid = 0, rejections = 0;
    double total = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
      const auto& o = outcomes[i * E + e];
      if (o.failed) {
        ++sum.failures;
        continue;
      }
      ++valid;
      rejections += o.reject ? 1 : 0;
      total += o.estimate;
    }
    if (valid > 0) {
      sum.reject_rate = static_cast<double>(rejections) / valid;
      sum.mc_se = rejection_mc_se(sum.reject_rate, valid);
      sum.mean_estimate = total / valid;
      double ss = 0.0;
      for (std::size_t i = 0; i < reps; ++i) {
        const auto& o = outcomes[i * E + e];
        if (!o.failed) ss += (o.estimate - sum.mean_estimate) * (o.estimate - sum.mean_estimate);
      }
      sum.empirical_se = valid > 1 ? std::sqrt(ss / (valid - 1)) : 0.0;
      sum.bias = sum.mean_estimate - truth;
    } else {
      sum.reject_rate = sum.mc_se = sum.mean_estimate = sum.empirical_se = sum.bias =
          std::numeric_limits<double>::quiet_NaN();
    }
    oc.estimators.push_back(std::move(sum));
  }
  return oc;
}

// ---------------------------------------------------------------------------
// Scenario grids

struct GridSpec {
  std::string setting = "custom";
  TrialConfig base;
  std::vector<TrendPattern> patterns{TrendPattern::linear};
  std::vector<double> lambdas{0.0};
  // Per-arm multipliers (control first): lambda_k = lambda * profile_k.
  std::vector<double> lambda_profile;
  std::optional<double> turning_point;
  double cycles = 1.0;
  std::vector<int> spacings{250};
  std::vector<double> c_lengths;
  std::vector<Estimator> estimators{Estimator::fixed_period};
  int spline_degree = 3;
  double alpha = 0.025;
  Sided sided = Sided::one_greater;
  std::vector<Hypothesis> hypotheses{Hypothesis::null};
  double effect = 0.25;
  int replicates = 1000;
  std::uint64_t seed = 1;

  bool needs_calendar() const {
    return std::any_of(estimators.begin(), estimators.end(), [](Estimator e) { return uses_calendar(e); });
  }

  void validate() const {
    if (patterns.empty() || lambdas.empty() || spacings.empty() || estimators.empty() || hypotheses.empty() ||
        (needs_calendar() && c_lengths.empty()))
      throw ConfigError("empty grid");
    if (!lambda_profile.empty() && lambda_profile.size() != static_cast<std::size_t>(base.num_arms) + 1)
      throw ConfigError("lambda_profile needs K+1 entries (control first)");
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    for (int d : spacings)
      if (d < 0) throw ConfigError("entry spacing must be >= 0");
    for (double c : c_lengths)
      if (!(c >= 1.0)) throw ConfigError("c_length must be >= 1");
  }

  std::vector<double> lambda_vector(double lambda) const {
    std::vector<double> v(static_cast<std::size_t>(base.num_arms) + 1, lambda);
    if (!lambda_profile.empty())
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = lambda * lambda_profile[k];
    return v;
  }

  std::size_t cell_count() const {
    return patterns.size() * lambdas.size() * spacings.size() * hypotheses.size();
  }
};

struct GridRow {
  std::string setting;
  TrendPattern pattern = TrendPattern::none;
  double lambda = 0.0;
  int d = 0;
  std::optional<double> c_length;
  std::string estimator;
  Hypothesis hypothesis = Hypothesis::null;
  EstimatorSummary summary;
};

struct GridCell {
  Scenario scenario;
  double lambda = 0.0;  // grid-axis value before the per-arm profile
};

// Data cells in deterministic order; each cell's replicates are shared by all
// estimators and calendar lengths.
inline std::vector<GridCell> grid_scenarios(const GridSpec& g) {
  g.validate();
  std::vector<GridCell> cells;
  for (Hypothesis h : g.hypotheses)
    for (TrendPattern p : g.patterns)
      for (int d : g.spacings)
        for (double lambda : g.lambdas) {
          Scenario s;
          s.setting = g.setting;
          s.config = g.base;
          s.config.entry_spacing = d;
          s.trend.pattern = p;
          s.trend.lambda = g.lambda_vector(lambda);
          s.trend.turning_point = g.turning_point;
          s.trend.cycles = g.cycles;
          s.hypothesis = h;
          s.effect = g.effect;
          s.replicates = g.replicates;
          s.seed = g.seed;
          for (Estimator e : g.estimators) {
            ModelSpec m{e, std::nullopt, g.spline_degree, g.alpha, g.sided};
            if (!uses_calendar(e)) {
              s.estimators.push_back(m);
              continue;
            }
            for (double c : g.c_lengths) {
              m.c_length = c;
              s.estimators.push_back(m);
            }
          }
          cells.push_back({std::move(s), lambda});
        }
  return cells;
}

template <typename Progress>
std::vector<GridRow> run_grid(const GridSpec& g, const RunOptions& opt, Progress&& progress) {
  const auto cells = grid_scenarios(g);
  std::vector<GridRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& s = cells[c].scenario;
    const auto oc = run_scenario(s, opt);
    for (const auto& e : oc.estimators) {
      GridRow row;
      row.setting = s.setting;
      row.pattern = s.trend.pattern;
      row.lambda = cells[c].lambda;
      row.d = s.config.entry_spacing;
      row.c_length = e.c_length;
      row.estimator = e.estimator;
      row.hypothesis = s.hypothesis;
      row.summary = e;
      rows.push_back(std::move(row));
    }
    progress(c, cells.size(), s, oc);
  }
  return rows;
}

inline std::vector<GridRow> run_grid(const GridSpec& g, const RunOptions& opt = {}) {
  return run_grid(g, opt, [](std::size_t, std::size_t, const Scenario&, const OperatingCharacteristics&) {});
}

inline constexpr std::string_view grid_csv_header =
    "setting,pattern,lambda,d,c_length,estimator,hypothesis,reps,reject_rate,mc_se,mean_est,emp_se,bias,failures";

inline void write_grid_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  out << grid_csv_header << '\n';
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << r.setting << ',' << to_string(r.pattern) << ',' << format_double(r.lambda) << ',' << r.d << ','
        << (r.c_length ? format_double(*r.c_length) : std::string("NA")) << ',' << r.estimator << ','
        << to_string(r.hypothesis) << ',' << s.replicates << ',' << format_double(s.reject_rate) << ','
        << format_double(s.mc_se) << ',' << format_double(s.mean_estimate) << ','
        << format_double(s.empirical_se) << ',' << format_double(s.bias) << ',' << s.failures << '\n';
  }
}

inline nlohmann::json grid_to_json(const std::vector<GridRow>& rows) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out.push_back({{"setting", r.setting},
                   {"pattern", std::string(to_string(r.pattern))},
                   {"lambda", r.lambda},
                   {"d", r.d},
                   {"c_length", r.c_length ? nlohmann::json(*r.c_length) : nlohmann::json(nullptr)},
                   {"estimator", r.estimator},
                   {"hypothesis", std::string(to_string(r.hypothesis))},
                   {"reps", s.replicates},
                   {"reject_rate", num(s.reject_rate)},
                   {"mc_se", num(s.mc_se)},
                   {"mean_est", num(s.mean_estimate)},
                   {"emp_se", num(s.empirical_se)},
                   {"bias", num(s.bias)},
                   {"failures", s.failures}});
  }
  return out;
}

}  // namespace ncc
