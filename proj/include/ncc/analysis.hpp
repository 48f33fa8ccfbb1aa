#pragma once

// One entry point per estimator: (dataset, evaluated arm, model) -> FitResult.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ncc/datagen.hpp"
#include "ncc/design.hpp"
#include "ncc/error.hpp"
#include "ncc/io.hpp"
#include "ncc/mixed.hpp"
#include "ncc/ols.hpp"
#include "ncc/spline.hpp"

namespace ncc {

enum class Estimator {
  fixed_period,
  fixed_calendar,
  spline_period,
  spline_calendar,
  mixed_period,
  mixed_calendar,
  mixed_period_ar1,
  mixed_calendar_ar1,
  mixedint_period,
  mixedint_calendar,
  pooled,
  separate,
};

inline constexpr std::array all_estimators{
    Estimator::fixed_period,     Estimator::fixed_calendar,     Estimator::spline_period,
    Estimator::spline_calendar,  Estimator::mixed_period,       Estimator::mixed_calendar,
    Estimator::mixed_period_ar1, Estimator::mixed_calendar_ar1, Estimator::mixedint_period,
    Estimator::mixedint_calendar, Estimator::pooled,            Estimator::separate,
};

inline std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::fixed_period: return "fixed_period";
    case Estimator::fixed_calendar: return "fixed_calendar";
    case Estimator::spline_period: return "spline_period";
    case Estimator::spline_calendar: return "spline_calendar";
    case Estimator::mixed_period: return "mixed_period";
    case Estimator::mixed_calendar: return "mixed_calendar";
    case Estimator::mixed_period_ar1: return "mixed_period_ar1";
    case Estimator::mixed_calendar_ar1: return "mixed_calendar_ar1";
    case Estimator::mixedint_period: return "mixedint_period";
    case Estimator::mixedint_calendar: return "mixedint_calendar";
    case Estimator::pooled: return "pooled";
    case Estimator::separate: return "separate";
  }
  return "unknown";
}

inline Estimator parse_estimator(std::string_view s) {
  for (Estimator e : all_estimators)
    if (to_string(e) == s) return e;
  throw ConfigError("unknown estimator '" + std::string(s) + "'");
}

inline bool uses_calendar(Estimator e) {
  switch (e) {
    case Estimator::fixed_calendar:
    case Estimator::spline_calendar:
    case Estimator::mixed_calendar:
    case Estimator::mixed_calendar_ar1:
    case Estimator::mixedint_calendar:
      return true;
    default:
      return false;
  }
}

inline bool uses_spline(Estimator e) {
  return e == Estimator::spline_period || e == Estimator::spline_calendar;
}

struct ModelSpec {
  Estimator estimator = Estimator::fixed_period;
  std::optional<double> c_length;
  int spline_degree = 3;
  double alpha = 0.025;
  Sided sided = Sided::one_greater;

  void validate() const {
    if (uses_calendar(estimator) && !c_length)
      throw ConfigError(std::string(to_string(estimator)) + " requires c_length");
    if (c_length && !(*c_length >= 1.0)) throw ConfigError("c_length must be >= 1");
    if (uses_spline(estimator) && (spline_degree < 1 || spline_degree > 3))
      throw ConfigError("spline degree must be 1, 2 or 3");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  }

  // Label including the analysis options that distinguish otherwise equal estimators.
  std::string label() const {
    std::string s(to_string(estimator));
    if (uses_spline(estimator)) s += "_q" + std::to_string(spline_degree);
    return s;
  }
};

struct FitDiagnostics {
  double df = 0.0;
  int columns = 0;  // fixed-effect design columns
  int random_columns = 0;
  bool converged = true;
  bool fallback = false;  // mixed model reduced to OLS (no random columns)
  double sigma2 = 0.0;
  std::optional<double> sigma2_random;
  std::optional<double> rho;
  int observations = 0;
  int controls = 0;
  int concurrent_controls = 0;
  int intervals = 0;
  std::vector<int> arms;  // K_M
};

struct FitResult {
  std::string estimator;
  int arm = 0;
  double theta_hat = 0.0;
  double se = 0.0;
  double p_one = 0.0;
  double p_two = 0.0;
  bool reject = false;
  FitDiagnostics diagnostics;
};

namespace detail {

inline FitResult finish(const ModelSpec& spec, int arm, const WaldResult& w, FitDiagnostics diag) {
  FitResult r;
  r.estimator = spec.label();
  r.arm = arm;
  r.theta_hat = w.estimate;
  r.se = w.se;
  r.p_one = w.p_one;
  r.p_two = w.p_two;
  r.reject = w.p(spec.sided) < spec.alpha;
  diag.df = w.df;
  r.diagnostics = std::move(diag);
  return r;
}

inline void count_controls(std::span<const PatientRecord> data, Time entry, Time horizon, FitDiagnostics& d) {
  d.observations = static_cast<int>(data.size());
  for (const auto& r : data)
    if (r.arm == 0) {
      ++d.controls;
      if (r.time >= entry && r.time <= horizon) ++d.concurrent_controls;
    }
}

// Pooled-variance two-sample t-test of `arm` against the given controls.
inline WaldResult two_sample(std::span<const PatientRecord> data, int arm, Time control_from) {
  double sum_t = 0, sum_c = 0;
  std::size_t n_t = 0, n_c = 0;
  for (const auto& r : data) {
    if (r.arm == arm) {
      sum_t += r.response;
      ++n_t;
    } else if (r.arm == 0 && r.time >= control_from) {
      sum_c += r.response;
      ++n_c;
    }
  }
  if (n_c == 0) throw DataError("no control records available for the comparison");
  if (n_t == 0) throw DataError("no records for arm " + std::to_string(arm));
  if (n_t + n_c < 3) throw DataError("two-sample t-test needs at least 3 observations");
  const double mean_t = sum_t / static_cast<double>(n_t);
  const double mean_c = sum_c / static_cast<double>(n_c);
  double ss = 0;
  for (const auto& r : data) {
    if (r.arm == arm) ss += (r.response - mean_t) * (r.response - mean_t);
    else if (r.arm == 0 && r.time >= control_from) ss += (r.response - mean_c) * (r.response - mean_c);
  }
  const double df = static_cast<double>(n_t + n_c - 2);
  const double s2 = ss / df;
  const double var = s2 * (1.0 / static_cast<double>(n_t) + 1.0 / static_cast<double>(n_c));
  return wald_from(mean_t - mean_c, var, df);
}

}  // namespace detail

// Analysis context for arm M: D_M, its horizon, K_M and both time partitions.
struct ArmAnalysis {
  int arm = 0;
  std::vector<PatientRecord> data;
  Time horizon = 0.0;
  Time entry = 0.0;
  Time origin = 1.0;
  std::vector<int> arms;  // K_M
  Partition periods;

  ArmAnalysis(const TrialDataset& dataset, int evaluated_arm) : arm(evaluated_arm) {
    data = slice_for_arm(dataset, evaluated_arm);
    horizon = dataset.timeline.exit_of(evaluated_arm);
    entry = dataset.timeline.entry_of(evaluated_arm);
    origin = data.front().time;
    arms = arms_present(data);
    periods = derive_periods(dataset.timeline.entry, dataset.timeline.closes, horizon, origin);
  }

  Partition calendar(double c_length) const { return derive_calendar(horizon, c_length, origin); }

  std::vector<double> times() const {
    std::vector<double> t;
    t.reserve(data.size());
    for (const auto& r : data) t.push_back(r.time);
    return t;
  }
};

inline FitResult pooled_ttest(const ArmAnalysis& a, const ModelSpec& spec = {Estimator::pooled}) {
  FitDiagnostics d;
  detail::count_controls(a.data, a.entry, a.horizon, d);
  d.arms = a.arms;
  d.columns = 2;
  return detail::finish(spec, a.arm, detail::two_sample(a.data, a.arm, -std::numeric_limits<double>::infinity()), d);
}

// Concurrent controls only: controls recruited from arm M's entry onwards.
inline FitResult separate_ttest(const ArmAnalysis& a, const ModelSpec& spec = {Estimator::separate}) {
  FitDiagnostics d;
  detail::count_controls(a.data, a.entry, a.horizon, d);
  d.arms = a.arms;
  d.columns = 2;
  return detail::finish(spec, a.arm, detail::two_sample(a.data, a.arm, a.entry), d);
}

inline FitResult fit(const ArmAnalysis& a, const ModelSpec& spec) {
  spec.validate();
  if (spec.estimator == Estimator::pooled) return pooled_ttest(a, spec);
  if (spec.estimator == Estimator::separate) return separate_ttest(a, spec);

  FitDiagnostics d;
  detail::count_controls(a.data, a.entry, a.horizon, d);
  d.arms = a.arms;
  const std::string target = treatment_label(a.arm);
  const bool calendar = uses_calendar(spec.estimator);
  const Partition partition = calendar ? a.calendar(*spec.c_length) : a.periods;
  const std::string prefix = calendar ? "cal" : "per";
  d.intervals = static_cast<int>(partition.size());

  auto ols_result = [&](const DesignMatrix& dm) {
    const auto f = ols_fit(dm);
    d.columns = static_cast<int>(dm.columns.size());
    d.sigma2 = f.sigma2_hat;
    return detail::finish(spec, a.arm, wald_test(f, target), d);
  };

  switch (spec.estimator) {
    case Estimator::fixed_period:
    case Estimator::fixed_calendar:
      return ols_result(build_design(a.data, a.arms, IntervalAdjustment{partition, prefix}));

    case Estimator::spline_period:
    case Estimator::spline_calendar: {
      const auto knots = calendar ? knots_from_calendar(partition) : knots_from_periods(partition);
      const SplineBasis basis(spec.spline_degree, knots, a.origin, a.horizon);
      const auto times = a.times();
      BasisAdjustment adj{basis_matrix(times, basis, true), basis_labels(basis, true)};
      return ols_result(build_design(a.data, a.arms, adj));
    }

    case Estimator::mixed_period:
    case Estimator::mixed_calendar:
    case Estimator::mixed_period_ar1:
    case Estimator::mixed_calendar_ar1:
    case Estimator::mixedint_period:
    case Estimator::mixedint_calendar: {
      const bool interaction =
          spec.estimator == Estimator::mixedint_period || spec.estimator == Estimator::mixedint_calendar;
      const bool ar1 =
          spec.estimator == Estimator::mixed_period_ar1 || spec.estimator == Estimator::mixed_calendar_ar1;
      const MixedSpec mspec{interaction ? RandomGrouping::arm_by_interval : RandomGrouping::interval,
                            ar1 ? CovStructure::ar1 : CovStructure::independent};
      mspec.validate();
      const DesignMatrix fixed =
          interaction ? build_design(a.data, a.arms, IntervalAdjustment{partition, prefix})
                      : build_design(a.data, a.arms, std::monostate{});
      std::vector<int> others;
      for (int k : a.arms)
        if (k != a.arm) others.push_back(k);
      RandomDesign random;
      try {
        random = interaction ? build_random_interaction(a.data, partition, others, prefix)
                             : build_random_intercepts(a.data, partition, prefix);
      } catch (const DegenerateFitError&) {
        d.fallback = true;
        return ols_result(fixed);
      }
      const auto mf = reml_fit(fixed, random, mspec.structure);
      d.columns = static_cast<int>(fixed.columns.size());
      d.random_columns = static_cast<int>(random.Z.cols());
      d.converged = mf.converged;
      d.sigma2 = mf.sigma2;
      d.sigma2_random = mf.sigma2_random;
      d.rho = mf.rho;
      return detail::finish(spec, a.arm, mixed_wald_test(mf, target), d);
    }
    default:
      break;
  }
  throw ConfigError("unsupported estimator");
}

inline FitResult fit(const TrialDataset& dataset, int arm, const ModelSpec& spec) {
  return fit(ArmAnalysis(dataset, arm), spec);
}

inline FitResult pooled_ttest(const TrialDataset& dataset, int arm) {
  return pooled_ttest(ArmAnalysis(dataset, arm));
}

inline FitResult separate_ttest(const TrialDataset& dataset, int arm) {
  return separate_ttest(ArmAnalysis(dataset, arm));
}

// ---------------------------------------------------------------------------
// Result serialization: estimator,arm,theta_hat,se,p_one,p_two,reject,diag_*

inline constexpr std::string_view fit_csv_header =
    "estimator,arm,theta_hat,se,p_one,p_two,reject,diag_df,diag_columns,diag_random_columns,"
    "diag_converged,diag_fallback,diag_sigma2,diag_sigma2_random,diag_rho,diag_n,diag_controls,"
    "diag_concurrent_controls,diag_intervals";

inline void write_fit_csv_row(std::ostream& out, const FitResult& r) {
  const auto& d = r.diagnostics;
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  out << r.estimator << ',' << r.arm << ',' << format_double(r.theta_hat) << ',' << format_double(r.se) << ','
      << format_double(r.p_one) << ',' << format_double(r.p_two) << ',' << (r.reject ? 1 : 0) << ','
      << format_double(d.df) << ',' << d.columns << ',' << d.random_columns << ',' << (d.converged ? 1 : 0) << ','
      << (d.fallback ? 1 : 0) << ',' << format_double(d.sigma2) << ',' << opt(d.sigma2_random) << ','
      << opt(d.rho) << ',' << d.observations << ',' << d.controls << ',' << d.concurrent_controls << ','
      << d.intervals << '\n';
}

inline nlohmann::json to_json(const FitResult& r) {
  const auto& d = r.diagnostics;
  nlohmann::json j{{"estimator", r.estimator}, {"arm", r.arm},     {"theta_hat", r.theta_hat},
                   {"se", r.se},               {"p_one", r.p_one}, {"p_two", r.p_two},
                   {"reject", r.reject}};
  j["diag_df"] = d.df;
  j["diag_columns"] = d.columns;
  j["diag_random_columns"] = d.random_columns;
  j["diag_converged"] = d.converged;
  j["diag_fallback"] = d.fallback;
  j["diag_sigma2"] = d.sigma2;
  j["diag_sigma2_random"] = d.sigma2_random ? nlohmann::json(*d.sigma2_random) : nlohmann::json(nullptr);
  j["diag_rho"] = d.rho ? nlohmann::json(*d.rho) : nlohmann::json(nullptr);
  j["diag_n"] = d.observations;
  j["diag_controls"] = d.controls;
  j["diag_concurrent_controls"] = d.concurrent_controls;
  j["diag_intervals"] = d.intervals;
  j["diag_arms"] = d.arms;
  return j;
}

}  // namespace ncc
