#pragma once

// Simulation of one platform-trial replicate: block randomization over the
// currently active arms, additive time trend and normal responses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncc/design.hpp"
#include "ncc/error.hpp"
#include "ncc/rng.hpp"

namespace ncc {

enum class TrendPattern { none, linear, stepwise, inverted_u, seasonal };

inline std::string_view to_string(TrendPattern p) {
  switch (p) {
    case TrendPattern::none: return "none";
    case TrendPattern::linear: return "linear";
    case TrendPattern::stepwise: return "stepwise";
    case TrendPattern::inverted_u: return "inverted_u";
    case TrendPattern::seasonal: return "seasonal";
  }
  return "unknown";
}

inline TrendPattern parse_trend_pattern(std::string_view s) {
  if (s == "none") return TrendPattern::none;
  if (s == "linear") return TrendPattern::linear;
  if (s == "stepwise") return TrendPattern::stepwise;
  if (s == "inverted_u" || s == "inverted-u") return TrendPattern::inverted_u;
  if (s == "seasonal") return TrendPattern::seasonal;
  throw ConfigError("unknown trend pattern '" + std::string(s) + "'");
}

struct TrendSpec {
  TrendPattern pattern = TrendPattern::none;
  // lambda_0..lambda_K; index 0 is the control arm. Empty means no trend.
  std::vector<double> lambda;
  // N_p for the inverted-U pattern; unset places it at the middle of the trial.
  std::optional<double> turning_point;
  double cycles = 1.0;  // psi, seasonal only

  double strength(int arm) const {
    if (lambda.empty()) return 0.0;
    return lambda.at(static_cast<std::size_t>(arm));
  }

  void validate(int num_arms) const {
    if (!lambda.empty() && lambda.size() != static_cast<std::size_t>(num_arms) + 1)
      throw ConfigError("trend lambda needs K+1 entries (control first)");
    for (double l : lambda)
      if (!std::isfinite(l)) throw ConfigError("trend lambda must be finite");
    if (pattern == TrendPattern::seasonal && !(cycles > 0.0))
      throw ConfigError("seasonal trend requires cycles > 0");
    if (pattern == TrendPattern::inverted_u && turning_point && !(*turning_point > 1.0))
      throw ConfigError("inverted_u turning point must exceed 1");
  }

  // N_p resolved against a realized trial size.
  double turning_point_for(std::size_t total) const {
    const double np = turning_point ? *turning_point : std::round(static_cast<double>(total) / 2.0);
    if (!(np > 1.0 && np < static_cast<double>(total)))
      throw ConfigError("inverted_u turning point must satisfy 1 < N_p < N");
    return np;
  }
};

// Trend contribution f(j) for an arm with strength lambda_k. `entered` is the
// number of experimental arms that have entered by time j (stepwise only).
inline double trend_value(TrendPattern pattern, double j, double lambda_k, double total,
                          double turning_point, double cycles, int entered) {
  const double span = total - 1.0;
  switch (pattern) {
    case TrendPattern::none:
      return 0.0;
    case TrendPattern::linear:
      return lambda_k * (j - 1.0) / span;
    case TrendPattern::stepwise:
      return lambda_k * (entered - 1);
    case TrendPattern::inverted_u:
      if (j <= turning_point) return lambda_k * (j - 1.0) / span;
      return -lambda_k * (j - turning_point) / span + lambda_k * (turning_point - 1.0) / span;
    case TrendPattern::seasonal:
      return lambda_k * std::sin(cycles * 2.0 * std::numbers::pi * (j - 1.0) / span);
  }
  throw ConfigError("unknown trend pattern");
}

// Blocked allocation: each block is a shuffled sequence holding the control and
// every active arm twice. A change of the active set discards the rest of the
// current block.
class BlockRandomizer {
 public:
  explicit BlockRandomizer(Engine& engine) : engine_(&engine) {}

  int next(const std::vector<int>& active_arms) {
    if (active_arms != arms_ || position_ == block_.size()) refill(active_arms);
    return block_[position_++];
  }

  std::size_t block_size() const noexcept { return block_.size(); }

 private:
  void refill(const std::vector<int>& active_arms) {
    arms_ = active_arms;
    block_.clear();
    for (int rep = 0; rep < 2; ++rep) {
      block_.push_back(0);
      block_.insert(block_.end(), arms_.begin(), arms_.end());
    }
    std::shuffle(block_.begin(), block_.end(), *engine_);
    position_ = 0;
  }

  Engine* engine_;
  std::vector<int> arms_;
  std::vector<int> block_;
  std::size_t position_ = 0;
};

struct PatientRecord {
  std::int64_t j = 0;
  int arm = 0;
  Time time = 0.0;
  double response = 0.0;
};

struct TrialDataset {
  std::vector<PatientRecord> records;
  TrialTimeline timeline;
  std::uint64_t seed = 0;
  int arm_size = 0;  // n when known (simulated data), otherwise 0

  int num_arms() const noexcept { return timeline.num_arms(); }
};

// Arm assignments in recruitment order until all K arms hold n patients.
inline std::vector<int> randomize_trial(const TrialConfig& config, Engine& engine) {
  const auto entries = entry_times(config);
  const auto K = static_cast<std::size_t>(config.num_arms);
  std::vector<int> counts(K + 1, 0);
  std::vector<int> assignments;
  BlockRandomizer randomizer(engine);
  std::vector<int> active;
  std::size_t complete = 0;
  for (std::int64_t j = 1; complete < K; ++j) {
    active.clear();
    for (std::size_t k = 1; k <= K; ++k)
      if (entries[k - 1] <= static_cast<Time>(j) && counts[k] < config.arm_size)
        active.push_back(static_cast<int>(k));
    const int arm = randomizer.next(active);
    ++counts[static_cast<std::size_t>(arm)];
    if (arm > 0 && counts[static_cast<std::size_t>(arm)] == config.arm_size) ++complete;
    assignments.push_back(arm);
  }
  return assignments;
}

inline TrialTimeline timeline_from_assignments(const TrialConfig& config,
                                               std::span<const int> assignments) {
  TrialTimeline tl;
  tl.entry = entry_times(config);
  const auto K = static_cast<std::size_t>(config.num_arms);
  tl.exit.assign(K, 0.0);
  std::vector<int> counts(K + 1, 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto arm = static_cast<std::size_t>(assignments[i]);
    if (arm > 0 && ++counts[arm] == config.arm_size) tl.exit[arm - 1] = static_cast<Time>(i + 1);
  }
  tl.closes.resize(K);
  for (std::size_t k = 0; k < K; ++k) tl.closes[k] = tl.exit[k] + 1.0;
  tl.origin = 1.0;
  tl.total = assignments.size();
  return tl;
}

// One replicate. The allocation sequence (hence N and all exit times) is drawn
// from its own stream before any response, since the trend depends on N.
inline TrialDataset generate_trial(const TrialConfig& config, const TrendSpec& trend,
                                   std::uint64_t seed) {
  config.validate();
  trend.validate(config.num_arms);

  Engine allocation_engine = make_engine(seed, Stream::randomization);
  const auto assignments = randomize_trial(config, allocation_engine);

  TrialDataset data;
  data.seed = seed;
  data.arm_size = config.arm_size;
  data.timeline = timeline_from_assignments(config, assignments);

  const auto total = assignments.size();
  const double N = static_cast<double>(total);
  const double turning =
      trend.pattern == TrendPattern::inverted_u ? trend.turning_point_for(total) : 0.0;
  const auto& entries = data.timeline.entry;

  Engine noise_engine = make_engine(seed, Stream::noise);
  std::normal_distribution<double> noise(0.0, 1.0);
  data.records.reserve(total);
  int entered = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const double j = static_cast<double>(i + 1);
    while (entered < config.num_arms && entries[static_cast<std::size_t>(entered)] <= j) ++entered;
    const int arm = assignments[i];
    const double f =
        trend_value(trend.pattern, j, trend.strength(arm), N, turning, trend.cycles, entered);
    const double mean = config.control_mean + config.effect(arm) + f;
    data.records.push_back({static_cast<std::int64_t>(i + 1), arm, j,
                            mean + config.sigma * noise(noise_engine)});
  }
  return data;
}

// Builds a dataset from imported records (possibly non-uniform times). Arms must
// be labelled 0..K with every experimental arm present.
inline TrialDataset dataset_from_records(std::vector<PatientRecord> records) {
  if (records.empty()) throw DataError("dataset is empty");
  std::stable_sort(records.begin(), records.end(), [](const PatientRecord& a, const PatientRecord& b) {
    return a.time < b.time;
  });
  int K = 0;
  for (const auto& r : records) {
    if (r.arm < 0) throw DataError("negative arm label in dataset");
    K = std::max(K, r.arm);
  }
  if (K < 1) throw DataError("dataset has no experimental arm");
  const double inf = std::numeric_limits<double>::infinity();
  TrialTimeline tl;
  tl.entry.assign(static_cast<std::size_t>(K), inf);
  tl.exit.assign(static_cast<std::size_t>(K), -inf);
  tl.closes.assign(static_cast<std::size_t>(K), inf);
  for (const auto& r : records) {
    if (r.arm == 0) continue;
    auto k = static_cast<std::size_t>(r.arm - 1);
    tl.entry[k] = std::min(tl.entry[k], r.time);
    tl.exit[k] = std::max(tl.exit[k], r.time);
  }
  for (int k = 1; k <= K; ++k)
    if (!std::isfinite(tl.entry[static_cast<std::size_t>(k - 1)]))
      throw DataError("arm " + std::to_string(k) + " has no records (arms must be labelled 0..K)");
  // The trial opens with its first arm(s) present, even if a control came first.
  const Time first_entry = *std::min_element(tl.entry.begin(), tl.entry.end());
  for (auto& e : tl.entry)
    if (e == first_entry) e = records.front().time;
  // An arm stops being active at the first recruitment after its last patient.
  for (std::size_t k = 0; k < tl.exit.size(); ++k) {
    auto it = std::upper_bound(records.begin(), records.end(), tl.exit[k],
                               [](Time t, const PatientRecord& r) { return t < r.time; });
    if (it != records.end()) tl.closes[k] = it->time;
  }
  tl.origin = records.front().time;
  tl.total = records.size();
  TrialDataset data;
  data.records = std::move(records);
  data.timeline = std::move(tl);
  return data;
}

// D_M: every record up to and including arm M's exit time.
inline std::vector<PatientRecord> slice_for_arm(const TrialDataset& data, int arm) {
  if (arm < 1 || arm > data.num_arms())
    throw DataError("arm " + std::to_string(arm) + " is not present in the dataset");
  if (data.arm_size > 0) {
    const auto count = std::count_if(data.records.begin(), data.records.end(),
                                     [arm](const PatientRecord& r) { return r.arm == arm; });
    if (count < data.arm_size)
      throw DataError("arm " + std::to_string(arm) + " is incomplete (" + std::to_string(count) +
                      " of " + std::to_string(data.arm_size) + " patients)");
  }
  const Time horizon = data.timeline.exit_of(arm);
  std::vector<PatientRecord> slice;
  for (const auto& r : data.records)
    if (r.time <= horizon) slice.push_back(r);
  return slice;
}

}  // namespace ncc
