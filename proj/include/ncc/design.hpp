#pragma once

// Platform-trial layout: arm entry schedule and the two time partitions
// (periods and calendar units) used by every time-adjusted estimator.
//
// Time is measured in recruitment units. Simulated trials enrol exactly one
// patient per unit, so t_j = j; imported datasets may carry arbitrary
// nondecreasing times. Intervals are half-open: [start_s, start_{s+1}).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ncc/error.hpp"

namespace ncc {

using Time = double;

struct TrialConfig {
  int num_arms = 4;             // K, experimental arms
  int entry_spacing = 250;      // d, patients recruited between arm entries
  int arm_size = 250;           // n, target per experimental arm
  double control_mean = 0.0;    // eta_0
  std::vector<double> effects;  // theta_1..theta_K; empty means all zero
  double sigma = 1.0;
  int evaluated_arm = 3;  // M

  double effect(int arm) const {
    if (arm < 1 || effects.empty()) return 0.0;
    return effects.at(static_cast<std::size_t>(arm - 1));
  }

  void validate() const {
    if (num_arms < 2) throw ConfigError("num_arms must be >= 2");
    if (entry_spacing < 0) throw ConfigError("entry_spacing must be >= 0");
    if (arm_size < 2) throw ConfigError("arm_size must be >= 2");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be > 0");
    if (evaluated_arm < 1 || evaluated_arm > num_arms)
      throw ConfigError("evaluated_arm must lie in 1..num_arms");
    if (!effects.empty() && effects.size() != static_cast<std::size_t>(num_arms))
      throw ConfigError("effects must have one entry per experimental arm");
  }
};

// Arm k's first eligible recruitment time, d*(k-1) + 1, for k = 1..K.
inline std::vector<Time> entry_times(const TrialConfig& config) {
  std::vector<Time> entries;
  entries.reserve(static_cast<std::size_t>(config.num_arms));
  for (int k = 1; k <= config.num_arms; ++k)
    entries.push_back(static_cast<Time>(config.entry_spacing) * (k - 1) + 1.0);
  return entries;
}

// Ordered interval starts covering [origin, horizon].
class Partition {
 public:
  Partition() = default;
  Partition(std::vector<Time> starts, Time horizon) : starts_(std::move(starts)), horizon_(horizon) {
    if (starts_.empty()) throw ConfigError("partition needs at least one interval");
    if (!std::is_sorted(starts_.begin(), starts_.end()) ||
        std::adjacent_find(starts_.begin(), starts_.end()) != starts_.end())
      throw ConfigError("partition starts must be strictly increasing");
    if (starts_.back() > horizon_) throw ConfigError("partition start beyond horizon");
  }

  std::size_t size() const noexcept { return starts_.size(); }
  const std::vector<Time>& starts() const noexcept { return starts_; }
  Time origin() const { return starts_.front(); }
  Time horizon() const noexcept { return horizon_; }

  // Width in recruitment units; the last interval is closed at the horizon.
  Time width(std::size_t i) const {
    const Time end = i + 1 < starts_.size() ? starts_[i + 1] : horizon_ + 1.0;
    return end - starts_.at(i);
  }

  // 1-based interval number containing t.
  std::size_t index(Time t) const {
    if (!(t >= origin()) || t > horizon_)
      throw DataError("time " + std::to_string(t) + " outside partition range [" +
                      std::to_string(origin()) + ", " + std::to_string(horizon_) + "]");
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    return static_cast<std::size_t>(it - starts_.begin());
  }

 private:
  std::vector<Time> starts_;
  Time horizon_ = 0.0;
};

inline std::size_t interval_index(Time t, const Partition& partition) { return partition.index(t); }

// Realized arm schedule. `closes[k]` is the first recruitment time at which arm
// k+1 is no longer active (the time after its last patient), or +inf.
struct TrialTimeline {
  std::vector<Time> entry;
  std::vector<Time> exit;
  std::vector<Time> closes;
  Time origin = 1.0;
  std::size_t total = 0;

  int num_arms() const noexcept { return static_cast<int>(entry.size()); }
  Time entry_of(int arm) const { return entry.at(static_cast<std::size_t>(arm - 1)); }
  Time exit_of(int arm) const { return exit.at(static_cast<std::size_t>(arm - 1)); }
};

// Period starts: every distinct change in the active-arm set up to the horizon.
inline Partition derive_periods(const std::vector<Time>& entries, const std::vector<Time>& closes,
                                Time horizon, Time origin = 1.0) {
  if (entries.empty()) throw DataError("no arms active");
  std::vector<Time> starts{origin};
  for (Time e : entries)
    if (e > origin && e <= horizon) starts.push_back(e);
  for (Time c : closes)
    if (c > origin && c <= horizon) starts.push_back(c);
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  return Partition(std::move(starts), horizon);
}

inline Partition derive_periods(const TrialTimeline& timeline, Time horizon) {
  return derive_periods(timeline.entry, timeline.closes, horizon, timeline.origin);
}

// Fixed-length calendar units origin, origin + c, origin + 2c, ... cut at the horizon.
inline Partition derive_calendar(Time horizon, double c_length, Time origin = 1.0) {
  if (!(c_length >= 1.0) || !std::isfinite(c_length))
    throw ConfigError("c_length must be >= 1");
  if (horizon < origin) throw ConfigError("horizon precedes origin");
  std::vector<Time> starts;
  for (std::size_t i = 0;; ++i) {
    const Time s = origin + static_cast<Time>(i) * c_length;
    if (s > horizon) break;
    starts.push_back(s);
  }
  return Partition(std::move(starts), horizon);
}

}  // namespace ncc
