#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "ncc/datagen.hpp"

using namespace ncc;

namespace {

TrialConfig standard_config() {
  TrialConfig c;
  c.num_arms = 4;
  c.entry_spacing = 250;
  c.arm_size = 250;
  c.evaluated_arm = 3;
  return c;
}

TrendSpec equal_trend(TrendPattern p, double lambda, int arms = 4) {
  TrendSpec t;
  t.pattern = p;
  t.lambda.assign(static_cast<std::size_t>(arms) + 1, lambda);
  return t;
}

int count_arm(const std::vector<PatientRecord>& records, int arm) {
  return static_cast<int>(
      std::count_if(records.begin(), records.end(), [arm](const PatientRecord& r) { return r.arm == arm; }));
}

}  // namespace

TEST(TrendValue, LinearReachesLambdaAtEnd) {
  EXPECT_DOUBLE_EQ(trend_value(TrendPattern::linear, 1528, 0.5, 1528, 0, 1, 4), 0.5);
  EXPECT_EQ(trend_value(TrendPattern::linear, 1, 0.5, 1528, 0, 1, 1), 0.0);
}

TEST(TrendValue, StepwiseCountsEnteredArms) {
  EXPECT_NEAR(trend_value(TrendPattern::stepwise, 600, 0.15, 1528, 0, 1, 3), 0.30, 1e-15);
  EXPECT_EQ(trend_value(TrendPattern::stepwise, 1, 0.15, 1528, 0, 1, 1), 0.0);
}

TEST(TrendValue, SeasonalStartsAtZero) {
  for (double lambda : {-0.5, 0.1, 3.0}) EXPECT_EQ(trend_value(TrendPattern::seasonal, 1, lambda, 100, 0, 1, 1), 0.0);
}

TEST(TrendValue, InvertedUAtTurningPoint) {
  const double f = trend_value(TrendPattern::inverted_u, 2500, 0.5, 5000, 2500, 1, 1);
  EXPECT_NEAR(f, 0.5 * 2499.0 / 4999.0, 1e-15);
  EXPECT_NEAR(f, 0.24995, 1e-5);
  // Symmetric descent after the turning point.
  const double up = trend_value(TrendPattern::inverted_u, 2000, 0.5, 5000, 2500, 1, 1);
  const double down = trend_value(TrendPattern::inverted_u, 3000, 0.5, 5000, 2500, 1, 1);
  EXPECT_NEAR(f - up, f - down, 1e-15);
}

TEST(TrendValue, NoneIsZero) {
  for (int j : {1, 50, 100}) EXPECT_EQ(trend_value(TrendPattern::none, j, 2.0, 100, 50, 2, 3), 0.0);
}

TEST(TrendSpec, Validation) {
  TrendSpec t = equal_trend(TrendPattern::seasonal, 0.5);
  t.cycles = 0;
  EXPECT_THROW(t.validate(4), ConfigError);
  t = equal_trend(TrendPattern::linear, 0.5, 3);
  EXPECT_THROW(t.validate(4), ConfigError);
  t = equal_trend(TrendPattern::inverted_u, 0.5);
  t.turning_point = 2000;
  EXPECT_THROW(t.turning_point_for(1528), ConfigError);
  EXPECT_THROW(parse_trend_pattern("zigzag"), ConfigError);
}

TEST(BlockRandomizer, SingleArmBlockIsPermutation) {
  Engine e(3);
  BlockRandomizer r(e);
  std::vector<int> block;
  for (int i = 0; i < 4; ++i) block.push_back(r.next({1}));
  std::sort(block.begin(), block.end());
  EXPECT_EQ(block, (std::vector<int>{0, 0, 1, 1}));
}

TEST(BlockRandomizer, EachArmTwicePerBlock) {
  Engine e(5);
  BlockRandomizer r(e);
  for (int b = 0; b < 50; ++b) {
    std::map<int, int> counts;
    for (int i = 0; i < 8; ++i) ++counts[r.next({1, 2, 3})];
    EXPECT_EQ(r.block_size(), 8u);
    for (int arm = 0; arm <= 3; ++arm) EXPECT_EQ(counts[arm], 2);
  }
}

TEST(BlockRandomizer, TwoBlocksGiveFourEach) {
  Engine e(11);
  BlockRandomizer r(e);
  r.next({1});  // partial block, discarded at the change below
  std::map<int, int> counts;
  for (int i = 0; i < 4 * 3; ++i) ++counts[r.next({1, 2})];
  for (int arm = 0; arm <= 2; ++arm) EXPECT_EQ(counts[arm], 4);
}

TEST(GenerateTrial, ArmCountsAndContiguousTimes) {
  const auto data = generate_trial(standard_config(), {}, 99);
  const auto& rec = data.records;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    EXPECT_EQ(rec[i].j, static_cast<std::int64_t>(i + 1));
    EXPECT_EQ(rec[i].time, static_cast<double>(i + 1));
  }
  for (int k = 1; k <= 4; ++k) EXPECT_EQ(count_arm(rec, k), 250);
  EXPECT_EQ(count_arm(rec, 0), static_cast<int>(rec.size()) - 4 * 250);
  EXPECT_EQ(data.timeline.total, rec.size());
}

TEST(GenerateTrial, AssignmentsOnlyToActiveArms) {
  const auto config = standard_config();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = generate_trial(config, {}, seed);
    std::vector<int> counts(5, 0);
    for (const auto& r : data.records) {
      if (r.arm > 0) {
        EXPECT_GE(r.time, 250.0 * (r.arm - 1) + 1);  // entered
        EXPECT_LT(counts[static_cast<std::size_t>(r.arm)], 250);  // not yet complete
      }
      ++counts[static_cast<std::size_t>(r.arm)];
    }
  }
}

TEST(GenerateTrial, BalancedWithinConstantArmSets) {
  const auto config = standard_config();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto data = generate_trial(config, {}, seed);
    const auto& tl = data.timeline;
    // Active set at each time, recomputed from the timeline.
    auto active_at = [&](double t) {
      std::vector<int> a;
      for (int k = 1; k <= 4; ++k)
        if (tl.entry_of(k) <= t && t <= tl.exit_of(k)) a.push_back(k);
      return a;
    };
    std::size_t start = 0;
    while (start < data.records.size()) {
      const auto set = active_at(data.records[start].time);
      std::size_t end = start;
      while (end < data.records.size() && active_at(data.records[end].time) == set) ++end;
      const std::size_t block = 2 * (set.size() + 1);
      const std::size_t full = (end - start) / block * block;
      std::map<int, int> counts;
      for (std::size_t i = start; i < start + full; ++i) ++counts[data.records[i].arm];
      if (full > 0) {
        const int each = static_cast<int>(full / (set.size() + 1));
        EXPECT_EQ(counts[0], each);
        for (int k : set) EXPECT_EQ(counts[k], each);
      }
      start = end;
    }
  }
}

TEST(GenerateTrial, TotalSizeNear1528) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto n = generate_trial(standard_config(), {}, seed).records.size();
    EXPECT_LE(std::abs(static_cast<long>(n) - 1528L), 10L) << "seed " << seed;
  }
}

TEST(GenerateTrial, NoiselessControlsEqualControlMean) {
  auto config = standard_config();
  config.sigma = 1e-300;
  config.control_mean = 2.5;
  const auto data = generate_trial(config, {}, 4);
  for (const auto& r : data.records)
    if (r.arm == 0) EXPECT_EQ(r.response, 2.5);
}

TEST(GenerateTrial, TrendIsAdditiveUnderEqualStrengths) {
  auto config = standard_config();
  config.sigma = 1e-300;
  config.control_mean = 1.0;
  config.effects = {0.1, 0.2, 0.3, 0.4};
  for (auto pattern : {TrendPattern::linear, TrendPattern::stepwise, TrendPattern::inverted_u,
                       TrendPattern::seasonal}) {
    const auto trend = equal_trend(pattern, 0.7);
    const auto data = generate_trial(config, trend, 8);
    const double N = static_cast<double>(data.records.size());
    const double np = std::round(N / 2);
    for (const auto& r : data.records) {
      int entered = 0;
      for (int k = 1; k <= 4; ++k) entered += data.timeline.entry_of(k) <= r.time ? 1 : 0;
      const double control_mean = 1.0 + trend_value(pattern, r.time, 0.7, N, np, 1.0, entered);
      EXPECT_NEAR(r.response - control_mean, config.effect(r.arm), 1e-12);
    }
  }
}

TEST(GenerateTrial, SeedDeterminism) {
  const auto trend = equal_trend(TrendPattern::linear, 0.5);
  const auto a = generate_trial(standard_config(), trend, 1234);
  const auto b = generate_trial(standard_config(), trend, 1234);
  const auto c = generate_trial(standard_config(), trend, 1235);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].arm, b.records[i].arm);
    EXPECT_EQ(a.records[i].response, b.records[i].response);
  }
  bool differs = a.records.size() != c.records.size();
  for (std::size_t i = 0; !differs && i < a.records.size(); ++i)
    differs = a.records[i].response != c.records[i].response;
  EXPECT_TRUE(differs);
}

TEST(GenerateTrial, FirstRecordNotBeforeEntry) {
  auto config = standard_config();
  config.entry_spacing = 137;
  const auto data = generate_trial(config, {}, 21);
  for (int k = 1; k <= 4; ++k) {
    const auto it = std::find_if(data.records.begin(), data.records.end(),
                                 [k](const PatientRecord& r) { return r.arm == k; });
    ASSERT_NE(it, data.records.end());
    EXPECT_GE(it->time, 137.0 * (k - 1) + 1);
  }
}

TEST(SliceForArm, LastFinishingArmKeepsEverything) {
  const auto data = generate_trial(standard_config(), {}, 5);
  int last = 1;
  for (int k = 2; k <= 4; ++k)
    if (data.timeline.exit_of(k) > data.timeline.exit_of(last)) last = k;
  EXPECT_EQ(slice_for_arm(data, last).size(), data.records.size());
}

TEST(SliceForArm, EarlyArmExcludesLateArm) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = generate_trial(standard_config(), {}, seed);
    const auto slice = slice_for_arm(data, 1);
    const double horizon = data.timeline.exit_of(1);
    ASSERT_LT(horizon, data.timeline.entry_of(4));
    EXPECT_EQ(count_arm(slice, 4), 0);
    for (const auto& r : slice) EXPECT_LE(r.time, horizon);
    // Arms still recruiting at the horizon contribute partial data.
    EXPECT_GT(count_arm(slice, 2), 0);
    EXPECT_LT(count_arm(slice, 2), 250);
  }
}

TEST(SliceForArm, IncompleteArmIsAnError) {
  auto data = generate_trial(standard_config(), {}, 6);
  EXPECT_THROW(slice_for_arm(data, 5), DataError);
  std::erase_if(data.records, [](const PatientRecord& r) { return r.arm == 2 && r.time > 600; });
  EXPECT_THROW(slice_for_arm(data, 2), DataError);
}

TEST(DatasetFromRecords, EmpiricalTimeline) {
  std::vector<PatientRecord> recs;
  // Non-uniform times: arm 1 on days 0..40, arm 2 from day 20 on.
  const std::vector<std::pair<double, int>> rows{{0, 0}, {3, 1}, {7, 0}, {10, 1}, {20, 2}, {22, 0},
                                                 {31, 1}, {35, 2}, {40, 0}, {46, 2}, {50, 0}};
  for (std::size_t i = 0; i < rows.size(); ++i)
    recs.push_back({static_cast<std::int64_t>(i + 1), rows[i].second, rows[i].first, 0.0});
  const auto data = dataset_from_records(recs);
  EXPECT_EQ(data.timeline.origin, 0.0);
  EXPECT_EQ(data.timeline.entry, (std::vector<Time>{0, 20}));
  EXPECT_EQ(data.timeline.exit, (std::vector<Time>{31, 46}));
  EXPECT_EQ(data.timeline.closes[0], 35.0);
  EXPECT_EQ(data.timeline.closes[1], 50.0);
  const auto periods = derive_periods(data.timeline, data.timeline.exit_of(2));
  EXPECT_EQ(periods.starts(), (std::vector<Time>{0, 20, 35}));
}

TEST(DatasetFromRecords, MissingArmLabelIsAnError) {
  std::vector<PatientRecord> recs{{1, 0, 1, 0}, {2, 2, 2, 0}, {3, 0, 3, 0}};
  EXPECT_THROW(dataset_from_records(recs), DataError);
  EXPECT_THROW(dataset_from_records({}), DataError);
}
