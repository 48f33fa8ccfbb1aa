#include <gtest/gtest.h>

#include <random>
#include <set>

#include "ncc/design.hpp"
#include "ncc/error.hpp"

using namespace ncc;

TEST(EntryTimes, StaggeredArms) {
  TrialConfig c;
  c.num_arms = 4;
  c.entry_spacing = 250;
  EXPECT_EQ(entry_times(c), (std::vector<Time>{1, 251, 501, 751}));
}

TEST(EntryTimes, SimultaneousEntry) {
  TrialConfig c;
  c.num_arms = 3;
  c.entry_spacing = 0;
  c.evaluated_arm = 1;
  EXPECT_EQ(entry_times(c), (std::vector<Time>{1, 1, 1}));
}

TEST(EntryTimes, NoOverlapAtTwiceArmSize) {
  TrialConfig c;
  c.num_arms = 2;
  c.entry_spacing = 500;
  c.arm_size = 250;
  c.evaluated_arm = 1;
  EXPECT_EQ(entry_times(c), (std::vector<Time>{1, 501}));
}

TEST(TrialConfig, RejectsInvalidFields) {
  TrialConfig c;
  c.evaluated_arm = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sigma = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.arm_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.num_arms = 1;
  c.evaluated_arm = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(DerivePeriods, BoundariesAreUnionOfChangePoints) {
  const std::vector<Time> entries{1, 251, 501, 751};
  const std::vector<Time> closes{628, 1011, 1133, 1391};
  const Partition p = derive_periods(entries, closes, 1132);
  EXPECT_EQ(p.starts(), (std::vector<Time>{1, 251, 501, 628, 751, 1011}));
  EXPECT_EQ(p.horizon(), 1132);
}

TEST(DerivePeriods, SingleArmGivesOnePeriod) {
  const Partition p = derive_periods({1}, {501}, 500);
  EXPECT_EQ(p.size(), 1u);
  EXPECT_EQ(p.width(0), 500);
}

TEST(DerivePeriods, SimultaneousEntriesGiveOneBoundary) {
  const Partition p = derive_periods({1, 101, 101}, {400, 500, 500}, 499);
  EXPECT_EQ(p.starts(), (std::vector<Time>{1, 101, 400}));
}

TEST(DerivePeriods, NoArmsIsAnError) {
  try {
    derive_periods({}, {}, 10);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "no arms active");
  }
}

TEST(DeriveCalendar, LastUnitTruncated) {
  const Partition p = derive_calendar(1528, 100);
  ASSERT_EQ(p.size(), 16u);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) EXPECT_EQ(p.width(i), 100);
  EXPECT_EQ(p.width(15), 28);
  // Direct enumeration of the unit containing each patient.
  std::set<long> units;
  for (long t = 1; t <= 1528; ++t) units.insert((t - 1) / 100);
  EXPECT_EQ(units.size(), p.size());
}

TEST(DeriveCalendar, UnitEqualToHorizon) {
  const Partition p = derive_calendar(450, 450);
  EXPECT_EQ(p.size(), 1u);
  EXPECT_EQ(p.width(0), 450);
}

TEST(DeriveCalendar, OnePatientSpill) {
  const Partition p = derive_calendar(451, 450);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.width(0), 450);
  EXPECT_EQ(p.width(1), 1);
}

TEST(DeriveCalendar, RejectsShortUnits) {
  EXPECT_THROW(derive_calendar(100, 0.5), ConfigError);
  EXPECT_THROW(derive_calendar(100, 0), ConfigError);
}

TEST(DeriveCalendar, LongUnitGivesOneInterval) {
  for (double c : {100.0, 101.0, 5000.0}) EXPECT_EQ(derive_calendar(100, c).size(), 1u);
}

TEST(IntervalIndex, HalfOpenConvention) {
  const Partition p = derive_calendar(1528, 100);
  EXPECT_EQ(interval_index(1, p), 1u);
  EXPECT_EQ(interval_index(100, p), 1u);
  EXPECT_EQ(interval_index(101, p), 2u);
  EXPECT_EQ(interval_index(1528, p), 16u);
  EXPECT_THROW(interval_index(0, p), DataError);
  EXPECT_THROW(interval_index(1529, p), DataError);
}

TEST(PartitionProperty, WidthsSumToHorizonAndIndexIsUnique) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int horizon = std::uniform_int_distribution<int>(1, 3000)(rng);
    const Partition cal = derive_calendar(horizon, std::uniform_int_distribution<int>(1, 800)(rng));

    const int arms = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<Time> entries, closes;
    for (int k = 0; k < arms; ++k) {
      const int e = std::uniform_int_distribution<int>(1, horizon)(rng);
      entries.push_back(e);
      closes.push_back(e + std::uniform_int_distribution<int>(1, 2 * horizon)(rng));
    }
    entries.front() = 1;
    const Partition per = derive_periods(entries, closes, horizon);

    // Boundaries are exactly the distinct change points up to the horizon.
    std::set<Time> expected{1};
    for (Time e : entries)
      if (e <= horizon) expected.insert(e);
    for (Time c : closes)
      if (c <= horizon) expected.insert(c);
    EXPECT_EQ(std::vector<Time>(expected.begin(), expected.end()), per.starts());

    for (const Partition* p : {&cal, &per}) {
      Time sum = 0;
      for (std::size_t i = 0; i < p->size(); ++i) sum += p->width(i);
      EXPECT_EQ(sum, horizon);
      std::vector<int> hits(p->size(), 0);
      for (int t = 1; t <= horizon; ++t) {
        const std::size_t s = p->index(t);
        ASSERT_GE(s, 1u);
        ASSERT_LE(s, p->size());
        EXPECT_GE(t, p->starts()[s - 1]);
        if (s < p->size()) EXPECT_LT(t, p->starts()[s]);
        ++hits[s - 1];
      }
      for (std::size_t i = 0; i < p->size(); ++i) EXPECT_EQ(hits[i], p->width(i));
    }
  }
}
