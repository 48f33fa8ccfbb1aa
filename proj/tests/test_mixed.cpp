#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "ncc/mixed.hpp"
#include "oracles.hpp"

using namespace ncc;

namespace {

struct GroupedData {
  DesignMatrix fixed;
  RandomDesign random;
};

// y = b0 + b1 x + u_group + e with `groups` x `per_group` observations.
GroupedData grouped(int groups, int per_group, double sd_u, std::uint64_t seed, double rho = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const int n = groups * per_group;
  GroupedData g;
  g.fixed.X.resize(n, 2);
  g.fixed.y.resize(n);
  g.fixed.columns = {"(Intercept)", "x"};
  g.random.Z = Eigen::MatrixXd::Zero(n, groups);
  const Eigen::MatrixXd L = ar1_correlation(groups, rho).llt().matrixL();
  Eigen::VectorXd e(groups);
  for (auto& v : e) v = z(rng);
  const Eigen::VectorXd u = sd_u * (L * e);
  for (int gi = 0; gi < groups; ++gi) {
    g.random.labels.push_back("g" + std::to_string(gi + 1));
    g.random.positions.push_back(gi + 1);
  }
  for (int i = 0; i < n; ++i) {
    const int gi = i / per_group;
    g.fixed.X(i, 0) = 1.0;
    g.fixed.X(i, 1) = z(rng);
    g.random.Z(i, gi) = 1.0;
    g.fixed.y(i) = 0.5 + 0.3 * g.fixed.X(i, 1) + u(gi) + z(rng);
  }
  return g;
}

}  // namespace

TEST(RandomDesign, IntervalIntercepts) {
  std::vector<PatientRecord> data;
  for (int t = 1; t <= 9; ++t) data.push_back({t, t % 2, static_cast<double>(t), 0.0});
  const auto rd = build_random_intercepts(data, Partition({1, 4, 7}, 9), "per");
  EXPECT_EQ(rd.Z.cols(), 2);
  EXPECT_EQ(rd.labels, (std::vector<std::string>{"per2", "per3"}));
  EXPECT_EQ(rd.Z.col(0).sum(), 3.0);
  EXPECT_THROW(build_random_intercepts(data, Partition({1}, 9), "per"), DegenerateFitError);
}

TEST(RandomDesign, InteractionDropsEmptyCells) {
  // Arm 1 in periods 1-2, arm 2 in periods 2-3, arm 3 (evaluated) in period 3.
  const std::vector<std::pair<int, double>> rows{{0, 1}, {1, 2}, {0, 4}, {1, 5}, {2, 6}, {0, 7}, {2, 8}, {3, 9}};
  std::vector<PatientRecord> data;
  for (const auto& [arm, t] : rows) data.push_back({static_cast<std::int64_t>(t), arm, t, 0.0});
  const auto rd = build_random_interaction(data, Partition({1, 4, 7}, 9), {1, 2}, "per");
  EXPECT_EQ(rd.labels, (std::vector<std::string>{"trt1:per2", "trt2:per2", "trt2:per3"}));
  EXPECT_EQ(rd.Z.cols(), 3);
  EXPECT_EQ(rd.Z(3, 0), 1.0);
  EXPECT_EQ(rd.Z(7, 2), 0.0);  // arm 3 never enters the interaction
  EXPECT_THROW(build_random_interaction(data, Partition({1, 4, 7}, 9), {}, "per"), DegenerateFitError);
}

TEST(Ar1, Examples) {
  EXPECT_EQ(ar1_correlation(4, 0.0), Eigen::MatrixXd::Identity(4, 4));
  Eigen::Matrix3d expected;
  expected << 1, 0.5, 0.25, 0.5, 1, 0.5, 0.25, 0.5, 1;
  EXPECT_LT((ar1_correlation(3, 0.5) - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(ar1_correlation(3, 1.0), ConfigError);
  EXPECT_THROW(ar1_correlation(3, -1.2), ConfigError);
}

TEST(Ar1, PositiveDefiniteOnRhoGrid) {
  for (int m : {2, 5, 16}) {
    for (double rho = -0.99; rho <= 0.99 + 1e-12; rho += 0.01) {
      const Eigen::MatrixXd R = ar1_correlation(m, rho);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
      EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0) << "m=" << m << " rho=" << rho;
      EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(R).info(), Eigen::Success);
    }
  }
}

TEST(Reml, WoodburyMatchesDenseObjective) {
  const auto g = grouped(3, 20, 0.8, 41);
  const RemlObjective obj(g.fixed.X, g.random.Z, g.fixed.y);
  for (double gamma : {0.0, 1e-4, 0.3, 2.0, 50.0})
    for (double rho : {-0.6, 0.0, 0.7}) {
      const auto R = ar1_correlation(g.random.positions, rho);
      EXPECT_NEAR(obj.evaluate(gamma, R).neg_loglik, oracle::dense_neg_reml(g.fixed.X, g.random.Z, g.fixed.y, gamma, R),
                  1e-9);
    }
}

TEST(Reml, Ar1OptimumBeatsGridSearch) {
  for (std::uint64_t seed : {51u, 52u, 53u}) {
    const auto g = grouped(8, 10, 1.0, seed, 0.5);
    const auto fit = reml_fit(g.fixed, g.random, CovStructure::ar1);
    ASSERT_TRUE(fit.converged);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 50; ++a)
      for (int b = 0; b < 50; ++b) {
        const double log_gamma = -8.0 + 12.0 * a / 49.0;
        const double z = -3.0 + 6.0 * b / 49.0;
        best = std::min(best, oracle::dense_neg_reml(g.fixed.X, g.random.Z, g.fixed.y, std::exp(log_gamma),
                                             ar1_correlation(g.random.positions, std::tanh(z))));
      }
    best = std::min(best, oracle::dense_neg_reml(g.fixed.X, g.random.Z, g.fixed.y, 0.0, Eigen::MatrixXd::Identity(8, 8)));
    EXPECT_LE(-fit.reml_loglik, best + 1e-6);
    // The reported optimum is the dense criterion at the reported parameters.
    const auto R = ar1_correlation(g.random.positions, fit.rho.value());
    EXPECT_NEAR(-fit.reml_loglik, oracle::dense_neg_reml(g.fixed.X, g.random.Z, g.fixed.y, fit.gamma, R), 1e-9);
  }
}

TEST(Reml, BalancedAnovaClosedForm) {
  for (std::uint64_t seed : {61u, 62u, 63u, 64u}) {
    const int a = 6, m = 10;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    DesignMatrix fixed;
    fixed.X = Eigen::MatrixXd::Ones(a * m, 1);
    fixed.y.resize(a * m);
    fixed.columns = {"(Intercept)"};
    RandomDesign random;
    random.Z = Eigen::MatrixXd::Zero(a * m, a);
    for (int gi = 0; gi < a; ++gi) {
      random.labels.push_back("g" + std::to_string(gi));
      random.positions.push_back(gi);
      const double u = 1.2 * z(rng);
      for (int j = 0; j < m; ++j) {
        random.Z(gi * m + j, gi) = 1;
        fixed.y(gi * m + j) = 2.0 + u + z(rng);
      }
    }
    const double grand = fixed.y.mean();
    double ssb = 0, ssw = 0;
    for (int gi = 0; gi < a; ++gi) {
      const double mean = fixed.y.segment(gi * m, m).mean();
      ssb += m * (mean - grand) * (mean - grand);
      ssw += (fixed.y.segment(gi * m, m).array() - mean).square().sum();
    }
    const double msb = ssb / (a - 1), msw = ssw / (a * (m - 1));
    ASSERT_GT(msb, msw);
    const auto fit = reml_fit(fixed, random, CovStructure::independent);
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.sigma2_random, (msb - msw) / m, 1e-6);
    EXPECT_NEAR(fit.sigma2, msw, 1e-6);
  }
}

TEST(Reml, ZeroVarianceMatchesOls) {
  // Negative between-group signal: the ANOVA estimator truncates at zero.
  for (std::uint64_t seed = 70; seed < 200; ++seed) {
    const auto g = grouped(4, 15, 0.0, seed);
    const auto fit = reml_fit(g.fixed, g.random, CovStructure::independent);
    if (!fit.boundary) continue;
    const auto ols = ols_fit(g.fixed);
    for (Eigen::Index c = 0; c < 2; ++c) EXPECT_NEAR(fit.beta(c), ols.beta(c), 1e-6);
    EXPECT_EQ(fit.sigma2_random, 0.0);
    EXPECT_NEAR(mixed_wald_test(fit, "x").p_one, wald_test(ols, "x").p_one, 1e-6);
    EXPECT_NEAR(mixed_wald_test(fit, "x").p_two, wald_test(ols, "x").p_two, 1e-6);
    return;
  }
  FAIL() << "no boundary instance found";
}

TEST(Reml, GlsAtZeroIsOls) {
  const auto g = grouped(3, 20, 1.0, 81);
  const RemlObjective obj(g.fixed.X, g.random.Z, g.fixed.y);
  const auto ev = obj.evaluate(0.0, Eigen::MatrixXd::Identity(3, 3));
  const auto ols = ols_fit(g.fixed);
  EXPECT_LT((ev.beta - ols.beta).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(ev.sigma2, ols.sigma2_hat, 1e-13);
}

TEST(Reml, Ar1WithZeroRhoIsIndependent) {
  const auto g = grouped(5, 12, 1.0, 91);
  const auto indep = reml_fit(g.fixed, g.random, CovStructure::independent);
  RemlOptions opt;
  opt.fixed_rho = 0.0;
  const auto ar1 = reml_fit(g.fixed, g.random, CovStructure::ar1, opt);
  EXPECT_NEAR(indep.gamma, ar1.gamma, 1e-6 * (1 + indep.gamma));
  EXPECT_LT((indep.beta - ar1.beta).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(indep.reml_loglik, ar1.reml_loglik, 1e-10);
}

TEST(Reml, AcceptedIteratesNeverIncrease) {
  const auto g = grouped(4, 15, 0.7, 101, 0.3);
  for (auto s : {CovStructure::independent, CovStructure::ar1}) {
    const auto fit = reml_fit(g.fixed, g.random, s);
    ASSERT_FALSE(fit.objective_trace.empty());
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
      EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1]);
  }
}

TEST(Reml, InvariantToRandomColumnOrder) {
  const auto g = grouped(5, 12, 1.0, 111, 0.4);
  auto shuffled = g.random;
  const std::vector<int> perm{3, 0, 4, 2, 1};
  for (int c = 0; c < 5; ++c) {
    shuffled.Z.col(c) = g.random.Z.col(perm[static_cast<std::size_t>(c)]);
    shuffled.positions[static_cast<std::size_t>(c)] = g.random.positions[static_cast<std::size_t>(perm[static_cast<std::size_t>(c)])];
  }
  for (auto s : {CovStructure::independent, CovStructure::ar1}) {
    const auto a = reml_fit(g.fixed, g.random, s);
    const auto b = reml_fit(g.fixed, shuffled, s);
    EXPECT_NEAR(a.beta(1), b.beta(1), 1e-8);
    EXPECT_NEAR(a.reml_loglik, b.reml_loglik, 1e-9);
  }
}

TEST(Reml, RecoversVarianceRatioOnLargeData) {
  const auto g = grouped(40, 25, 1.0, 121);
  const auto fit = reml_fit(g.fixed, g.random, CovStructure::independent);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.sigma2, 1.0, 0.15);
  EXPECT_GT(fit.sigma2_random, 0.4);
  EXPECT_LT(fit.sigma2_random, 2.0);
}

TEST(MixedWald, ZeroStatistic) {
  const auto w = wald_from(0.0, 1.0, 57);
  EXPECT_DOUBLE_EQ(w.p_one, 0.5);
}
