#include <cmath>

#include <gtest/gtest.h>

#include "glsim/rng.hpp"
#include "glsim/stats.hpp"

namespace glsim {
namespace {

TEST(Stats, MeanVariance) {
  const std::vector<double> xs{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(mean(xs), 3.0);
  EXPECT_DOUBLE_EQ(variance(xs), 2.5);
  const auto e = mean_estimate(xs);
  EXPECT_DOUBLE_EQ(e.se, std::sqrt(0.5));
  EXPECT_TRUE(e.covers(3.5, 1.0));
  EXPECT_FALSE(e.covers(5.0, 1.0));
}

// Reference values from scipy.stats.anderson (statistic before small-sample correction).
TEST(Stats, AndersonDarlingMatchesReference) {
  std::vector<double> x, y;
  for (int i = 0; i < 100; ++i) x.push_back(((i * 7919) % 101) / 101.0);
  for (int i = 0; i < 60; ++i) y.push_back(std::pow(std::sin(1.0 + i), 3));
  EXPECT_NEAR(anderson_darling(x).a2, 1.139118038486572, 1e-9);
  EXPECT_NEAR(anderson_darling(y).a2, 0.9118673686581289, 1e-9);
}

TEST(Stats, AndersonDarlingRejectsUniformAcceptsNormal) {
  Rng rng(9, 0);
  std::vector<double> u, g;
  for (int i = 0; i < 2000; ++i) {
    u.push_back(rng.uniform());
    g.push_back(rng.normal());
  }
  EXPECT_FALSE(anderson_darling(u).pass);
  EXPECT_TRUE(anderson_darling(g).pass);
  EXPECT_THROW(anderson_darling(std::vector<double>(20, 1.0)), InvalidArgument);
}

TEST(Stats, BatchMeansOnAr1) {
  // AR(1) with phi = 0.9: the variance of the mean is inflated by (1 + phi)/(1 - phi).
  const double phi = 0.9;
  Rng rng(4, 0);
  std::vector<double> series(400000);
  double x = 0.0;
  for (double& v : series) {
    x = phi * x + std::sqrt(1 - phi * phi) * rng.normal();
    v = x;
  }
  const auto bm = batch_means(series, 50);
  const double naive = std::sqrt(1.0 / series.size());
  const double expected = naive * std::sqrt((1 + phi) / (1 - phi));
  EXPECT_NEAR(bm.se / expected, 1.0, 0.3);
  EXPECT_DOUBLE_EQ(bm.halfwidth, 3.0 * bm.se);
  EXPECT_NEAR(autocorrelation_time(std::span<const double>(series).first(100000)),
              0.5 * (1 + phi) / (1 - phi), 2.0);
  EXPECT_THROW(batch_means(std::span<const double>(series).first(10), 50), InvalidArgument);
}

TEST(Stats, RhatNearOneForSameDistribution) {
  Rng rng(8, 0);
  std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
  for (auto& c : chains)
    for (double& v : c) v = rng.normal();
  EXPECT_LT(rhat(chains), 1.02);
  for (double& v : chains[0]) v += 3.0;
  EXPECT_GT(rhat(chains), 1.2);
}

TEST(Stats, JointThreshold) {
  EXPECT_DOUBLE_EQ(joint_threshold(3.0, 1), 3.0);
  const double t = joint_threshold(3.0, 10);
  // Sidak: (1 - 2(1 - Phi(t)))^10 = 1 - 2(1 - Phi(3))
  const double single = 2.0 * (1.0 - normal_cdf(3.0));
  EXPECT_NEAR(std::pow(1.0 - 2.0 * (1.0 - normal_cdf(t)), 10), 1.0 - single, 1e-12);
  EXPECT_GT(t, 3.0);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
}

TEST(Stats, JackknifeOfMean) {
  // Leave-one-out means reproduce the usual standard error of the mean.
  const std::vector<double> xs{0.3, 1.7, -0.4, 2.2, 0.9, 1.1};
  std::vector<double> loo;
  const double total = std::accumulate(xs.begin(), xs.end(), 0.0);
  for (double x : xs) loo.push_back((total - x) / 5.0);
  EXPECT_NEAR(jackknife_se(loo), mean_estimate(xs).se, 1e-12);
}

}  // namespace
}  // namespace glsim
