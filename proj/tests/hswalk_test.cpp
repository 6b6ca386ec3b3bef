#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "glsim/hswalk.hpp"

namespace glsim {
namespace {

EnvironmentSource uniform_source(const DomainPtr& d) {
  return [d](std::size_t) { return Environment::uniform(d, 1.0, 0.1); };
}

TEST(HsWalk, SingleSiteUniformExit) {
  const auto d = share(build_rectangle(1, 1));
  const auto env = Environment::uniform(d, 1.0, 0.1);
  std::vector<double> counts(4, 0.0);
  const int n = 40000;
  double time = 0.0;
  for (int w = 0; w < n; ++w) {
    Rng rng = walk_rng(1, 2, 0, static_cast<std::size_t>(w));
    const auto p = simulate_walk(env, 0, 0.0, kInf, rng);
    ASSERT_TRUE(p.exit_site.has_value());
    EXPECT_EQ(p.sites.size(), 1u);
    counts[static_cast<std::size_t>(*p.exit_site - 1)] += 1.0;
    time += *p.exit_time;
  }
  for (double c : counts) EXPECT_NEAR(c / n, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / n) * 1.4);
  // total jump rate 4 -> mean exit time 1/4
  EXPECT_NEAR(time / n, 0.25, 4.0 * 0.25 / std::sqrt(n));
}

TEST(HsWalk, PathOccupationMatchesGreen) {
  const auto d = share(build_path(3));
  const auto c22 = hs_covariance(uniform_source(d), 20, 1, 1, kInf, 5000, 3);
  const auto c13 = hs_covariance(uniform_source(d), 20, 0, 2, kInf, 5000, 4);
  EXPECT_TRUE(c22.estimate.covers(1.0, 3.0)) << c22.estimate.value << " +- " << c22.estimate.se;
  EXPECT_TRUE(c13.estimate.covers(0.25, 3.0)) << c13.estimate.value << " +- " << c13.estimate.se;
  EXPECT_TRUE(c22.horizon_ok);
}

TEST(HsWalk, SquareOccupationMatchesGreen) {
  const auto d = share(build_rectangle(5, 5));
  const auto g = greens_function(d);
  const int x = d->index_of({2, 2}), y = d->index_of({3, 2});
  const auto est = hs_covariance(uniform_source(d), 20, x, y, kInf, 5000, 5);
  EXPECT_TRUE(est.estimate.covers(g(x, y), 3.0)) << est.estimate.value << " vs " << g(x, y);
}

TEST(HsWalk, GaussLegendre) {
  const auto nodes = gauss_legendre_unit(8);
  ASSERT_EQ(nodes.size(), 8u);
  EXPECT_NEAR(nodes.front().first, 0.5 * (1.0 - 0.9602898564975363), 1e-15);
  for (int k = 0; k <= 15; ++k) {
    double q = 0.0;
    for (const auto& [x, w] : nodes) q += w * std::pow(x, k);
    EXPECT_NEAR(q, 1.0 / (k + 1), 1e-14) << k;
  }
  EXPECT_EQ(gauss_legendre_unit(3).size(), 3u);
  EXPECT_THROW(gauss_legendre_unit(1), InvalidArgument);
}

TEST(HsWalk, HsMeanQuadraticIsHarmonicExtension) {
  const auto d = share(build_path(3));
  const std::vector<double> psi{0.0, 4.0};
  const auto make = [&](double) { return uniform_source(d); };
  const auto r = hs_mean(psi, 1, 4, make, 10, kInf, 4000, 6);
  EXPECT_TRUE(r.estimate.covers(2.0, 3.0)) << r.estimate.value;
  const std::vector<double> flat{1.5, 1.5};
  const auto c = hs_mean(flat, 0, 2, make, 2, kInf, 100, 7);
  EXPECT_NEAR(c.estimate.value, 1.5, 1e-12);
}

TEST(HsWalk, QuadraticExitLawWithinNull) {
  const auto d = share(build_rectangle(6, 6));
  const auto r = exit_law(uniform_source(d), 10, d->index_of({2, 3}), kInf, 5000, 8);
  EXPECT_TRUE(r.within_null) << r.tv << " vs " << r.null_quantile;
  EXPECT_EQ(r.unabsorbed, 0u);
  double total = 0.0;
  for (double v : r.empirical) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(HsWalk, RecordedEnvironment) {
  RunConfig c;
  c.domain = share(build_rectangle(6, 6));
  c.potential = Potential::anharmonic();
  c.burnin = 200;
  c.seed = 9;
  EnvironmentStream s1(c, 10), s2(c, 10);
  const auto e1 = s1.next(50);
  const auto e2 = s2.next(50);
  ASSERT_EQ(e1.steps(), 50u);
  for (std::size_t i = 0; i < e1.rows().size(); ++i) {
    EXPECT_EQ(e1.rows()[i], e2.rows()[i]);
    EXPECT_GE(e1.rows()[i], static_cast<float>(c.potential.a()));
    EXPECT_LE(e1.rows()[i], static_cast<float>(c.potential.A()));
  }
  RunConfig q = c;
  q.potential = Potential::quadratic();
  EnvironmentStream sq(q, 0);
  const auto eq = sq.next(5);
  for (float v : eq.rows()) EXPECT_EQ(v, 1.0f);
}

// One interior site: exit via bond b happens with probability Σ_k c_k(b)/C_k (e^{-Λ_k} - e^{-Λ_{k+1}}).
TEST(HsWalk, OneJumpLawFromRecordedRates) {
  RunConfig c;
  c.domain = share(build_rectangle(1, 1));
  c.potential = Potential::anharmonic();
  c.psi = {0.3, -0.2, 0.5, -0.4};
  c.burnin = 100;
  c.seed = 10;
  EnvironmentStream stream(c, 0);
  const auto env = stream.next(400);
  const Domain& d = env.domain();
  std::vector<double> exact(4, 0.0);
  double cum = 0.0;
  for (std::size_t k = 0; k < env.steps(); ++k) {
    double total = 0.0;
    for (int b = 0; b < 4; ++b) total += env.rate(k, d.neighbor_bonds(0)[static_cast<std::size_t>(b)]);
    const double mass = std::exp(-cum) - std::exp(-(cum + total * env.dt()));
    for (int b = 0; b < 4; ++b)
      exact[static_cast<std::size_t>(d.neighbors(0)[static_cast<std::size_t>(b)] - 1)] +=
          env.rate(k, d.neighbor_bonds(0)[static_cast<std::size_t>(b)]) / total * mass;
    cum += total * env.dt();
  }
  const auto r = exit_law([&](std::size_t) { return env; }, 1, 0, env.horizon(), 40000, 11);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(r.empirical[i], exact[i] / (1.0 - std::exp(-cum)), 4.0 * std::sqrt(0.25 / 40000.0));
}

TEST(HsWalk, HeatKernelShortTimes) {
  const auto d = share(build_rectangle(9, 9));
  const auto r = heat_kernel_envelope(uniform_source(d), 2, d->index_of({4, 4}), 0.01, 1, 5000, 12);
  // p(τ; x, x) = e^{-4τ} + O(τ²)
  EXPECT_NEAR(r.delta_hat, std::exp(-0.04), 0.01);
  EXPECT_GT(r.c_hat, 0.9);
  EXPECT_LT(r.c_hat, 1.1);
}

TEST(HsWalk, HittingWholeBall) {
  const auto d = share(build_rectangle(21, 21));
  const Site centre{10, 10};
  std::vector<Site> ball;
  for (int x = 0; x < 21; ++x)
    for (int y = 0; y < 21; ++y)
      if (std::hypot(x - 10, y - 10) <= 0.75 * 8 && Site{x, y} != centre) ball.push_back({x, y});
  const auto r = hitting_lower_bound(uniform_source(d), 2, d->index_of(centre), ball, 8.0, kInf, 1000, 13);
  EXPECT_EQ(r.probability.value, 1.0);
  const std::vector<Site> one{{14, 10}};
  const auto s = hitting_lower_bound(uniform_source(d), 4, d->index_of(centre), one, 8.0, kInf, 2000, 14);
  EXPECT_GT(s.probability.value, 0.0);
  EXPECT_LT(s.probability.value, 1.0);
}

TEST(HsWalk, EnvironmentFileRoundTrip) {
  RunConfig c;
  c.domain = share(build_rectangle(3, 2));
  c.potential = Potential::anharmonic();
  c.burnin = 10;
  EnvironmentStream s(c, 0);
  const auto env = s.next(7);
  std::stringstream ss;
  write_environment(ss, env);
  const auto back = read_environment(ss);
  EXPECT_EQ(back.steps(), 7u);
  EXPECT_EQ(back.dt(), env.dt());
  for (std::size_t i = 0; i < env.rows().size(); ++i) EXPECT_EQ(back.rows()[i], env.rows()[i]);
  std::stringstream bad("glenv v2\n");
  EXPECT_THROW(read_environment(bad), InvalidArgument);
}

}  // namespace
}  // namespace glsim
