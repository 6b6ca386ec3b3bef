#include <cmath>

#include <gtest/gtest.h>

#include "glsim/clt.hpp"
#include "glsim/dynamics.hpp"

namespace glsim {
namespace {

TEST(Clt, BumpGradientMatchesFiniteDifference) {
  const auto f = bump(0.5, 0.5, 0.3);
  auto value = [](double x, double y) {
    const double s = ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / 0.09;
    return s >= 1.0 ? 0.0 : std::exp(-1.0 / (1.0 - s));
  };
  const double h = 1e-6;
  for (double x : {0.4, 0.55, 0.7})
    for (double y : {0.35, 0.5, 0.62}) {
      EXPECT_NEAR(f.grad_x(x, y), (value(x + h, y) - value(x - h, y)) / (2 * h), 1e-6);
      EXPECT_NEAR(f.grad_y(x, y), (value(x, y + h) - value(x, y - h)) / (2 * h), 1e-6);
    }
  EXPECT_EQ(f.grad_x(0.9, 0.9), 0.0);
}

TEST(Clt, TrivialFunctionals) {
  const auto d = share(build_rectangle(16, 16));
  const auto f = bump(0.5, 0.5, 0.3);
  const Field constant(d, std::vector<double>(d->num_sites(), 3.0));
  EXPECT_EQ(field_functional(constant, f, 1.0 / 16), 0.0);
  TestFunction flat{[](double, double) { return 0.0; }, [](double, double) { return 0.0; }, 0, 1, 0, 1};
  Field random(d);
  Rng rng(1, 0);
  for (std::size_t i = 0; i < d->num_sites(); ++i) random[static_cast<int>(i)] = rng.normal();
  EXPECT_EQ(field_functional(random, flat, 1.0 / 16), 0.0);
  EXPECT_THROW(field_functional(random, bump(0.1, 0.5, 0.3), 1.0 / 16), InvalidArgument);
}

TEST(Clt, Bilinearity) {
  const auto d = share(build_rectangle(16, 16));
  const auto f = bump(0.5, 0.5, 0.3), g = bump(0.45, 0.55, 0.2);
  TestFunction sum{[&](double x, double y) { return f.grad_x(x, y) + 2.0 * g.grad_x(x, y); },
                   [&](double x, double y) { return f.grad_y(x, y) + 2.0 * g.grad_y(x, y); }, 0.2, 0.8, 0.2, 0.8};
  Rng rng(2, 0);
  Field a(d), b(d), ab(d);
  for (std::size_t i = 0; i < d->num_sites(); ++i) {
    a[static_cast<int>(i)] = rng.normal();
    b[static_cast<int>(i)] = rng.normal();
    ab[static_cast<int>(i)] = a[static_cast<int>(i)] - 0.5 * b[static_cast<int>(i)];
  }
  const double eps = 1.0 / 16;
  EXPECT_NEAR(field_functional(ab, f, eps), field_functional(a, f, eps) - 0.5 * field_functional(b, f, eps), 1e-10);
  EXPECT_NEAR(field_functional(a, sum, eps), field_functional(a, f, eps) + 2.0 * field_functional(a, g, eps), 1e-10);
}

TEST(Clt, SiteVectorReproducesFunctional) {
  const auto d = share(build_rectangle(16, 16));
  const auto w = functional_weights(*d, bump(0.5, 0.5, 0.3), 1.0 / 16);
  const auto u = functional_site_vector(*d, w);
  Rng rng(3, 0);
  Field h(d);
  for (std::size_t i = 0; i < d->num_interior(); ++i) h[static_cast<int>(i)] = rng.normal();
  double direct = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) direct += u[i] * h[static_cast<int>(i)];
  EXPECT_NEAR(field_functional(h, w), direct, 1e-12);
}

TEST(Clt, DgffVarianceOracleAndNormality) {
  const auto d = share(build_rectangle(32, 32));
  const auto solver = std::make_shared<const LaplacianSolver>(d);
  const auto w = functional_weights(*d, bump(0.5, 0.5, 0.3), 1.0 / 32);
  const double exact = dgff_functional_variance(*solver, w);
  const auto batch = sample_dgff(solver, std::vector<double>(d->num_boundary(), 0.0), 4000, 4);
  std::vector<double> xi, sq;
  for (const Field& f : batch.fields) xi.push_back(field_functional(f, w));
  const double m = mean(xi);
  for (double v : xi) sq.push_back((v - m) * (v - m));
  EXPECT_TRUE(mean_estimate(sq).covers(exact, 3.0)) << mean(sq) << " vs " << exact;
  EXPECT_TRUE(gaussianity_test(xi).pass);
  Rng rng(4, 1);
  std::vector<double> fake;
  for (int i = 0; i < 2000; ++i) fake.push_back(rng.exponential(1.0));
  EXPECT_FALSE(gaussianity_test(fake).pass);
}

TEST(Clt, MeshConsistency) {
  const auto f = bump(0.5, 0.5, 0.3);
  double v[2];
  for (int k = 0; k < 2; ++k) {
    const int n = 32 << k;
    const auto d = share(build_rectangle(n, n));
    const LaplacianSolver solver(d);
    v[k] = dgff_functional_variance(solver, functional_weights(*d, f, 1.0 / n));
  }
  EXPECT_LT(std::abs(v[0] - v[1]) / v[1], 0.10);
}

TEST(Clt, QuadraticCoefficientIsOne) {
  const auto d = share(build_rectangle(8, 8));
  const auto batch = sample_dgff(d, std::vector<double>(d->num_boundary(), 0.0), 100, 5);
  const auto bonds = bulk_bonds(*d, 3);
  const auto r = estimate_a_v(batch, Potential::quadratic(), bonds);
  EXPECT_NEAR(r.value.value, 1.0, 1e-12);
  EXPECT_TRUE(r.bond_independent);
}

TEST(Clt, FkgAndBrascampLiebOnDgff) {
  const auto d = share(build_rectangle(8, 8));
  const auto solver = std::make_shared<const LaplacianSolver>(d);
  const auto batch = sample_dgff(solver, std::vector<double>(d->num_boundary(), 0.0), 5000, 6);
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k < 20; ++k) pairs.push_back({k, 63 - k});
  EXPECT_TRUE(fkg_check(batch, pairs).pass);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(64);
  nu[d->index_of({3, 3})] = nu[d->index_of({4, 3})] = nu[d->index_of({3, 4})] = 1.0;
  const auto bl = brascamp_lieb_check(batch, *solver, nu, 1.0);
  EXPECT_TRUE(bl.variance_pass);
  EXPECT_TRUE(bl.exp_pass);
  // equality case: the DGFF sits on its own bound
  EXPECT_TRUE(bl.variance.covers(bl.dgff_variance, 4.0));
  EXPECT_TRUE(bl.exp_moment.covers(bl.exp_bound, 4.0));
  // a deliberately too-strong constant fails
  EXPECT_FALSE(brascamp_lieb_check(batch, *solver, nu, 2.0).variance_pass);
}

}  // namespace
}  // namespace glsim
