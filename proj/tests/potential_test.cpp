#include <cmath>

#include <gtest/gtest.h>

#include "glsim/potential.hpp"
#include "glsim/rng.hpp"

namespace glsim {
namespace {

double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

TEST(Potential, QuadraticValues) {
  const Potential q = builtin_potential("quadratic");
  EXPECT_DOUBLE_EQ(q.value(1.5), 1.125);
  EXPECT_DOUBLE_EQ(q.d1(1.5), 1.5);
  EXPECT_DOUBLE_EQ(q.d2(1.5), 1.0);
  EXPECT_DOUBLE_EQ(q.value(-2.0), 2.0);
  EXPECT_DOUBLE_EQ(q.value(-2.0), q.value(2.0));
}

TEST(Potential, AnharmonicAtZero) {
  const Potential p = builtin_potential("anharmonic");
  EXPECT_DOUBLE_EQ(p.value(0.0), 2.0);
  EXPECT_DOUBLE_EQ(p.d1(0.0), 0.0);
  const auto v1 = [&](double x) { return p.d1(x); };
  const auto v = [&](double x) { return p.value(x); };
  // second difference of V and first difference of V' as independent oracles
  const double h = 1e-4;
  EXPECT_NEAR((v(h) - 2.0 * v(0.0) + v(-h)) / (h * h), 5.0, 1e-5);
  EXPECT_NEAR(central_difference(v1, 0.0), 5.0, 1e-8);
  EXPECT_DOUBLE_EQ(p.d2(0.0), 5.0);
}

TEST(Potential, UnknownNameRejected) { EXPECT_THROW(builtin_potential("quartic"), InvalidArgument); }

TEST(Potential, DerivativesMatchFiniteDifferences) {
  Rng rng(3, 0);
  for (const Potential& p : {Potential::quadratic(), Potential::anharmonic()}) {
    const auto v = [&](double x) { return p.value(x); };
    const auto v1 = [&](double x) { return p.d1(x); };
    for (int i = 0; i < 100; ++i) {
      const double x = -5.0 + 10.0 * rng.uniform();
      EXPECT_NEAR(central_difference(v, x), p.d1(x), 1e-6 * std::max(1.0, std::abs(p.d1(x))));
      EXPECT_NEAR(central_difference(v1, x), p.d2(x), 1e-6 * std::max(1.0, std::abs(p.d2(x))));
      EXPECT_DOUBLE_EQ(p.d1(-x), -p.d1(x));
    }
  }
}

TEST(Potential, ValidateQuadratic) {
  const auto r = validate(Potential::quadratic(), 10.0, 101);
  EXPECT_EQ(r.a_hat, 1.0);
  EXPECT_EQ(r.A_hat, 1.0);
  EXPECT_EQ(r.L_hat, 0.0);
  EXPECT_TRUE(r.symmetric);
}

TEST(Potential, ValidateAnharmonicAgainstDenseGrid) {
  const Potential p = Potential::anharmonic();
  const auto r = validate(p, 10.0, 10001);
  // Independent dense minimization of 8 - cos x + (4x^2 - 2) exp(-x^2) on the same grid.
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 10001; ++i) {
    const double x = -10.0 + 20.0 * i / 10000.0;
    const double v2 = 8.0 - std::cos(x) + (4.0 * x * x - 2.0) * std::exp(-x * x);
    lo = std::min(lo, v2);
    hi = std::max(hi, v2);
  }
  EXPECT_NEAR(r.a_hat, lo, 1e-12);
  EXPECT_NEAR(r.A_hat, hi, 1e-12);
  EXPECT_NEAR(r.a_hat, 5.0, 1e-9);
  EXPECT_TRUE(r.symmetric);
  // declared bounds enclose the sampled range
  EXPECT_LE(p.a(), r.a_hat);
  EXPECT_GE(p.A(), r.A_hat);
  EXPECT_GE(p.lipschitz(), r.L_hat);
  // a finer search near the maximum stays under the declared A
  for (int i = 0; i <= 100000; ++i) EXPECT_LE(p.d2(2.9 + 0.5 * i / 100000.0), p.A());
}

TEST(Potential, QuarticFlaggedAsNotStrictlyConvex) {
  const Potential quartic = Potential::custom(
      "quartic", [](double x) { return x * x * x * x; }, [](double x) { return 4 * x * x * x; },
      [](double x) { return 12 * x * x; }, 1e-9, 1e9, 1e9);
  const auto r = validate(quartic, 2.0, 101);
  EXPECT_EQ(r.a_hat, 0.0);
  EXPECT_FALSE(r.strictly_convex());
  EXPECT_FALSE(r.ok());
}

TEST(Potential, AsymmetryFlagged) {
  const Potential skew = Potential::custom(
      "skew", [](double x) { return 0.5 * x * x + 0.1 * x; }, [](double x) { return x + 0.1; },
      [](double) { return 1.0; }, 1.0, 1.0, 0.0);
  EXPECT_FALSE(validate(skew, 1.0, 11).symmetric);
}

TEST(Potential, BoundsOverride) {
  const Potential p = Potential::anharmonic().with_bounds(6.0, 9.5);
  EXPECT_EQ(p.a(), 6.0);
  EXPECT_EQ(p.A(), 9.5);
  EXPECT_EQ(p.d2(0.0), 5.0);
}

}  // namespace
}  // namespace glsim
