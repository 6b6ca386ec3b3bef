#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "glsim/error.hpp"

namespace glsim {

struct Estimate {
  double value = 0.0;
  double se = 0.0;

  double lo(double sigmas) const { return value - sigmas * se; }
  double hi(double sigmas) const { return value + sigmas * se; }
  bool covers(double target, double sigmas) const { return std::abs(value - target) <= sigmas * se; }
};

inline double mean(std::span<const double> xs) {
  require(!xs.empty(), "mean: empty series");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> xs) {
  require(xs.size() >= 2, "variance: need two values");
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

inline Estimate mean_estimate(std::span<const double> xs) {
  return {mean(xs), std::sqrt(variance(xs) / static_cast<double>(xs.size()))};
}

struct BatchMeans {
  double mean = 0.0;
  double se = 0.0;
  /// 3-sigma half width of the confidence interval.
  double halfwidth = 0.0;
  int batches = 0;
  Estimate estimate() const { return {mean, se}; }
};

/// Non-overlapping batch means. Trailing values that do not fill a batch are dropped.
inline BatchMeans batch_means(std::span<const double> series, int batch_count) {
  require(batch_count >= 2, "batch_means: need at least two batches");
  require(series.size() >= 4 * static_cast<std::size_t>(batch_count), "batch_means: series too short");
  const std::size_t len = series.size() / static_cast<std::size_t>(batch_count);
  std::vector<double> means(static_cast<std::size_t>(batch_count));
  for (int b = 0; b < batch_count; ++b) {
    const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * len);
    means[static_cast<std::size_t>(b)] =
        std::accumulate(first, first + static_cast<std::ptrdiff_t>(len), 0.0) / static_cast<double>(len);
  }
  BatchMeans r;
  r.batches = batch_count;
  r.mean = mean(means);
  double ss = 0.0;
  for (double m : means) ss += (m - r.mean) * (m - r.mean);
  r.se = std::sqrt(ss / (batch_count - 1) / batch_count);
  r.halfwidth = 3.0 * r.se;
  return r;
}

/// Batch means with the default batch count used across the harness.
inline Estimate series_estimate(std::span<const double> series) {
  const int batches = static_cast<int>(std::min<std::size_t>(50, series.size() / 4));
  if (batches < 2) return mean_estimate(series);
  return batch_means(series, batches).estimate();
}

/// Integrated autocorrelation time with Sokal's automatic window (c = 5), in units of
/// the series spacing. Returns 0.5 for white noise.
inline double autocorrelation_time(std::span<const double> series, double window_c = 5.0) {
  const std::size_t n = series.size();
  require(n >= 8, "autocorrelation_time: series too short");
  const double m = mean(series);
  double c0 = 0.0;
  for (double x : series) c0 += (x - m) * (x - m);
  c0 /= static_cast<double>(n);
  if (c0 == 0.0) return 0.5;
  double tau = 0.5;
  for (std::size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (series[i] - m) * (series[i + lag] - m);
    c /= static_cast<double>(n);
    tau += c / c0;
    if (static_cast<double>(lag) >= window_c * tau) break;
  }
  return std::max(tau, 0.5);
}

/// Gelman-Rubin potential scale reduction over equal-length chains.
inline double rhat(const std::vector<std::vector<double>>& chains) {
  require(chains.size() >= 2, "rhat: need two chains");
  const std::size_t n = chains.front().size();
  require(n >= 2, "rhat: chains too short");
  const double m = static_cast<double>(chains.size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    require(c.size() == n, "rhat: chains differ in length");
    means.push_back(mean(c));
    w += variance(c);
  }
  w /= m;
  const double b = static_cast<double>(n) * variance(means);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b / static_cast<double>(n);
  return std::sqrt(var_plus / w);
}

inline double normal_cdf(double z) { return boost::math::cdf(boost::math::normal(), z); }
inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

/// Per-comparison z threshold giving the family of m comparisons the same two-sided
/// level as a single `sigmas` interval (Sidak correction).
inline double joint_threshold(double sigmas, std::size_t m) {
  if (m <= 1) return sigmas;
  const double alpha = 2.0 * (1.0 - normal_cdf(sigmas));
  const double per = 1.0 - std::pow(1.0 - alpha, 1.0 / static_cast<double>(m));
  return normal_quantile(1.0 - per / 2.0);
}

/// Delete-one jackknife standard error of a statistic over n replicas, given the n
/// leave-one-out values.
inline double jackknife_se(std::span<const double> loo) {
  const double n = static_cast<double>(loo.size());
  require(loo.size() >= 2, "jackknife_se: need two replicas");
  const double m = mean(loo);
  double ss = 0.0;
  for (double v : loo) ss += (v - m) * (v - m);
  return std::sqrt((n - 1.0) / n * ss);
}

struct NormalityTest {
  double a2 = 0.0;       ///< Anderson-Darling statistic
  double a2_star = 0.0;  ///< with the small-sample correction for estimated mean and variance
  double critical = 0.0;
  bool pass = false;
};

/// Anderson-Darling test for normality with mean and variance estimated from the data.
/// Critical value 1.035 is the 1% point of the corrected statistic (Stephens 1974).
inline NormalityTest anderson_darling(std::span<const double> xs) {
  const std::size_t n = xs.size();
  require(n >= 8, "anderson_darling: need at least 8 values");
  const double m = mean(xs);
  const double sd = std::sqrt(variance(xs));
  require(sd > 0.0, "anderson_darling: degenerate (zero variance) sample");
  std::vector<double> z(xs.begin(), xs.end());
  for (double& v : z) v = (v - m) / sd;
  std::sort(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f_lo = std::clamp(normal_cdf(z[i]), 1e-300, 1.0 - 1e-16);
    const double f_hi = std::clamp(normal_cdf(z[n - 1 - i]), 1e-300, 1.0 - 1e-16);
    s += (2.0 * static_cast<double>(i) + 1.0) * (std::log(f_lo) + std::log1p(-f_hi));
  }
  NormalityTest t;
  const double nn = static_cast<double>(n);
  t.a2 = -nn - s / nn;
  t.a2_star = t.a2 * (1.0 + 0.75 / nn + 2.25 / (nn * nn));
  t.critical = 1.035;
  t.pass = t.a2_star < t.critical;
  return t;
}

}  // namespace glsim
