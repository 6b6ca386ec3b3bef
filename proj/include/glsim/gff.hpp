#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glsim/harmonic.hpp"
#include "glsim/parallel.hpp"
#include "glsim/rng.hpp"
#include "glsim/stats.hpp"

namespace glsim {

/// Replicas of a field on one domain.
struct SampleBatch {
  DomainPtr domain;
  std::vector<Field> fields;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string meta;

  std::size_t count() const { return fields.size(); }

  /// Values of one site across replicas.
  std::vector<double> site_series(int index) const {
    std::vector<double> out;
    out.reserve(fields.size());
    for (const Field& f : fields) out.push_back(f[index]);
    return out;
  }
};

/// Exact DGFF draws: h = P^T L^{-T} z + harmonic extension of the boundary data.
/// Replica k uses its own substream, so results do not depend on the thread count.
inline SampleBatch sample_dgff(const std::shared_ptr<const LaplacianSolver>& solver,
                               std::span<const double> boundary_values, std::size_t count,
                               std::uint64_t seed, std::uint64_t stream = substream("dgff", 0)) {
  require(count >= 1, "sample_dgff: count must be positive");
  const Field mean = solver->harmonic_extension(boundary_values);
  SampleBatch batch{solver->domain_ptr(), std::vector<Field>(count), seed, stream, "dgff"};
  const auto n = static_cast<Eigen::Index>(solver->size());
  parallel_for(count, [&](std::size_t k) {
    Rng rng(seed, splitmix64(stream ^ splitmix64(k)));
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    const Eigen::VectorXd h = solver->correlate(z);
    Field f = mean;
    for (Eigen::Index i = 0; i < n; ++i) f[static_cast<int>(i)] += h[i];
    batch.fields[k] = std::move(f);
  });
  return batch;
}

inline SampleBatch sample_dgff(DomainPtr domain, std::span<const double> boundary_values,
                               std::size_t count, std::uint64_t seed) {
  return sample_dgff(std::make_shared<const LaplacianSolver>(std::move(domain)), boundary_values, count,
                     seed);
}

/// Unbiased sample covariance of two series with a delete-one jackknife standard error.
inline Estimate covariance_estimate(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "covariance: series lengths differ");
  const std::size_t n = x.size();
  require(n >= 3, "covariance: need three samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) sxy += (x[i] - mx) * (y[i] - my);
  const double nn = static_cast<double>(n);
  // Leave-one-out covariances in O(n): removing i shifts the means by (m - x_i)/(n-1).
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    const double s = sxy - dx * dy * nn / (nn - 1.0);
    loo[i] = s / (nn - 2.0);
  }
  return {sxy / (nn - 1.0), jackknife_se(loo)};
}

inline std::vector<Estimate> empirical_covariance(const SampleBatch& batch,
                                                  std::span<const std::pair<int, int>> pairs) {
  require(batch.count() >= 100, "empirical_covariance: need at least 100 samples");
  std::vector<Estimate> out;
  for (const auto& [a, b] : pairs) {
    const auto xa = batch.site_series(a);
    const auto xb = batch.site_series(b);
    out.push_back(covariance_estimate(xa, xb));
  }
  return out;
}

inline double sample_correlation(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct MarkovSplitReport {
  double max_abs_corr = 0.0;
  double se = 0.0;          ///< standard error of one correlation under independence, 1/sqrt(n)
  std::size_t pairs = 0;
  double threshold = 0.0;   ///< max_abs_corr / se must stay below this (family-wise 4 sigma)
  bool pass = true;
};

/// Splits h on W into the zero-boundary part and the harmonic extension of h on ∂W, then
/// correlates the zero-boundary part at each W site with h at every interior site of D
/// outside W. With subtract_extension = false the split is skipped (negative control).
inline MarkovSplitReport markov_split(const SampleBatch& batch, std::span<const Site> w_sites,
                                      bool subtract_extension = true) {
  MarkovSplitReport r;
  if (w_sites.empty()) return r;
  const Domain& d = *batch.domain;
  const auto w = share(Domain::from_interior({w_sites.begin(), w_sites.end()}, d.stencil()));
  for (const Site& s : w->interior())
    require(d.in_interior(s), "markov_split: W must lie in the interior");
  for (const Site& s : w->boundary())
    require(d.in_interior(s), "markov_split: W touches the domain boundary");
  const LaplacianSolver wsolver(w);
  const std::size_t n = batch.count();
  const std::size_t nw = w->num_interior();
  std::vector<std::vector<double>> inner(nw, std::vector<double>(n));
  std::vector<double> bvals(w->num_boundary());
  for (std::size_t k = 0; k < n; ++k) {
    const Field& f = batch.fields[k];
    for (std::size_t j = 0; j < bvals.size(); ++j) bvals[j] = f.at(w->boundary()[j]);
    Field ext(w);
    if (subtract_extension) ext = wsolver.harmonic_extension(bvals);
    for (std::size_t i = 0; i < nw; ++i)
      inner[i][k] = f.at(w->site(static_cast<int>(i))) - ext[static_cast<int>(i)];
  }
  std::vector<int> outside;
  for (int i = 0; i < static_cast<int>(d.num_interior()); ++i)
    if (!w->in_interior(d.site(i))) outside.push_back(i);
  for (int o : outside) {
    const auto ho = batch.site_series(o);
    for (std::size_t i = 0; i < nw; ++i) {
      r.max_abs_corr = std::max(r.max_abs_corr, std::abs(sample_correlation(inner[i], ho)));
      ++r.pairs;
    }
  }
  r.se = 1.0 / std::sqrt(static_cast<double>(n));
  r.threshold = joint_threshold(4.0, r.pairs);
  r.pass = r.max_abs_corr <= r.threshold * r.se;
  return r;
}

}  // namespace glsim
