#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "glsim/dynamics.hpp"
#include "glsim/harmonic.hpp"
#include "glsim/parallel.hpp"
#include "glsim/rng.hpp"
#include "glsim/stats.hpp"

namespace glsim {

/// Bond conductances c_t(b) = V''(∇h_t(b)) on the grid t_k = k dt, piecewise constant on
/// [t_k, t_{k+1}). A uniform environment has no rows and is valid for all times.
class Environment {
 public:
  Environment() = default;

  static Environment uniform(DomainPtr domain, double value, double dt) {
    Environment e;
    e.domain_ = std::move(domain);
    e.dt_ = dt;
    e.uniform_ = value;
    e.max_rate_ = value;
    e.min_rate_ = value;
    return e;
  }

  static Environment from_rows(DomainPtr domain, double dt, std::vector<float> rows) {
    Environment e;
    e.domain_ = std::move(domain);
    e.dt_ = dt;
    require(rows.size() % e.domain_->bonds().size() == 0, "environment: ragged rows");
    e.rows_ = std::move(rows);
    e.max_rate_ = 0.0;
    e.min_rate_ = kInf;
    for (float v : e.rows_) {
      e.max_rate_ = std::max(e.max_rate_, static_cast<double>(v));
      e.min_rate_ = std::min(e.min_rate_, static_cast<double>(v));
    }
    return e;
  }

  const Domain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }
  double dt() const { return dt_; }
  bool is_uniform() const { return uniform_.has_value(); }
  std::size_t steps() const { return is_uniform() ? 0 : rows_.size() / domain_->bonds().size(); }
  /// Length of the recorded window; infinite for uniform environments.
  double horizon() const { return is_uniform() ? kInf : static_cast<double>(steps()) * dt_; }
  double max_rate() const { return max_rate_; }
  double min_rate() const { return min_rate_; }
  std::span<const float> rows() const { return rows_; }

  double rate(std::size_t step, int bond) const {
    if (uniform_) return *uniform_;
    return rows_[step * domain_->bonds().size() + static_cast<std::size_t>(bond)];
  }

 private:
  DomainPtr domain_;
  double dt_ = 0.0;
  std::optional<double> uniform_;
  std::vector<float> rows_;
  double max_rate_ = 0.0;
  double min_rate_ = 0.0;
};

/// Conductances of one field; boundary bonds use the boundary values.
inline void conductance_row(const Field& f, const Potential& p, std::span<float> out) {
  const auto& bonds = f.domain().bonds();
  p.visit([&](const auto& v) {
    for (std::size_t b = 0; b < bonds.size(); ++b) out[b] = static_cast<float>(v.d2(f.gradient(bonds[b])));
  });
}

/// Sequential environments cut from one long dynamics chain: burn-in once, then each
/// environment records `steps` rows and is followed by `gap` discarded steps.
class EnvironmentStream {
 public:
  EnvironmentStream(const RunConfig& config, long gap)
      : config_(config), gap_(gap) {
    const LaplacianSolver solver(config_.domain);
    dt_ = resolved_dt(config_);
    check_dt(dt_, config_.potential);
    state_ = initial_state(config_, solver);
    noise_ = NoiseStream(config_.seed, config_.stream);
    const long burnin = config_.burnin >= 0 ? config_.burnin : 1000;
    for (long k = 0; k < burnin; ++k) step(state_, dt_, noise_);
  }

  double dt() const { return dt_; }
  const DynState& state() const { return state_; }

  /// Records `steps` rows. Every conductance is checked against [a, A] in double precision.
  Environment next(std::size_t steps) {
    const std::size_t nb = config_.domain->bonds().size();
    std::vector<float> rows(steps * nb);
    const double a = config_.potential.a(), A = config_.potential.A();
    for (std::size_t k = 0; k < steps; ++k) {
      std::span<float> row(rows.data() + k * nb, nb);
      config_.potential.visit([&](const auto& v) {
        const auto& bonds = config_.domain->bonds();
        for (std::size_t b = 0; b < nb; ++b) {
          const double c = v.d2(state_.field.gradient(bonds[b]));
          if (!(c >= a * (1.0 - 1e-12) && c <= A * (1.0 + 1e-12)))
            throw RuntimeError("environment: conductance outside [a, A]");
          row[b] = static_cast<float>(c);
        }
      });
      step(state_, dt_, noise_);
    }
    for (long k = 0; k < gap_; ++k) step(state_, dt_, noise_);
    return Environment::from_rows(config_.domain, dt_, std::move(rows));
  }

 private:
  RunConfig config_;
  long gap_ = 0;
  double dt_ = 0.0;
  DynState state_;
  NoiseStream noise_;
};

struct WalkPath {
  std::vector<double> jump_times;   ///< time of entry into sites[k] (sites[0] entered at t0)
  std::vector<int> sites;
  std::optional<int> exit_site;     ///< dense index of the boundary site hit
  std::optional<double> exit_time;
};

struct WalkExit {
  int site = -1;                    ///< boundary site, or -1 if still inside at the horizon
  double time = 0.0;
  bool absorbed() const { return site >= 0; }
};

/// Time-inhomogeneous jump process with bond rates c_t(b), simulated by thinning: proposals
/// at total rate deg * max_rate, a uniformly chosen bond, accepted with probability
/// c_t(b) / max_rate. segment(site, t_enter, t_leave) is called for every sojourn; stop(site, t)
/// may end the walk early when it returns true (checked on every entered site).
template <class Segment, class Stop>
WalkExit walk_core(const Environment& env, int x0, double t0, double horizon, Rng& rng, Segment&& segment,
                   Stop&& stop) {
  const Domain& d = env.domain();
  require(d.is_interior(x0), "simulate_walk: start must be interior");
  const double t_end = t0 + horizon;
  require(env.is_uniform() || t_end <= env.horizon() * (1.0 + 1e-12), "simulate_walk: window exceeds environment");
  const int deg = d.degree();
  const double majorant = env.max_rate();
  const double total = majorant * deg;
  int x = x0;
  double t = t0;
  double entered = t0;
  if (stop(x, t)) return {-1, t};
  while (true) {
    t += rng.exponential(total);
    if (t >= t_end) {
      segment(x, entered, t_end);
      return {-1, t_end};
    }
    const int k = static_cast<int>(rng.below(static_cast<std::uint32_t>(deg)));
    const int bond = d.neighbor_bonds(x)[static_cast<std::size_t>(k)];
    const std::size_t step_index =
        env.is_uniform() ? 0 : std::min(static_cast<std::size_t>(t / env.dt()), env.steps() - 1);
    const double c = env.rate(step_index, bond);
    if (c < majorant && rng.uniform() * majorant >= c) continue;
    segment(x, entered, t);
    x = d.neighbors(x)[static_cast<std::size_t>(k)];
    entered = t;
    if (d.is_boundary(x)) return {x, t};
    if (stop(x, t)) return {-1, t};
  }
}

template <class Segment>
WalkExit walk_core(const Environment& env, int x0, double t0, double horizon, Rng& rng, Segment&& segment) {
  return walk_core(env, x0, t0, horizon, rng, std::forward<Segment>(segment), [](int, double) { return false; });
}

inline WalkPath simulate_walk(const Environment& env, int x0, double t0, double horizon, Rng& rng) {
  WalkPath p;
  const WalkExit e = walk_core(env, x0, t0, horizon, rng, [&](int site, double enter, double) {
    p.sites.push_back(site);
    p.jump_times.push_back(enter);
  });
  if (e.absorbed()) {
    p.exit_site = e.site;
    p.exit_time = e.time;
  }
  return p;
}

/// RNG for walk w in environment e.
inline Rng walk_rng(std::uint64_t seed, std::uint64_t stream, std::size_t env_index, std::size_t walk) {
  return Rng(seed, splitmix64(stream ^ splitmix64(env_index * 0x100000001b3ull + walk)));
}

/// Runs `walks` walks in one environment in parallel blocks and merges per-block results in
/// block order, so totals do not depend on the thread count.
template <class Acc, class PerWalk>
Acc parallel_walks(std::size_t walks, PerWalk&& per_walk, Acc init) {
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (walks + kBlock - 1) / kBlock;
  std::vector<Acc> parts(blocks, init);
  parallel_for(blocks, [&](std::size_t b) {
    for (std::size_t w = b * kBlock; w < std::min(walks, (b + 1) * kBlock); ++w) per_walk(w, parts[b]);
  });
  for (const Acc& p : parts) init += p;
  return init;
}

struct OccupationAcc {
  std::vector<double> time;
  std::size_t unabsorbed = 0;
  OccupationAcc& operator+=(const OccupationAcc& o) {
    if (time.empty()) time.assign(o.time.size(), 0.0);
    for (std::size_t i = 0; i < o.time.size(); ++i) time[i] += o.time[i];
    unabsorbed += o.unabsorbed;
    return *this;
  }
};

/// Mean occupation time of every interior site before exit, for walks from x in one environment.
inline OccupationAcc occupation_times(const Environment& env, int x, double horizon, std::size_t walks,
                                      std::uint64_t seed, std::uint64_t stream, std::size_t env_index) {
  const std::size_t n = env.domain().num_interior();
  OccupationAcc total = parallel_walks(
      walks,
      [&](std::size_t w, OccupationAcc& acc) {
        Rng rng = walk_rng(seed, stream, env_index, w);
        const WalkExit e = walk_core(env, x, 0.0, horizon, rng, [&](int site, double a, double b) {
          acc.time[static_cast<std::size_t>(site)] += b - a;
        });
        if (!e.absorbed()) ++acc.unabsorbed;
      },
      OccupationAcc{std::vector<double>(n, 0.0), 0});
  for (double& v : total.time) v /= static_cast<double>(walks);
  return total;
}

/// Generator of environment k; the ensemble is consumed sequentially.
using EnvironmentSource = std::function<Environment(std::size_t)>;

struct HsEstimate {
  Estimate estimate;
  double unabsorbed_fraction = 0.0;
  bool horizon_ok = true;   ///< fewer than 1% of walks were still inside at the horizon
};

/// Cov(h(x), h(y)) = E ∫_0^τ 1{X_s = y} ds, averaged over environments; environment-level
/// jackknife standard error.
inline HsEstimate hs_covariance(const EnvironmentSource& source, std::size_t environments, int x, int y,
                                double horizon, std::size_t walks, std::uint64_t seed,
                                std::uint64_t stream = substream("hswalk", 0)) {
  require(environments >= 2, "hs_covariance: need two environments");
  std::vector<double> per_env;
  std::size_t unabsorbed = 0;
  for (std::size_t e = 0; e < environments; ++e) {
    const Environment env = source(e);
    const auto occ = occupation_times(env, x, std::min(horizon, env.horizon()), walks, seed, stream, e);
    per_env.push_back(occ.time[static_cast<std::size_t>(y)]);
    unabsorbed += occ.unabsorbed;
  }
  HsEstimate r;
  const double total = std::accumulate(per_env.begin(), per_env.end(), 0.0);
  std::vector<double> loo;
  for (double v : per_env) loo.push_back((total - v) / static_cast<double>(per_env.size() - 1));
  r.estimate = {mean(per_env), jackknife_se(loo)};
  r.unabsorbed_fraction = static_cast<double>(unabsorbed) / static_cast<double>(environments * walks);
  r.horizon_ok = r.unabsorbed_fraction <= 0.01;
  return r;
}

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::vector<std::pair<double, double>> gauss_legendre_unit(int m) {
  require(m >= 2 && m <= 20, "gauss_legendre: supported node counts are 2..20");
  std::vector<std::pair<double, double>> out;
  auto fill = [&]<int N>(std::integral_constant<int, N>) {
    using Rule = boost::math::quadrature::gauss<double, N>;
    const auto& x = Rule::abscissa();
    const auto& w = Rule::weights();
    for (std::size_t i = 0; i < x.size(); ++i) {
      out.emplace_back(0.5 * (1.0 + x[i]), 0.5 * w[i]);
      if (x[i] != 0.0) out.emplace_back(0.5 * (1.0 - x[i]), 0.5 * w[i]);
    }
  };
  [&]<int... I>(std::integer_sequence<int, I...>) {
    ((m == I + 2 ? fill(std::integral_constant<int, I + 2>{}) : void()), ...);
  }(std::make_integer_sequence<int, 19>{});
  std::sort(out.begin(), out.end());
  return out;
}

struct HsMeanReport {
  Estimate estimate;
  std::vector<Estimate> integrand;   ///< per node E^{rψ} ψ(X_τ)
  std::vector<std::pair<double, double>> nodes;
  double unabsorbed_fraction = 0.0;
};

/// E h^ψ(x) = ∫_0^1 E^{rψ} ψ(X_τ^{rψ}) dr by Gauss-Legendre quadrature. make_source(r) returns
/// the environment generator for boundary data rψ. Unabsorbed walks contribute 0.
inline HsMeanReport hs_mean(std::span<const double> psi, int x, int nodes,
                            const std::function<EnvironmentSource(double)>& make_source,
                            std::size_t environments, double horizon, std::size_t walks, std::uint64_t seed,
                            std::uint64_t stream = substream("hsmean", 0)) {
  HsMeanReport r;
  r.nodes = gauss_legendre_unit(nodes);
  double value = 0.0, var = 0.0;
  std::size_t unabsorbed = 0, total = 0;
  for (std::size_t j = 0; j < r.nodes.size(); ++j) {
    const auto [node, weight] = r.nodes[j];
    const EnvironmentSource source = make_source(node);
    std::vector<double> per_env;
    for (std::size_t e = 0; e < environments; ++e) {
      const Environment env = source(e);
      const Domain& d = env.domain();
      struct Acc {
        double sum = 0.0;
        std::size_t unabsorbed = 0;
        Acc& operator+=(const Acc& o) {
          sum += o.sum;
          unabsorbed += o.unabsorbed;
          return *this;
        }
      };
      const Acc acc = parallel_walks(
          walks,
          [&](std::size_t w, Acc& a) {
            Rng rng = walk_rng(seed, splitmix64(stream + j), e, w);
            const WalkExit ex = walk_core(env, x, 0.0, std::min(horizon, env.horizon()), rng, [](int, double, double) {});
            if (ex.absorbed()) a.sum += psi[static_cast<std::size_t>(ex.site) - d.num_interior()];
            else ++a.unabsorbed;
          },
          Acc{});
      per_env.push_back(acc.sum / static_cast<double>(walks));
      unabsorbed += acc.unabsorbed;
      total += walks;
    }
    const Estimate ij = per_env.size() >= 2 ? mean_estimate(per_env) : Estimate{per_env[0], 0.0};
    r.integrand.push_back(ij);
    value += weight * ij.value;
    var += weight * weight * ij.se * ij.se;
  }
  r.estimate = {value, std::sqrt(var)};
  r.unabsorbed_fraction = static_cast<double>(unabsorbed) / static_cast<double>(std::max<std::size_t>(1, total));
  return r;
}

inline double total_variation(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), "total_variation: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

struct ExitLawReport {
  std::vector<double> empirical;   ///< indexed like domain.boundary()
  std::vector<double> reference;   ///< harmonic measure
  std::size_t walks = 0;
  std::size_t unabsorbed = 0;
  double tv = 0.0;
  double null_mean = 0.0;          ///< E TV of n multinomial draws from the reference
  double null_sd = 0.0;
  double null_quantile = 0.0;      ///< 99.9% point of the null TV
  double excess = 0.0;             ///< tv - null_mean: noise-floor corrected distance
  bool within_null = true;         ///< tv <= null_quantile
};

/// TV of n multinomial draws from p against p, by simulation.
inline std::vector<double> null_tv_distribution(std::span<const double> p, std::size_t n, std::size_t reps,
                                                std::uint64_t seed) {
  std::vector<double> cdf(p.size());
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  std::vector<double> tvs(reps);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng(seed, splitmix64(0x7f4a7c15ull + r));
    std::vector<double> counts(p.size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double u = rng.uniform() * cdf.back();
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      counts[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), p.size() - 1)] += 1.0;
    }
    for (double& c : counts) c /= static_cast<double>(n);
    tvs[r] = total_variation(counts, p);
  });
  return tvs;
}

/// Empirical exit distribution from x0 over an environment ensemble, compared with the simple
/// random walk harmonic measure.
inline ExitLawReport exit_law(const EnvironmentSource& source, std::size_t environments, int x0, double horizon,
                              std::size_t walks_per_env, std::uint64_t seed,
                              std::uint64_t stream = substream("exitlaw", 0), std::size_t null_reps = 400) {
  ExitLawReport r;
  std::vector<double> counts;
  LaplacianSolver const* solver_ptr = nullptr;
  std::unique_ptr<LaplacianSolver> solver;
  for (std::size_t e = 0; e < environments; ++e) {
    const Environment env = source(e);
    const Domain& d = env.domain();
    if (!solver) {
      solver = std::make_unique<LaplacianSolver>(env.domain_ptr());
      solver_ptr = solver.get();
      counts.assign(d.num_boundary(), 0.0);
    }
    struct Acc {
      std::vector<double> c;
      std::size_t unabsorbed = 0;
      Acc& operator+=(const Acc& o) {
        if (c.empty()) c.assign(o.c.size(), 0.0);
        for (std::size_t i = 0; i < o.c.size(); ++i) c[i] += o.c[i];
        unabsorbed += o.unabsorbed;
        return *this;
      }
    };
    const Acc acc = parallel_walks(
        walks_per_env,
        [&](std::size_t w, Acc& a) {
          if (a.c.empty()) a.c.assign(d.num_boundary(), 0.0);
          Rng rng = walk_rng(seed, stream, e, w);
          const WalkExit ex = walk_core(env, x0, 0.0, std::min(horizon, env.horizon()), rng, [](int, double, double) {});
          if (ex.absorbed()) a.c[static_cast<std::size_t>(ex.site) - d.num_interior()] += 1.0;
          else ++a.unabsorbed;
        },
        Acc{});
    for (std::size_t i = 0; i < acc.c.size(); ++i) counts[i] += acc.c[i];
    r.unabsorbed += acc.unabsorbed;
    r.walks += walks_per_env;
  }
  const double absorbed = static_cast<double>(r.walks - r.unabsorbed);
  require(absorbed > 0, "exit_law: no walk was absorbed");
  r.empirical = counts;
  for (double& v : r.empirical) v /= absorbed;
  r.reference = harmonic_measure(*solver_ptr, x0);
  r.tv = total_variation(r.empirical, r.reference);
  auto null = null_tv_distribution(r.reference, static_cast<std::size_t>(absorbed), null_reps, seed ^ 0x5eedull);
  r.null_mean = mean(null);
  r.null_sd = std::sqrt(variance(null));
  std::sort(null.begin(), null.end());
  r.null_quantile = null[std::min(null.size() - 1, static_cast<std::size_t>(0.999 * static_cast<double>(null.size())))];
  r.excess = r.tv - r.null_mean;
  r.within_null = r.tv <= r.null_quantile;
  return r;
}

struct HeatKernelReport {
  double c_hat = 0.0;        ///< max p̂ (1∨τ) exp(|x-y| / (1∨√τ)) over populated bins
  double delta_hat = kInf;   ///< min p̂ (1∨τ) over bins with |x-y| <= √τ
  double t_max = 0.0;
  std::size_t bins = 0;
};

/// Transition probabilities p̂(0, τ; x0, y) from walks started at x0 at time 0, on the time
/// grid τ_j = j t_max / n_times (j = 1..n_times). Killed walks count as absent. Bins with
/// fewer than min_hits hits are skipped.
inline HeatKernelReport heat_kernel_envelope(const EnvironmentSource& source, std::size_t environments, int x0,
                                             double t_max, int n_times, std::size_t walks_per_env,
                                             std::uint64_t seed, std::uint64_t stream = substream("heatkernel", 0),
                                             std::size_t min_hits = 30) {
  require(n_times >= 1 && t_max > 0.0, "heat_kernel_envelope: bad time grid");
  std::vector<double> taus;
  for (int j = 1; j <= n_times; ++j) taus.push_back(t_max * j / n_times);
  std::map<std::pair<int, int>, double> hits;   // (time index, site) -> count
  std::size_t total = 0;
  const Domain* dom = nullptr;
  for (std::size_t e = 0; e < environments; ++e) {
    const Environment env = source(e);
    dom = &env.domain();
    using Hits = std::map<std::pair<int, int>, double>;
    struct Acc {
      Hits h;
      Acc& operator+=(const Acc& o) {
        for (const auto& [k, v] : o.h) h[k] += v;
        return *this;
      }
    };
    const Acc acc = parallel_walks(
        walks_per_env,
        [&](std::size_t w, Acc& a) {
          Rng rng = walk_rng(seed, stream, e, w);
          std::size_t next = 0;
          walk_core(env, x0, 0.0, t_max * (1.0 + 1e-12), rng, [&](int site, double enter, double leave) {
            while (next < taus.size() && taus[next] >= enter && taus[next] < leave) {
              a.h[{static_cast<int>(next), site}] += 1.0;
              ++next;
            }
          });
        },
        Acc{});
    for (const auto& [k, v] : acc.h) hits[k] += v;
    total += walks_per_env;
  }
  HeatKernelReport r;
  r.t_max = t_max;
  const Site origin = dom->site(x0);
  for (const auto& [key, count] : hits) {
    if (count < static_cast<double>(min_hits)) continue;
    const double tau = taus[static_cast<std::size_t>(key.first)];
    const Site y = dom->site(key.second);
    const double dist = std::hypot(y.x - origin.x, y.y - origin.y);
    const double scaled = count / static_cast<double>(total) * std::max(1.0, tau);
    r.c_hat = std::max(r.c_hat, scaled * std::exp(dist / std::max(1.0, std::sqrt(tau))));
    if (dist <= std::sqrt(tau)) r.delta_hat = std::min(r.delta_hat, scaled);
    ++r.bins;
  }
  // the diagonal bin lies in the lower-bound region at every τ; if it is unpopulated no
  // positive lower bound was observed
  for (std::size_t j = 0; j < taus.size(); ++j) {
    const auto it = hits.find({static_cast<int>(j), x0});
    if (it == hits.end() || it->second < static_cast<double>(min_hits)) r.delta_hat = 0.0;
  }
  if (r.delta_hat == kInf) r.delta_hat = 0.0;
  return r;
}

struct HittingReport {
  Estimate probability;
  double constant = 0.0;     ///< probability · R² / |A|
  std::size_t walks = 0;
};

/// P[τ_A <= τ_R]: walks from x0 stop on entering A (success) or on reaching Euclidean
/// distance >= R from x0 or the domain boundary (failure).
inline HittingReport hitting_lower_bound(const EnvironmentSource& source, std::size_t environments, int x0,
                                         std::span<const Site> targets, double R, double horizon,
                                         std::size_t walks_per_env, std::uint64_t seed,
                                         std::uint64_t stream = substream("hitting", 0)) {
  require(!targets.empty(), "hitting_lower_bound: empty target set");
  std::vector<double> per_env;
  HittingReport r;
  for (std::size_t e = 0; e < environments; ++e) {
    const Environment env = source(e);
    const Domain& d = env.domain();
    const Site origin = d.site(x0);
    std::vector<char> is_target(d.num_sites(), 0);
    for (const Site& s : targets) {
      const int i = d.index_of(s);
      require(i >= 0 && d.is_interior(i), "hitting_lower_bound: target outside the interior");
      require(std::hypot(s.x - origin.x, s.y - origin.y) <= 0.75 * R, "hitting_lower_bound: target beyond 3R/4");
      is_target[static_cast<std::size_t>(i)] = 1;
    }
    struct Acc {
      double hits = 0.0;
      Acc& operator+=(const Acc& o) {
        hits += o.hits;
        return *this;
      }
    };
    const Acc acc = parallel_walks(
        walks_per_env,
        [&](std::size_t w, Acc& a) {
          Rng rng = walk_rng(seed, stream, e, w);
          bool hit = false;
          walk_core(env, x0, 0.0, std::min(horizon, env.horizon()), rng, [](int, double, double) {},
                    [&](int site, double) {
                      if (is_target[static_cast<std::size_t>(site)]) return hit = true;
                      const Site s = d.site(site);
                      return std::hypot(s.x - origin.x, s.y - origin.y) >= R;
                    });
          if (hit) a.hits += 1.0;
        },
        Acc{});
    per_env.push_back(acc.hits / static_cast<double>(walks_per_env));
    r.walks += walks_per_env;
  }
  r.probability = per_env.size() >= 2 ? mean_estimate(per_env) : Estimate{per_env[0], 0.0};
  r.constant = r.probability.value * R * R / static_cast<double>(targets.size());
  return r;
}

// Binary environment format: "glenv v1\n", domain JSON line, "dt K\n", then K rows of
// float32 conductances in canonical bond order (native byte order, little-endian on x86).

inline void write_environment(std::ostream& os, const Environment& env) {
  require(!env.is_uniform(), "write_environment: uniform environments have no rows");
  os << "glenv v1\n" << to_json(env.domain()).dump() << '\n';
  os.precision(17);
  os << env.dt() << ' ' << env.steps() << '\n';
  const auto rows = env.rows();
  os.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(float)));
  if (!os) throw RuntimeError("write_environment: write failed");
}

inline Environment read_environment(std::istream& is) {
  std::string line;
  std::getline(is, line);
  if (line != "glenv v1") throw InvalidArgument("read_environment: bad header");
  std::getline(is, line);
  const auto domain = share(domain_from_json(nlohmann::json::parse(line)));
  double dt = 0.0;
  std::size_t steps = 0;
  is >> dt >> steps;
  is.get();
  std::vector<float> rows(steps * domain->bonds().size());
  is.read(reinterpret_cast<char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(float)));
  if (!is) throw InvalidArgument("read_environment: truncated file");
  return Environment::from_rows(domain, dt, std::move(rows));
}

}  // namespace glsim
