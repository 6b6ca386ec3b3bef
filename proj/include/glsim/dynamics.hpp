#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "glsim/gff.hpp"
#include "glsim/harmonic.hpp"
#include "glsim/parallel.hpp"
#include "glsim/potential.hpp"
#include "glsim/rng.hpp"
#include "glsim/stats.hpp"

namespace glsim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Per-interior-site barriers a(x) <= h(x) <= b(x).
struct Bands {
  std::vector<double> lower;
  std::vector<double> upper;

  static Bands free(std::size_t n) { return {std::vector<double>(n, -kInf), std::vector<double>(n, kInf)}; }
  static Bands positive(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, kInf)}; }

  bool unconstrained(std::size_t i) const { return lower[i] == -kInf && upper[i] == kInf; }

  void validate(std::size_t n) const {
    require(lower.size() == n && upper.size() == n, "bands: size does not match interior");
    for (std::size_t i = 0; i < n; ++i) require(lower[i] <= upper[i], "bands: lower exceeds upper");
  }
};

/// Height field with fixed boundary data, barriers and local-time accumulators.
struct DynState {
  Field field;
  Potential potential = Potential::quadratic();
  Bands bands;
  std::vector<double> local_a;
  std::vector<double> local_b;
  double time = 0.0;
  std::uint64_t step = 0;
  std::vector<double> scratch;
  std::vector<double> flux;    ///< V'(∇h(b)) per bond, refreshed at the start of each step
  std::vector<double> noise;   ///< increments of the current step

  DynState() = default;
  DynState(Field f, Potential p, Bands b)
      : field(std::move(f)), potential(std::move(p)), bands(std::move(b)) {
    const std::size_t n = field.domain().num_interior();
    bands.validate(n);
    local_a.assign(n, 0.0);
    local_b.assign(n, 0.0);
    scratch.assign(n, 0.0);
  }

  const Domain& domain() const { return field.domain(); }
};

/// Harmonic extension of psi clamped into the bands.
inline Field default_start(const LaplacianSolver& solver, std::span<const double> psi, const Bands& bands) {
  Field f = solver.harmonic_extension(psi);
  for (std::size_t i = 0; i < bands.lower.size(); ++i)
    f[static_cast<int>(i)] = std::clamp(f[static_cast<int>(i)], bands.lower[i], bands.upper[i]);
  return f;
}

/// Σ_{y~x} V'(h(y) - h(x)), boundary neighbours taking their ψ value.
template <class V>
double drift_with(const V& v, const Field& f, int i) {
  double acc = 0.0;
  const double hx = f[i];
  for (int j : f.domain().neighbors(i)) acc += v.d1(f[j] - hx);
  return acc;
}

inline double drift(const DynState& s, int i) {
  return s.potential.visit([&](const auto& v) { return drift_with(v, s.field, i); });
}

inline double max_stable_dt(const Potential& p) { return 1.0 / (4.0 * p.A()); }

inline void check_dt(double dt, const Potential& p) {
  require(dt > 0.0, "dt must be positive");
  require(dt <= max_stable_dt(p) * (1.0 + 1e-12), "dt exceeds the stability bound 1/(4 A)");
}

/// V'(∇h(b)) for every bond of the current field.
inline void compute_flux(DynState& s) {
  const auto& bonds = s.domain().bonds();
  s.flux.resize(bonds.size());
  s.potential.visit([&](const auto& v) {
    for (std::size_t b = 0; b < bonds.size(); ++b) s.flux[b] = v.d1(s.field.gradient(bonds[b]));
  });
}

/// drift() from the stored fluxes. V' is odd, so the sum is the same bit for bit.
inline double flux_drift(const DynState& s, int i) {
  const Domain& d = s.domain();
  double acc = 0.0;
  for (int b : d.neighbor_bonds(i)) {
    const double f = s.flux[static_cast<std::size_t>(b)];
    acc += d.bonds()[static_cast<std::size_t>(b)].from_index == i ? f : -f;
  }
  return acc;
}

/// Step using fluxes already computed for the current field.
template <class Noise>
void step_from_flux(DynState& s, double dt, Noise&& noise) {
  const int n = static_cast<int>(s.domain().num_interior());
  const double amp = std::sqrt(2.0 * dt);
  for (int i = 0; i < n; ++i) s.scratch[static_cast<std::size_t>(i)] = s.field[i] + dt * flux_drift(s, i) + amp * noise(i);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double u = s.scratch[k];
    if (!std::isfinite(u)) throw RuntimeError("dynamics: non-finite height at step " + std::to_string(s.step));
    const double lo = s.bands.lower[k], hi = s.bands.upper[k];
    double h = u;
    if (u < lo) {
      s.local_a[k] += lo - u;
      h = lo;
    } else if (u > hi) {
      s.local_b[k] += u - hi;
      h = hi;
    }
    s.field[i] = h;
  }
  s.time += dt;
  ++s.step;
}

/// One synchronous Euler-Maruyama step with coordinatewise clamping. noise(i) supplies the
/// standard normal for interior site i at the current step.
template <class Noise>
void step_with(DynState& s, double dt, Noise&& noise) {
  compute_flux(s);
  step_from_flux(s, dt, std::forward<Noise>(noise));
}

/// Increments of sites 0..n-1 at `step`, drawn a Box-Muller pair at a time.
inline void fill_noise(const NoiseStream& noise, std::uint64_t step, std::size_t n, std::vector<double>& out) {
  out.resize(n);
  for (std::size_t p = 0; 2 * p < n; ++p) {
    const auto z = noise.pair(p, step);
    out[2 * p] = z[0];
    if (2 * p + 1 < n) out[2 * p + 1] = z[1];
  }
}

inline void step(DynState& s, double dt, const NoiseStream& noise) {
  check_dt(dt, s.potential);
  fill_noise(noise, s.step, s.domain().num_interior(), s.noise);
  step_with(s, dt, [&](int i) { return s.noise[static_cast<std::size_t>(i)]; });
}

/// Heat flow with the noise switched off.
inline void step_deterministic(DynState& s, double dt) {
  check_dt(dt, s.potential);
  step_with(s, dt, [](int) { return 0.0; });
}

inline double field_sum(const Field& f) {
  double acc = 0.0;
  for (double v : f.interior()) acc += v;
  return acc;
}

struct RunConfig {
  DomainPtr domain;
  Potential potential = Potential::quadratic();
  std::vector<double> psi;             ///< boundary data, empty = zero
  std::optional<Bands> bands;          ///< default unconstrained
  double dt = 0.0;                     ///< 0 = 0.1 / A
  long burnin = -1;                    ///< < 0 = automatic (20 tau, at least 1000)
  std::size_t samples = 1000;          ///< total over chains
  long thin = -1;                      ///< < 0 = automatic (ceil tau)
  int chains = 2;
  std::uint64_t seed = 0;
  std::uint64_t stream = substream("langevin", 0);
  std::optional<Field> start;          ///< default: harmonic extension clamped into bands
};

struct RunDiagnostics {
  double tau = 0.0;       ///< integrated autocorrelation time of Σh, in steps
  double rhat = 1.0;      ///< across chains, on Σh at the sampled times
  long burnin = 0;
  long thin = 0;
  double dt = 0.0;
};

struct RunResult {
  SampleBatch batch;      ///< chain-major: samples of chain 0 first
  RunDiagnostics diagnostics;
  std::vector<std::vector<double>> sums;   ///< Σh per sample, per chain
};

inline std::vector<double> resolved_psi(const RunConfig& c) {
  if (c.psi.empty()) return std::vector<double>(c.domain->num_boundary(), 0.0);
  require(c.psi.size() == c.domain->num_boundary(), "run: psi size does not match boundary");
  return c.psi;
}

inline Bands resolved_bands(const RunConfig& c) {
  return c.bands ? *c.bands : Bands::free(c.domain->num_interior());
}

inline double resolved_dt(const RunConfig& c) { return c.dt > 0.0 ? c.dt : 0.1 / c.potential.A(); }

inline DynState initial_state(const RunConfig& c, const LaplacianSolver& solver) {
  const auto psi = resolved_psi(c);
  const Bands bands = resolved_bands(c);
  Field f = c.start ? *c.start : default_start(solver, psi, bands);
  require(f.domain().num_sites() == c.domain->num_sites(), "run: start field on a different domain");
  return DynState(Field(c.domain, {f.values().begin(), f.values().end()}), c.potential, bands);
}

/// Pilot estimate of the autocorrelation time of Σh in steps: 1000 warm-up steps then 5000
/// measured steps on a dedicated stream.
inline double pilot_tau(const RunConfig& c, const LaplacianSolver& solver) {
  DynState s = initial_state(c, solver);
  const double dt = resolved_dt(c);
  const NoiseStream noise(c.seed, splitmix64(c.stream ^ 0x9107ull));
  for (int k = 0; k < 1000; ++k) step(s, dt, noise);
  std::vector<double> series;
  for (int k = 0; k < 5000; ++k) {
    step(s, dt, noise);
    series.push_back(field_sum(s.field));
  }
  return autocorrelation_time(series);
}

/// Streams stationary samples to sink(chain, index, field) in chain-major order per chain.
/// Chains run in parallel on disjoint streams; the sink must be thread-safe across chains.
template <class Sink>
RunDiagnostics run_streaming(const RunConfig& c, Sink&& sink) {
  require(c.domain && !c.domain->empty(), "run: empty domain");
  require(c.chains >= 1, "run: need a chain");
  require(c.samples >= static_cast<std::size_t>(c.chains), "run: fewer samples than chains");
  const LaplacianSolver solver(c.domain);
  RunDiagnostics diag;
  diag.dt = resolved_dt(c);
  check_dt(diag.dt, c.potential);
  if (c.burnin < 0 || c.thin < 0) diag.tau = pilot_tau(c, solver);
  diag.burnin = c.burnin >= 0 ? c.burnin : std::max<long>(1000, static_cast<long>(std::ceil(20.0 * diag.tau)));
  diag.thin = c.thin >= 1 ? c.thin : std::max<long>(1, static_cast<long>(std::ceil(diag.tau)));
  const std::size_t per_chain = c.samples / static_cast<std::size_t>(c.chains);
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(c.chains));
  parallel_for(static_cast<std::size_t>(c.chains), [&](std::size_t ch) {
    DynState s = initial_state(c, solver);
    const NoiseStream noise(c.seed, splitmix64(c.stream + ch));
    for (long k = 0; k < diag.burnin; ++k) step(s, diag.dt, noise);
    for (std::size_t m = 0; m < per_chain; ++m) {
      for (long k = 0; k < diag.thin; ++k) step(s, diag.dt, noise);
      sums[ch].push_back(field_sum(s.field));
      sink(ch, m, s.field);
    }
  });
  if (c.chains >= 2 && per_chain >= 2) diag.rhat = rhat(sums);
  if (c.burnin >= 0 && c.thin >= 0 && per_chain >= 8) diag.tau = autocorrelation_time(sums[0]) * diag.thin;
  return diag;
}

inline RunResult run(const RunConfig& c) {
  RunResult r;
  const std::size_t per_chain = c.samples / static_cast<std::size_t>(std::max(1, c.chains));
  r.batch.domain = c.domain;
  r.batch.seed = c.seed;
  r.batch.stream = c.stream;
  r.batch.meta = "langevin " + c.potential.name();
  r.batch.fields.resize(per_chain * static_cast<std::size_t>(std::max(1, c.chains)));
  r.diagnostics = run_streaming(c, [&](std::size_t ch, std::size_t m, const Field& f) {
    r.batch.fields[ch * per_chain + m] = f;
  });
  r.sums.resize(static_cast<std::size_t>(c.chains));
  for (std::size_t ch = 0; ch < r.sums.size(); ++ch)
    for (std::size_t m = 0; m < per_chain; ++m) r.sums[ch].push_back(field_sum(r.batch.fields[ch * per_chain + m]));
  return r;
}

/// Σ_{b∋x} V'(∇h(b)) with bonds oriented away from x, evaluated on each sample.
inline std::vector<double> flow_series(const SampleBatch& batch, const Potential& potential, int x) {
  std::vector<double> out;
  out.reserve(batch.count());
  potential.visit([&](const auto& v) {
    for (const Field& f : batch.fields) out.push_back(drift_with(v, f, x));
  });
  return out;
}

/// Batch-means estimate of E Σ_{b∋x} V'(∇h(b)); stationarity makes it zero.
inline Estimate flow_balance(const SampleBatch& batch, const Potential& potential, int x,
                             const Bands* bands = nullptr) {
  require(batch.domain->is_interior(x), "flow_balance: site must be interior");
  if (bands) require(bands->unconstrained(static_cast<std::size_t>(x)), "flow_balance: site is conditioned");
  const auto series = flow_series(batch, potential, x);
  return series_estimate(series);
}

}  // namespace glsim
