#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "glsim/dynamics.hpp"
#include "glsim/harmonic.hpp"
#include "glsim/stats.hpp"

namespace glsim {

/// Two chains on one domain and potential, boundary data ψ (a) and ψ̃ (b), same bands.
struct CoupledState {
  DynState a;
  DynState b;

  const Domain& domain() const { return a.domain(); }
};

/// Per-step quantities measured on the pre-step difference h̄ = h_a - h_b.
struct StepRecord {
  double time = 0.0;
  double dt = 0.0;
  double sum_sq_before = 0.0;   ///< Σ_x h̄²
  double sum_sq_after = 0.0;
  double dirichlet = 0.0;       ///< Σ_{b∈D*} |∇h̄(b)|²
  double boundary_flux = 0.0;   ///< Σ_{b∈∂D*} |ψ̄(z_b)| |∇h̄(b)|
  double drift_sq = 0.0;        ///< Σ_x (drift_a - drift_b)²
  double min_diff = 0.0;        ///< min_x h̄ after the step
  double c_min = 0.0;           ///< extreme secant conductances over D*
  double c_max = 0.0;
  /// Floating-point floor for Σh̄²: n (8 ε scale)², scale = largest |u| entering the step.
  double rounding = 0.0;
  bool bands_ok = true;

  /// Site-level floor, 8 ε scale.
  double site_rounding(std::size_t n) const { return n ? std::sqrt(rounding / static_cast<double>(n)) : 0.0; }
};

/// Secant conductance [V'(g) - V'(g̃)] / (g - g̃), with V'' at the midpoint when the two
/// gradients (nearly) coincide.
inline double secant_conductance(const Potential& p, double g, double g_tilde) {
  const double diff = g - g_tilde;
  if (std::abs(diff) < 1e-6) return p.d2(0.5 * (g + g_tilde));
  return (p.d1(g) - p.d1(g_tilde)) / diff;
}

inline double difference_sum_sq(const CoupledState& cs) {
  double acc = 0.0;
  for (std::size_t i = 0; i < cs.domain().num_interior(); ++i) {
    const double d = cs.a.field[static_cast<int>(i)] - cs.b.field[static_cast<int>(i)];
    acc += d * d;
  }
  return acc;
}

inline bool within_bands(const DynState& s) {
  for (std::size_t i = 0; i < s.bands.lower.size(); ++i) {
    const double h = s.field[static_cast<int>(i)];
    if (!(s.bands.lower[i] <= h && h <= s.bands.upper[i])) return false;
  }
  return true;
}

/// Advances both chains one step. noise_a drives chain a and noise_b chain b; passing the
/// same stream gives the synchronous coupling.
inline void step_coupled(CoupledState& cs, double dt, const NoiseStream& noise_a, const NoiseStream& noise_b,
                         StepRecord* record = nullptr) {
  const Domain& d = cs.domain();
  check_dt(dt, cs.a.potential);
  compute_flux(cs.a);
  compute_flux(cs.b);
  if (record) {
    StepRecord& r = *record;
    r = StepRecord{};
    r.time = cs.a.time;
    r.dt = dt;
    r.sum_sq_before = difference_sum_sq(cs);
    r.c_min = kInf;
    r.c_max = -kInf;
    const auto& bb = d.boundary_bonds();
    std::size_t next_boundary = 0;
    for (std::size_t k = 0; k < d.bonds().size(); ++k) {
      const Bond& bond = d.bonds()[k];
      const double g = cs.a.field.gradient(bond);
      const double gt = cs.b.field.gradient(bond);
      const double gbar = g - gt;
      r.dirichlet += gbar * gbar;
      // secant_conductance, reusing the stored V'(g) and V'(g̃)
      const double c = std::abs(gbar) < 1e-6 ? cs.a.potential.d2(0.5 * (g + gt)) : (cs.a.flux[k] - cs.b.flux[k]) / gbar;
      r.c_min = std::min(r.c_min, c);
      r.c_max = std::max(r.c_max, c);
      if (next_boundary < bb.size() && bb[next_boundary] == static_cast<int>(k)) {
        ++next_boundary;
        const int outer = d.is_boundary(bond.from_index) ? bond.from_index : bond.to_index;
        r.boundary_flux += std::abs(cs.a.field[outer] - cs.b.field[outer]) * std::abs(gbar);
      }
    }
    for (int i = 0; i < static_cast<int>(d.num_interior()); ++i) {
      const double dd = flux_drift(cs.a, i) - flux_drift(cs.b, i);
      r.drift_sq += dd * dd;
    }
  }
  double scale = 0.0;
  if (record)
    for (std::size_t i = 0; i < d.num_interior(); ++i)
      scale = std::max({scale, std::abs(cs.a.field[static_cast<int>(i)]), std::abs(cs.b.field[static_cast<int>(i)])});
  const std::size_t n = d.num_interior();
  fill_noise(noise_a, cs.a.step, n, cs.a.noise);
  const bool shared = noise_a.seed() == noise_b.seed() && noise_a.stream() == noise_b.stream() && cs.a.step == cs.b.step;
  if (shared)
    cs.b.noise = cs.a.noise;
  else
    fill_noise(noise_b, cs.b.step, n, cs.b.noise);
  step_from_flux(cs.a, dt, [&](int i) { return cs.a.noise[static_cast<std::size_t>(i)]; });
  step_from_flux(cs.b, dt, [&](int i) { return cs.b.noise[static_cast<std::size_t>(i)]; });
  if (record) {
    StepRecord& r = *record;
    for (std::size_t i = 0; i < d.num_interior(); ++i)
      scale = std::max({scale, std::abs(cs.a.field[static_cast<int>(i)]), std::abs(cs.b.field[static_cast<int>(i)])});
    // u = h + dt drift + noise: drift and noise terms are bounded by a few multiples of the field scale
    // plus the noise amplitude, absorbed in the factor below
    const double floor_site = 8.0 * std::numeric_limits<double>::epsilon() * (scale + 1.0);
    r.rounding = static_cast<double>(d.num_interior()) * floor_site * floor_site;
    r.sum_sq_after = difference_sum_sq(cs);
    r.min_diff = kInf;
    for (std::size_t i = 0; i < d.num_interior(); ++i)
      r.min_diff = std::min(r.min_diff, cs.a.field[static_cast<int>(i)] - cs.b.field[static_cast<int>(i)]);
    r.bands_ok = within_bands(cs.a) && within_bands(cs.b);
  }
}

inline void step_coupled(CoupledState& cs, double dt, const NoiseStream& noise, StepRecord* record = nullptr) {
  step_coupled(cs, dt, noise, noise, record);
}

struct EnergyReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool violated = false;
};

/// Discrete energy inequality over records [s, t):
///   Σh̄_T² + 2a Σ dt Σ_{D*}|∇h̄|²  <=  Σh̄_S² + 2A Σ dt Σ_{∂D*}|ψ̄||∇h̄| + Σ dt² Σ_x D(x)².
/// In the quadratic case with ψ̄ = 0 it is an equality, so a relative rounding tolerance
/// of 1e-10 plus the recorded per-step floors is allowed.
inline EnergyReport energy_ledger(std::span<const StepRecord> records, std::size_t s, std::size_t t, double a,
                                  double A) {
  require(s < t && t <= records.size(), "energy_ledger: need S < T within the record");
  EnergyReport r;
  double dirichlet = 0.0, flux = 0.0, rounding = 0.0;
  for (std::size_t k = s; k < t; ++k) {
    rounding += records[k].rounding;
    dirichlet += records[k].dt * records[k].dirichlet;
    flux += records[k].dt * records[k].boundary_flux;
    r.slack += records[k].dt * records[k].dt * records[k].drift_sq;
  }
  r.lhs = records[t - 1].sum_sq_after + 2.0 * a * dirichlet;
  r.rhs = records[s].sum_sq_before + 2.0 * A * flux;
  r.violated = r.lhs > (r.rhs + r.slack) * (1.0 + 1e-10) + rounding;
  return r;
}

inline EnergyReport energy_ledger(std::span<const StepRecord> records, const Potential& p) {
  return energy_ledger(records, 0, records.size(), p.a(), p.A());
}

inline void write_ledger_csv(std::ostream& os, std::span<const StepRecord> records) {
  os << "t,sumSq,dirichlet,boundaryFlux,slack\n";
  for (const StepRecord& r : records)
    os << r.time << ',' << r.sum_sq_before << ',' << r.dirichlet << ',' << r.boundary_flux << ','
       << r.dt * r.dt * r.drift_sq << '\n';
}

/// Checks ψ_a >= ψ_b, equal bands and h_a >= h_b at the start.
inline bool domination_precondition(const CoupledState& cs) {
  for (std::size_t i = 0; i < cs.domain().num_sites(); ++i)
    if (cs.a.field[static_cast<int>(i)] < cs.b.field[static_cast<int>(i)]) return false;
  return cs.a.bands.lower == cs.b.bands.lower && cs.a.bands.upper == cs.b.bands.upper;
}

/// First record index with h_a < h_b somewhere, or nothing. No tolerance.
inline std::optional<std::size_t> domination_monitor(std::span<const StepRecord> records) {
  for (std::size_t k = 0; k < records.size(); ++k)
    if (records[k].min_diff < 0.0) return k;
  return std::nullopt;
}

/// Exact per-step properties of a coupled trajectory.
struct PathwiseCheck {
  bool bands = true;
  bool contraction = true;    ///< only meaningful for equal boundary data
  bool order = true;          ///< only meaningful when the domination precondition holds
  bool conductance = true;
  bool energy = true;
  std::size_t steps = 0;
};

inline PathwiseCheck check_records(std::span<const StepRecord> records, const Potential& p) {
  PathwiseCheck c;
  c.steps = records.size();
  for (const StepRecord& r : records) {
    c.bands = c.bands && r.bands_ok;
    c.contraction = c.contraction && r.sum_sq_after <= r.sum_sq_before * (1.0 + 1e-12) + r.rounding;
    c.order = c.order && r.min_diff >= 0.0;
    // secant quotients carry rounding of order 1e-15 |V'| / 1e-6
    c.conductance = c.conductance && r.c_min >= p.a() * (1.0 - 1e-9) && r.c_max <= p.A() * (1.0 + 1e-9);
  }
  if (!records.empty()) c.energy = !energy_ledger(records, p).violated;
  return c;
}

struct CoupledConfig {
  DomainPtr domain;
  Potential potential = Potential::quadratic();
  std::vector<double> psi_a;     ///< empty = zero
  std::vector<double> psi_b;
  std::optional<Bands> bands;
  double dt = 0.0;               ///< 0 = 0.1 / A
  long burnin = -1;              ///< < 0 = automatic
  std::size_t samples = 1000;    ///< total over pairs
  long thin = -1;
  int chains = 2;                ///< independent coupled pairs
  std::uint64_t seed = 0;
  std::uint64_t stream = substream("couple", 0);
  bool shared_noise = true;
};

struct CoupledRunResult {
  SampleBatch difference;        ///< h̄ samples, pair-major
  SampleBatch first;             ///< h_a samples
  RunDiagnostics diagnostics;
};

/// Stationary samples of the coupled pair. Both chains start from their own harmonic
/// extensions; the shared noise contracts their difference toward the stationary coupling.
inline CoupledRunResult run_coupled(const CoupledConfig& c) {
  require(c.chains >= 1, "run_coupled: need a pair");
  RunConfig base;
  base.domain = c.domain;
  base.potential = c.potential;
  base.psi = c.psi_a;
  base.bands = c.bands;
  base.dt = c.dt;
  base.burnin = c.burnin;
  base.thin = c.thin;
  base.seed = c.seed;
  base.stream = c.stream;
  const LaplacianSolver solver(c.domain);
  RunDiagnostics diag;
  diag.dt = resolved_dt(base);
  if (c.burnin < 0 || c.thin < 0) diag.tau = pilot_tau(base, solver);
  diag.burnin = c.burnin >= 0 ? c.burnin : std::max<long>(1000, static_cast<long>(std::ceil(20.0 * diag.tau)));
  diag.thin = c.thin >= 1 ? c.thin : std::max<long>(1, static_cast<long>(std::ceil(diag.tau)));
  RunConfig cfg_b = base;
  cfg_b.psi = c.psi_b;
  const std::size_t per = c.samples / static_cast<std::size_t>(c.chains);
  CoupledRunResult out;
  out.difference.domain = out.first.domain = c.domain;
  out.difference.seed = out.first.seed = c.seed;
  out.difference.fields.resize(per * static_cast<std::size_t>(c.chains));
  out.first.fields.resize(out.difference.fields.size());
  std::vector<std::vector<double>> sums(static_cast<std::size_t>(c.chains));
  parallel_for(static_cast<std::size_t>(c.chains), [&](std::size_t ch) {
    CoupledState cs{initial_state(base, solver), initial_state(cfg_b, solver)};
    const NoiseStream na(c.seed, splitmix64(c.stream + ch));
    const NoiseStream nb = c.shared_noise ? na : NoiseStream(c.seed, splitmix64(c.stream + ch) ^ 0xb0b0ull);
    for (long k = 0; k < diag.burnin; ++k) step_coupled(cs, diag.dt, na, nb);
    for (std::size_t m = 0; m < per; ++m) {
      for (long k = 0; k < diag.thin; ++k) step_coupled(cs, diag.dt, na, nb);
      Field diff(c.domain);
      for (std::size_t i = 0; i < c.domain->num_sites(); ++i)
        diff[static_cast<int>(i)] = cs.a.field[static_cast<int>(i)] - cs.b.field[static_cast<int>(i)];
      sums[ch].push_back(field_sum(diff));
      out.difference.fields[ch * per + m] = std::move(diff);
      out.first.fields[ch * per + m] = cs.a.field;
    }
  });
  if (c.chains >= 2 && per >= 2) diag.rhat = rhat(sums);
  out.diagnostics = diag;
  return out;
}

struct ProfileEntry {
  int radius = 0;
  Estimate eroded;    ///< Σ over bonds with level > radius of E|∇h̄|²
  Estimate annulus;   ///< the part with level in (radius, next radius]
};

/// Sums of E|∇h̄(b)|² over the bonds of the eroded domains D(r) and over the annuli between
/// consecutive radii. A bond's level is the larger depth of its endpoints.
inline std::vector<ProfileEntry> gradient_decay_profile(const SampleBatch& diffs, std::vector<int> radii) {
  require(!radii.empty(), "gradient_decay_profile: need radii");
  std::sort(radii.begin(), radii.end());
  const Domain& d = *diffs.domain;
  std::vector<ProfileEntry> out;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const int r = radii[k];
    const int next = k + 1 < radii.size() ? radii[k + 1] : std::numeric_limits<int>::max();
    std::vector<double> eroded, annulus;
    for (const Field& f : diffs.fields) {
      double e = 0.0, a = 0.0;
      for (const Bond& b : d.bonds()) {
        const int level = d.bond_level(b);
        if (level <= r) continue;
        const double g = f.gradient(b);
        e += g * g;
        if (level <= next) a += g * g;
      }
      eroded.push_back(e);
      annulus.push_back(a);
    }
    out.push_back({r, series_estimate(eroded), series_estimate(annulus)});
  }
  return out;
}

/// Exact per-bond Dirichlet energy sums of one field by level, as gradient_decay_profile
/// computes for a single sample (the quadratic oracle).
inline double level_energy(const Field& f, int above) {
  double acc = 0.0;
  for (const Bond& b : f.domain().bonds())
    if (f.domain().bond_level(b) > above) acc += f.gradient(b) * f.gradient(b);
  return acc;
}

struct DeviationReport {
  double statistic = 0.0;   ///< max over D(r) of |Ê h̄ - harmonic extension from ∂D(r)|
  double se = 0.0;
  Site argmax{};
  double tolerance = 0.0;   ///< max(0.05, 4 se)
  bool pass = true;
};

/// Compares the sample mean of h̄ on D(r) with the harmonic extension of its own values on
/// ∂D(r). The standard error is that of the linear functional at the maximizing site.
inline DeviationReport harmonic_deviation(const SampleBatch& samples, int r) {
  const Domain& d = *samples.domain;
  const auto inner = share(erode(d, r));
  require(!inner->empty(), "harmonic_deviation: eroded domain is empty");
  std::vector<double> mean_field(d.num_sites(), 0.0);
  for (const Field& f : samples.fields)
    for (std::size_t i = 0; i < d.num_sites(); ++i) mean_field[i] += f[static_cast<int>(i)];
  for (double& v : mean_field) v /= static_cast<double>(samples.count());
  const auto solver = std::make_shared<const LaplacianSolver>(inner);
  std::vector<double> bvals(inner->num_boundary());
  for (std::size_t j = 0; j < bvals.size(); ++j)
    bvals[j] = mean_field[static_cast<std::size_t>(d.index_of(inner->boundary()[j]))];
  const Field ext = solver->harmonic_extension(bvals);
  DeviationReport rep;
  int best = -1;
  for (int i = 0; i < static_cast<int>(inner->num_interior()); ++i) {
    const double dev =
        std::abs(mean_field[static_cast<std::size_t>(d.index_of(inner->site(i)))] - ext[i]);
    if (dev > rep.statistic || best < 0) {
      rep.statistic = dev;
      best = i;
    }
  }
  rep.argmax = inner->site(best);
  // the deviation at the argmax is linear in h̄: h̄(x) - Σ_z P_x(z) h̄(z)
  const auto weights = harmonic_measure(*solver, best);
  std::vector<double> series;
  series.reserve(samples.count());
  const int xi = d.index_of(rep.argmax);
  for (const Field& f : samples.fields) {
    double v = f[xi];
    for (std::size_t j = 0; j < weights.size(); ++j) v -= weights[j] * f.at(inner->boundary()[j]);
    series.push_back(v);
  }
  rep.se = series_estimate(series).se;
  rep.tolerance = std::max(0.05, 4.0 * rep.se);
  rep.pass = rep.statistic <= rep.tolerance;
  return rep;
}

}  // namespace glsim
