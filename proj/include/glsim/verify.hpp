#pragma once

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "glsim/clt.hpp"
#include "glsim/coupling.hpp"
#include "glsim/dynamics.hpp"
#include "glsim/gff.hpp"
#include "glsim/harmonic.hpp"
#include "glsim/hswalk.hpp"
#include "glsim/interface.hpp"
#include "glsim/report.hpp"

namespace glsim {

/// Sample-size scale and thresholds. "low" runs a quarter of the samples with every
/// statistical threshold widened to 4 sigma.
struct Budget {
  std::string name = "default";
  double scale = 1.0;
  double sigmas = 3.0;       ///< oracle comparisons
  double wide_sigmas = 4.0;  ///< cross-estimator comparisons

  std::size_t n(std::size_t full, std::size_t floor = 1) const {
    return std::max(floor, static_cast<std::size_t>(std::llround(static_cast<double>(full) * scale)));
  }
};

inline Budget make_budget(const std::string& name) {
  if (name == "default") return {};
  if (name == "low") return {"low", 0.25, 4.0, 4.0};
  throw InvalidArgument("unknown budget '" + name + "' (default | low)");
}

struct VerifyContext {
  std::uint64_t seed = 1;
  Budget budget;
};

struct VerifyCheck {
  std::string suite;
  std::string name;
  std::string ref;
  std::function<std::vector<StatReport>(const VerifyContext&)> run;
};

namespace verify_detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

/// Estimate compared with an exact target; the z-score threshold is shared by `family` checks.
inline StatReport compare(std::string name, const Estimate& e, double target, double sigmas, std::size_t family,
                          std::string ref) {
  const double thr = joint_threshold(sigmas, family);
  const double z = e.se > 0.0 ? std::abs(e.value - target) / e.se : (e.value == target ? 0.0 : kInf);
  return stat_report(std::move(name), e, thr, z <= thr, std::move(ref),
                     "target " + fmt(target) + ", |z| " + fmt(z) + " <= " + fmt(thr));
}

inline Estimate centred_product(const SampleBatch& b, int i, int j) {
  const auto x = b.site_series(i), y = b.site_series(j);
  const double mx = mean(x), my = mean(y);
  std::vector<double> p(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) p[k] = (x[k] - mx) * (y[k] - my);
  return series_estimate(p);
}

inline std::vector<double> linear_psi(const Domain& d, double c, double sx, double sy) {
  std::vector<double> psi;
  for (const Site& s : d.boundary()) psi.push_back(c + sx * s.x + sy * s.y);
  return psi;
}

inline Field signed_rows(const DomainPtr& d, const TwoSidedBoundary& bc, const std::vector<std::string>& rows) {
  Field h(d);
  const int height = static_cast<int>(rows.size());
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < static_cast<int>(rows[static_cast<std::size_t>(r)].size()); ++c)
      h[d->index_of({c, height - 1 - r})] = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '+' ? 1.0 : -1.0;
  for (std::size_t b = 0; b < d->num_boundary(); ++b) h.boundary()[b] = bc.psi[b];
  return h;
}

inline std::set<std::pair<Site, Site>> bond_set(const DualPath& p) {
  std::set<std::pair<Site, Site>> s;
  for (const auto& e : p.edges) s.insert(e.bond_key());
  return s;
}

inline Field negated(const Field& h) {
  Field f = h;
  for (double& v : f.values()) v = -v;
  return f;
}

inline CoupledState coupled_pair(const DomainPtr& d, const Potential& p, double psi_a, double psi_b,
                                 const Bands& bands, const std::vector<double>& start_a,
                                 const std::vector<double>& start_b) {
  Field fa(d), fb(d);
  for (std::size_t i = 0; i < d->num_sites(); ++i) {
    const bool interior = d->is_interior(static_cast<int>(i));
    fa[static_cast<int>(i)] = interior ? start_a[i] : psi_a;
    fb[static_cast<int>(i)] = interior ? start_b[i] : psi_b;
  }
  return {DynState(fa, p, bands), DynState(fb, p, bands)};
}

/// Environment ensemble cut sequentially from one stationary run.
inline EnvironmentSource recorded_source(const RunConfig& c, double horizon, long gap) {
  auto stream = std::make_shared<EnvironmentStream>(c, gap);
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / stream->dt())) + 1;
  return [stream, steps](std::size_t) { return stream->next(steps); };
}

inline std::uint64_t stream_of(const std::string& name, std::uint64_t k = 0) { return substream(name, k); }

// ---------------------------------------------------------------- exact

inline std::vector<StatReport> summation_by_parts(const VerifyContext& ctx) {
  double worst = 0.0;
  for (const auto& d : {share(build_rectangle(12, 12)), share(build_disk(6.5, 1))}) {
    Rng rng(ctx.seed, stream_of("verify/sbp"));
    Field f(d), g(d);
    for (std::size_t i = 0; i < d->num_interior(); ++i) f[static_cast<int>(i)] = rng.normal();
    for (std::size_t i = 0; i < d->num_sites(); ++i) g[static_cast<int>(i)] = rng.normal();
    const auto lap = laplacian_apply(g);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < d->num_interior(); ++i) lhs -= f[static_cast<int>(i)] * lap[i];
    for (const Bond& b : d->bonds()) rhs += f.gradient(b) * g.gradient(b);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return {exact_report("summation by parts relative error", worst, worst <= 1e-10, "discrete Green identity")};
}

inline std::vector<StatReport> green_path(const VerifyContext&) {
  const auto g = greens_function(share(build_path(3)));
  const double err = std::max({std::abs(g(0, 0) - 0.75), std::abs(g(1, 1) - 1.0), std::abs(g(0, 2) - 0.25)});
  return {exact_report("path graph Green's function max error", err, err <= 1e-12,
                       "Green's function covariance of the DGFF", "G(1,1)=0.75, G(2,2)=1, G(1,3)=0.25")};
}

inline std::vector<StatReport> dirichlet_residual(const VerifyContext& ctx) {
  double worst = 0.0;
  for (const auto& d : {share(build_rectangle(24, 24)), share(build_disk(9.0, 1))}) {
    Rng rng(ctx.seed, stream_of("verify/dirichlet"));
    std::vector<double> bv(d->num_boundary());
    for (double& v : bv) v = rng.normal() * 3.0;
    const Field u = solve_dirichlet(d, bv);
    for (double r : laplacian_apply(u)) worst = std::max(worst, std::abs(r));
  }
  return {exact_report("Dirichlet solve max residual", worst, worst <= 1e-10, "discrete harmonic extension")};
}

inline std::vector<StatReport> tracer_golden(const VerifyContext&) {
  std::size_t mismatches = 0;
  {
    const auto d = share(build_rectangle(2, 5));
    const auto bc = make_two_sided(d, {0, -1}, {0, 5}, 1.0);
    const auto p = trace(signed_rows(d, bc, std::vector<std::string>(5, "+-")), bc);
    std::vector<DualEdge> want;
    for (int k = -1; k <= 5; ++k) want.push_back({{0, k}, {1, k}});
    if (p.edges != want) ++mismatches;
  }
  {
    const auto d = share(build_rectangle(3, 3));
    const auto bc = make_two_sided(d, {0, -1}, {1, 3}, 1.0);
    const auto h = signed_rows(d, bc, {"++-", "+--", "+--"});
    const auto p = trace(h, bc);
    const std::vector<DualEdge> want{{{0, -1}, {1, -1}}, {{0, 0}, {1, 0}}, {{0, 1}, {1, 1}},
                                     {{1, 2}, {1, 1}},   {{1, 2}, {2, 2}}, {{1, 3}, {2, 3}}};
    if (p.edges != want) ++mismatches;
    const auto flip = trace(negated(h), make_two_sided(d, {2, 3}, {1, -1}, 1.0));
    if (bond_set(flip) != bond_set(p)) ++mismatches;
  }
  return {exact_report("tracer golden paths mismatches", static_cast<double>(mismatches), mismatches == 0,
                       "turning rule for the zero-height interface",
                       "two-column straight path, 3x3 staircase, sign-flip bond set")};
}

inline std::vector<StatReport> coupled_pathwise(const VerifyContext& ctx) {
  const auto d = share(build_rectangle(8, 8));
  const auto p = Potential::anharmonic();
  const std::size_t runs = 100, steps = 10000, n = d->num_interior();
  std::size_t bad_bands = 0, bad_contraction = 0, bad_order = 0, bad_conductance = 0, bad_energy = 0;
  std::vector<StepRecord> rec(steps);
  for (std::size_t k = 0; k < runs; ++k) {
    Rng rng(ctx.seed, stream_of("verify/coupled-start", k));
    const bool ordered = k % 2 == 1;
    Bands bands = Bands::free(n);
    std::vector<double> sa(d->num_sites()), sb(d->num_sites());
    if (ordered) {
      for (std::size_t i = 0; i < n; i += 3) bands.lower[i] = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sb[i] = std::abs(rng.normal());
        sa[i] = sb[i] + std::abs(rng.normal());
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        sa[i] = 2.0 * rng.normal();
        sb[i] = 2.0 * rng.normal();
      }
    }
    CoupledState cs = ordered ? coupled_pair(d, p, 2.0, -2.0, bands, sa, sb) : coupled_pair(d, p, 0.5, 0.5, bands, sa, sb);
    const double dt = ordered ? 0.1 / p.A() : max_stable_dt(p);
    const NoiseStream noise(ctx.seed, stream_of("verify/coupled-noise", k));
    for (auto& r : rec) step_coupled(cs, dt, noise, &r);
    const auto chk = check_records(rec, p);
    bad_bands += !chk.bands;
    bad_conductance += !chk.conductance;
    bad_energy += !chk.energy;
    if (ordered)
      bad_order += domination_monitor(rec).has_value();
    else
      bad_contraction += !chk.contraction;
  }
  const std::string detail = "100 runs, 8x8, 1e4 steps, anharmonic";
  auto rep = [&](std::string name, std::size_t bad, std::string ref) {
    return exact_report(std::move(name), static_cast<double>(bad), bad == 0, std::move(ref), detail);
  };
  return {rep("coupled runs violating the band invariant", bad_bands, "conditioned dynamics"),
          rep("coupled runs violating l2 contraction", bad_contraction, "stationary coupling of two solutions"),
          rep("coupled runs violating order preservation", bad_order, "stochastic domination lemma"),
          rep("coupled runs with conductance outside [a, A]", bad_conductance, "difference dynamics conductances"),
          rep("coupled runs violating the energy inequality", bad_energy, "energy inequality")};
}

// ---------------------------------------------------------------- quadratic

inline std::vector<StatReport> langevin_path(const VerifyContext& ctx) {
  RunConfig c;
  c.domain = share(build_path(3));
  c.dt = 0.01;
  c.psi = {0.0, 4.0};
  c.burnin = 5000;
  c.thin = 20;
  c.samples = ctx.budget.n(40000, 2000);
  c.seed = ctx.seed;
  c.stream = stream_of("verify/langevin-path");
  const auto r = run(c);
  const double g[3][3] = {{0.75, 0.5, 0.25}, {0.5, 1.0, 0.5}, {0.25, 0.5, 0.75}};
  std::vector<StatReport> out;
  const std::string ref = "DGFF mean is the harmonic extension, covariance is G";
  for (int i = 0; i < 3; ++i)
    out.push_back(compare("path Langevin mean at site " + std::to_string(i + 1),
                          series_estimate(r.batch.site_series(i)), i + 1.0, ctx.budget.sigmas, 9, ref));
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      out.push_back(compare("path Langevin covariance (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")",
                            centred_product(r.batch, i, j), g[i][j], ctx.budget.sigmas, 9, ref));
  return out;
}

inline std::vector<StatReport> langevin_square(const VerifyContext& ctx) {
  RunConfig c;
  c.domain = share(build_rectangle(8, 8));
  c.dt = 0.01;
  c.psi = linear_psi(*c.domain, 0.5, 0.25, -0.25);
  c.burnin = 3000;
  c.thin = 50;
  c.samples = ctx.budget.n(20000, 2000);
  c.seed = ctx.seed;
  c.stream = stream_of("verify/langevin-8x8");
  const auto r = run(c);
  const auto& d = *c.domain;
  const auto g = greens_function(c.domain);
  const int centre = d.index_of({3, 3}), right = d.index_of({4, 3}), diag = d.index_of({4, 4}),
            corner = d.index_of({0, 0}), edge = d.index_of({0, 4});
  std::vector<StatReport> out;
  const std::string ref = "DGFF mean is the harmonic extension, covariance is G";
  for (int i : {centre, diag, corner, edge}) {
    const Site s = d.site(i);
    out.push_back(compare("8x8 Langevin mean at (" + std::to_string(s.x) + "," + std::to_string(s.y) + ")",
                          series_estimate(r.batch.site_series(i)), 0.5 + 0.25 * s.x - 0.25 * s.y, ctx.budget.sigmas, 9,
                          ref));
  }
  const std::pair<int, int> pairs[] = {{centre, centre}, {centre, right}, {centre, diag}, {corner, corner}, {centre, corner}};
  for (const auto& [i, j] : pairs) {
    const Site a = d.site(i), b = d.site(j);
    out.push_back(compare("8x8 Langevin covariance (" + std::to_string(a.x) + "," + std::to_string(a.y) + ")-(" +
                              std::to_string(b.x) + "," + std::to_string(b.y) + ")",
                          centred_product(r.batch, i, j), g(i, j), ctx.budget.sigmas, 9, ref));
  }
  return out;
}

inline std::vector<StatReport> hs_occupation_quadratic(const VerifyContext& ctx) {
  std::vector<StatReport> out;
  const std::string ref = "HS representation of the covariance";
  {
    RunConfig c;
    c.domain = share(build_path(3));
    c.burnin = 100;
    c.seed = ctx.seed;
    c.stream = stream_of("verify/hs-path-env");
    const auto src = recorded_source(c, 60.0, 10);
    const auto e22 = hs_covariance(src, ctx.budget.n(100, 100), 1, 1, kInf, ctx.budget.n(400, 100), ctx.seed,
                                   stream_of("verify/hs-path", 0));
    const auto e13 = hs_covariance(src, ctx.budget.n(100, 100), 0, 2, kInf, ctx.budget.n(400, 100), ctx.seed,
                                   stream_of("verify/hs-path", 1));
    out.push_back(compare("HS occupation path (2,2)", e22.estimate, 1.0, ctx.budget.sigmas, 5, ref));
    out.push_back(compare("HS occupation path (1,3)", e13.estimate, 0.25, ctx.budget.sigmas, 5, ref));
  }
  RunConfig c;
  c.domain = share(build_rectangle(8, 8));
  c.burnin = 200;
  c.seed = ctx.seed;
  c.stream = stream_of("verify/hs-8x8-env");
  const auto& d = *c.domain;
  const auto g = greens_function(c.domain);
  const int x = d.index_of({3, 3});
  const auto src = recorded_source(c, 80.0, 20);
  for (Site ys : {Site{3, 3}, Site{4, 3}, Site{6, 5}}) {
    const int y = d.index_of(ys);
    const auto e = hs_covariance(src, ctx.budget.n(100, 100), x, y, kInf, ctx.budget.n(400, 100), ctx.seed,
                                 stream_of("verify/hs-8x8", static_cast<std::uint64_t>(y)));
    out.push_back(compare("HS occupation 8x8 (3,3)-(" + std::to_string(ys.x) + "," + std::to_string(ys.y) + ")",
                          e.estimate, g(x, y), ctx.budget.sigmas, 5, ref));
    if (!e.horizon_ok) out.back().pass = false;
  }
  return out;
}

inline std::vector<StatReport> hs_mean_quadratic(const VerifyContext& ctx) {
  const auto d = share(build_rectangle(8, 8));
  const auto bc = make_two_sided(d, {3, -1}, {3, 8}, 1.0);
  const int x = d->index_of({2, 4});
  const double target = solve_dirichlet(d, bc.psi)[x];
  auto make = [&](double r) {
    RunConfig c;
    c.domain = d;
    c.psi = bc.psi;
    for (double& v : c.psi) v *= r;
    c.burnin = 200;
    c.seed = ctx.seed;
    c.stream = stream_of("verify/hs-mean-env", static_cast<std::uint64_t>(std::llround(r * 1e6)));
    return recorded_source(c, 80.0, 20);
  };
  const auto r = hs_mean(bc.psi, x, 8, make, ctx.budget.n(20, 5), kInf, ctx.budget.n(1000, 250), ctx.seed,
                         stream_of("verify/hs-mean"));
  return {compare("HS mean quadrature vs harmonic extension", r.estimate, target, ctx.budget.sigmas, 1,
                  "HS representation of the mean")};
}

inline std::vector<StatReport> exit_law_quadratic(const VerifyContext& ctx) {
  RunConfig c;
  c.domain = share(build_rectangle(8, 8));
  c.burnin = 200;
  c.seed = ctx.seed;
  c.stream = stream_of("verify/exit-quadratic-env");
  const auto r = exit_law(recorded_source(c, 80.0, 20), ctx.budget.n(40, 10), c.domain->index_of({4, 4}), kInf,
                          ctx.budget.n(500, 250), ctx.seed, stream_of("verify/exit-quadratic"));
  StatReport rep = exact_report("quadratic exit law TV to harmonic measure", r.tv, r.within_null,
                                "walk exit law and harmonic measure",
                                "null 99.9% quantile " + fmt(r.null_quantile) + ", null mean " + fmt(r.null_mean));
  rep.ci_low = 0.0;
  rep.ci_high = std::max(r.tv, r.null_quantile);
  return {rep};
}

inline std::vector<StatReport> clt_quadratic(const VerifyContext& ctx) {
  const int n = 32;
  const auto d = share(build_rectangle(n, n));
  const auto solver = std::make_shared<const LaplacianSolver>(d);
  const auto w = functional_weights(*d, bump(0.5, 0.5, 0.3), 1.0 / n);
  const double exact = dgff_functional_variance(*solver, w);
  const auto batch = sample_dgff(solver, std::vector<double>(d->num_boundary(), 0.0), ctx.budget.n(4000, 1000),
                                 ctx.seed, stream_of("verify/clt"));
  std::vector<double> xi, sq;
  for (const Field& f : batch.fields) xi.push_back(field_functional(f, w));
  const double m = mean(xi);
  for (double v : xi) sq.push_back((v - m) * (v - m));
  const auto ad = gaussianity_test(xi);
  StatReport norm = exact_report("CLT functional Anderson-Darling A2*", ad.a2_star, ad.pass,
                                 "Gaussian limit of the rescaled field", "1% critical value " + fmt(ad.critical));
  return {compare("CLT functional variance vs linear algebra", mean_estimate(sq), exact, ctx.budget.sigmas, 1,
                  "Gaussian limit of the rescaled field"),
          norm};
}

// ---------------------------------------------------------------- anharmonic

/// 16x16 anharmonic stationary samples with a tilted boundary, shared by several checks.
/// dt is a quarter of the default so the discretization bias of the covariance (about
/// dt a_V on the diagonal) stays well below the HS cross-check's resolution.
inline RunConfig anharmonic16_config(const VerifyContext& ctx) {
  RunConfig c;
  c.domain = share(build_rectangle(16, 16));
  c.potential = Potential::anharmonic();
  c.psi = linear_psi(*c.domain, 0.3, 0.05, -0.1);
  c.dt = 0.025 / c.potential.A();
  c.burnin = 40000;
  c.thin = 60;
  c.samples = ctx.budget.n(20000, 5000);
  c.seed = ctx.seed;
  c.stream = stream_of("verify/anharmonic16");
  return c;
}

struct Anharmonic16 {
  RunConfig config;
  RunResult result;
};

inline const Anharmonic16& anharmonic16(const VerifyContext& ctx) {
  static std::map<std::pair<std::uint64_t, double>, Anharmonic16> cache;
  const auto key = std::make_pair(ctx.seed, ctx.budget.scale);
  auto it = cache.find(key);
  if (it == cache.end()) {
    Anharmonic16 a{anharmonic16_config(ctx), {}};
    a.result = run(a.config);
    it = cache.emplace(key, std::move(a)).first;
  }
  return it->second;
}

inline std::vector<StatReport> flow_balance_check(const VerifyContext& ctx) {
  const auto& s = anharmonic16(ctx);
  const auto& d = *s.config.domain;
  std::vector<StatReport> out;
  for (Site x : {Site{8, 8}, Site{0, 5}, Site{15, 15}}) {
    const auto e = flow_balance(s.result.batch, s.config.potential, d.index_of(x));
    out.push_back(compare("flow balance at (" + std::to_string(x.x) + "," + std::to_string(x.y) + ")", e, 0.0,
                          ctx.budget.sigmas, 3, "expectation symmetry lemma"));
  }
  return out;
}

inline std::vector<StatReport> fkg_check_suite(const VerifyContext& ctx) {
  const auto& s = anharmonic16(ctx);
  const auto& d = *s.config.domain;
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k < 20; ++k) {
    const Site a{(3 * k) % 16, (5 * k + 1) % 16}, b{(7 * k + 4) % 16, (11 * k + 9) % 16};
    pairs.push_back({d.index_of(a), d.index_of(b)});
  }
  const auto r = fkg_check(s.result.batch, pairs);
  double worst = kInf;
  for (const auto& e : r.covariances) worst = std::min(worst, e.se > 0 ? e.value / e.se : kInf);
  return {exact_report("FKG pairs with covariance below -4 se", static_cast<double>(r.violations), r.pass,
                       "FKG inequality", "20 pairs, smallest cov/se " + fmt(worst))};
}

inline std::vector<StatReport> brascamp_lieb_suite(const VerifyContext& ctx) {
  const auto& s = anharmonic16(ctx);
  const auto& d = *s.config.domain;
  const LaplacianSolver solver(s.config.domain);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.num_interior()));
  for (Site x : {Site{7, 8}, Site{8, 8}, Site{9, 8}}) nu[d.index_of(x)] = 1.0;
  const auto r = brascamp_lieb_check(s.result.batch, solver, nu, s.config.potential.a(), ctx.budget.sigmas);
  StatReport v = stat_report("Brascamp-Lieb variance of 3-site sum", r.variance, ctx.budget.sigmas, r.variance_pass,
                             "Brascamp-Lieb inequalities", "bound Var_DGFF/a = " + fmt(r.bound));
  StatReport e = stat_report("Brascamp-Lieb exponential moment at lambda=1", r.exp_moment, ctx.budget.sigmas, r.exp_pass,
                             "Brascamp-Lieb inequalities", "bound exp(Var_DGFF/(2a)) = " + fmt(r.exp_bound));
  return {v, e};
}

inline std::vector<StatReport> hs_cross_check(const VerifyContext& ctx) {
  const auto& s = anharmonic16(ctx);
  const auto& d = *s.config.domain;
  RunConfig c = s.config;
  c.stream = stream_of("verify/hs-anharmonic-env");
  // mean exit time from the centre is about 4; the window is 7 times that
  const double horizon = 30.0;
  const auto src = recorded_source(c, horizon, 200);
  const int x = d.index_of({8, 8});
  const std::vector<int> ys{x, d.index_of({9, 8})};
  const std::size_t n_env = ctx.budget.n(100, 100), walks = ctx.budget.n(200, 100);
  // one pass over the environments serves every target
  std::vector<std::vector<double>> per_env(ys.size());
  std::size_t unabsorbed = 0;
  for (std::size_t e = 0; e < n_env; ++e) {
    const Environment env = src(e);
    const auto occ = occupation_times(env, x, horizon, walks, ctx.seed, stream_of("verify/hs-anharmonic"), e);
    for (std::size_t k = 0; k < ys.size(); ++k) per_env[k].push_back(occ.time[static_cast<std::size_t>(ys[k])]);
    unabsorbed += occ.unabsorbed;
  }
  const double unabsorbed_fraction = static_cast<double>(unabsorbed) / static_cast<double>(n_env * walks);
  std::vector<StatReport> out;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double total = std::accumulate(per_env[k].begin(), per_env[k].end(), 0.0);
    std::vector<double> loo;
    for (double v : per_env[k]) loo.push_back((total - v) / static_cast<double>(n_env - 1));
    const Estimate hs{mean(per_env[k]), jackknife_se(loo)};
    const auto direct = centred_product(s.result.batch, x, ys[k]);
    const Estimate diff{hs.value - direct.value, std::hypot(hs.se, direct.se)};
    const Site ys_ = d.site(ys[k]);
    auto rep = compare("HS minus direct covariance (8,8)-(" + std::to_string(ys_.x) + "," + std::to_string(ys_.y) + ")",
                       diff, 0.0, ctx.budget.wide_sigmas, ys.size(), "HS representation of the covariance");
    rep.detail += ", HS " + fmt(hs.value) + ", direct " + fmt(direct.value) + ", unabsorbed " + fmt(unabsorbed_fraction);
    if (unabsorbed_fraction > 0.01) rep.pass = false;
    out.push_back(rep);
  }
  return out;
}

inline std::vector<StatReport> harmonic_deviation_check(const VerifyContext& ctx) {
  RunConfig c;
  c.domain = share(build_rectangle(32, 32));
  c.potential = Potential::anharmonic();
  c.psi = make_two_sided(c.domain, {15, -1}, {15, 32}, 1.0).psi;
  c.burnin = 40000;
  c.thin = 10;
  c.samples = ctx.budget.n(20000, 5000);
  c.seed = ctx.seed;
  c.stream = stream_of("verify/anharmonic32");
  const auto r = run(c);
  const auto dev = harmonic_deviation(r.batch, 8);
  return {stat_report("harmonic deviation of the mean on D(8), 32x32", {dev.statistic, dev.se}, 4.0, dev.pass,
                      "mean harmonic theorem", "tolerance max(0.05, 4 se) = " + fmt(dev.tolerance))};
}

inline std::vector<StatReport> gradient_decay_check(const VerifyContext& ctx) {
  CoupledConfig c;
  c.domain = share(build_rectangle(32, 32));
  c.potential = Potential::anharmonic();
  c.psi_a.resize(c.domain->num_boundary());
  for (std::size_t k = 0; k < c.psi_a.size(); ++k) c.psi_a[k] = k % 2 == 0 ? 1.0 : -1.0;
  c.burnin = 20000;
  c.thin = 20;
  c.samples = ctx.budget.n(400, 100);
  c.seed = ctx.seed;
  c.stream = stream_of("verify/gradient-decay");
  const auto r = run_coupled(c);
  const auto prof = gradient_decay_profile(r.difference, {0, 2, 8});
  const double ratio = prof[2].eroded.value / prof[0].annulus.value;
  const double se = ratio * std::hypot(prof[2].eroded.se / std::max(1e-300, prof[2].eroded.value),
                                       prof[0].annulus.se / prof[0].annulus.value);
  const bool monotone = prof[0].annulus.value > prof[1].annulus.value && prof[1].annulus.value > prof[2].annulus.value;
  return {stat_report("gradient difference energy, D(8) over boundary annulus", {ratio, se}, 4.0,
                      ratio + 4.0 * se < 0.2 && monotone, "gradient error lemma",
                      "annuli (0,2], (2,8], >8: " + fmt(prof[0].annulus.value) + ", " + fmt(prof[1].annulus.value) +
                          ", " + fmt(prof[2].annulus.value))};
}

inline std::vector<StatReport> exit_law_trend(const VerifyContext& ctx) {
  std::vector<StatReport> out;
  std::vector<double> excess;
  for (int L : {8, 16, 32}) {
    RunConfig c;
    c.domain = share(build_rectangle(L, L));
    c.potential = Potential::anharmonic();
    c.burnin = 5000;
    c.seed = ctx.seed;
    c.stream = stream_of("verify/exit-trend-env", static_cast<std::uint64_t>(L));
    // mean exit time of the rate-4a walk from the centre is about 0.074 (L+1)^2 / a_V
    const double horizon = 8.0 * 0.0737 * (L + 1) * (L + 1) / 5.6;
    const auto r = exit_law(recorded_source(c, horizon, 200), ctx.budget.n(50, 12), c.domain->index_of({L / 2, L / 2}),
                            kInf, ctx.budget.n(1000, 250), ctx.seed, stream_of("verify/exit-trend", static_cast<std::uint64_t>(L)));
    excess.push_back(r.excess);
    StatReport rep = stat_report("anharmonic exit law excess TV, L=" + std::to_string(L), {r.excess, r.null_sd}, 3.0, true,
                                 "homogenization of the walk exit law",
                                 "raw TV " + fmt(r.tv) + ", null mean " + fmt(r.null_mean) + ", unabsorbed " +
                                     std::to_string(r.unabsorbed));
    out.push_back(rep);
  }
  const bool decreasing = excess[0] > excess[1] && excess[1] > excess[2];
  out.push_back(exact_report("anharmonic exit law excess TV decreasing 8>16>32", excess[0] - excess[2], decreasing,
                             "homogenization of the walk exit law",
                             "excess " + fmt(excess[0]) + ", " + fmt(excess[1]) + ", " + fmt(excess[2])));
  return out;
}

inline std::vector<StatReport> a_v_check(const VerifyContext& ctx) {
  // zero tilt: with a slope the mean curvature differs between horizontal and vertical bonds
  RunConfig c;
  c.domain = share(build_rectangle(16, 16));
  c.potential = Potential::anharmonic();
  c.psi.assign(c.domain->num_boundary(), 0.3);
  c.burnin = 20000;
  c.thin = 25;
  c.samples = ctx.budget.n(20000, 5000);
  c.seed = ctx.seed;
  c.stream = stream_of("verify/a_v");
  const auto r = run(c);
  const auto bonds = bulk_bonds(*c.domain, 4);
  const auto a = estimate_a_v(r.batch, c.potential, bonds);
  StatReport bond = exact_report("a_V bond independence max |z|", a.max_z, a.bond_independent,
                                 "homogenized coefficient", std::to_string(bonds.size()) + " bulk bonds, joint threshold " +
                                                                fmt(a.threshold));
  StatReport value = stat_report("a_V estimate (bulk of 16x16)", a.value, ctx.budget.wide_sigmas,
                                 a.value.value >= c.potential.a() && a.value.value <= c.potential.A(),
                                 "homogenized coefficient", "must lie in [a, A]");
  return {bond, value};
}

// ---------------------------------------------------------------- interface

inline std::vector<StatReport> tracer_invariants(const VerifyContext& ctx) {
  const auto d = share(build_rectangle(24, 24));
  const auto solver = std::make_shared<const LaplacianSolver>(d);
  const auto bc = make_two_sided(d, {11, -1}, {11, 24}, 0.6);
  const auto flip_bc = make_two_sided(d, {12, 24}, {12, -1}, 0.6);
  const auto batch = two_sided_dgff(solver, bc, 1000, ctx.seed, stream_of("verify/tracer"));
  std::size_t bad = 0, flip_bad = 0, nondeterministic = 0;
  for (const Field& h : batch.fields) {
    const auto p = trace(h, bc);
    bad += !check_path(p, h, bc).ok();
    flip_bad += bond_set(trace(negated(h), flip_bc)) != bond_set(p);
    nondeterministic += trace(h, bc).edges != p.edges;
  }
  return {exact_report("traced paths violating invariants (1000 fields)", static_cast<double>(bad), bad == 0,
                       "zero-height interface", "connected, simple, sign separation, x* to y*"),
          exact_report("sign flip changing the traced bond set (1000 fields)", static_cast<double>(flip_bad),
                       flip_bad == 0, "turning rule for the zero-height interface"),
          exact_report("non-deterministic traces (1000 fields)", static_cast<double>(nondeterministic),
                       nondeterministic == 0, "zero-height interface")};
}

struct MartingaleSetup {
  DomainPtr domain;
  std::shared_ptr<const LaplacianSolver> solver;
  Site x{11, -1}, y{11, 24}, z{7, 14};
  std::size_t t = 5, s = 5;

  MartingaleSetup() : domain(share(build_rectangle(24, 24))), solver(std::make_shared<const LaplacianSolver>(domain)) {}

  MartingaleReport diagnose(double lambda, std::size_t replicas, std::uint64_t seed, std::uint64_t stream) const {
    const auto bc = make_two_sided(domain, x, y, lambda);
    return martingale_diagnostic(two_sided_dgff(solver, bc, replicas, seed, stream), bc, z, t, s);
  }
};

inline LambdaCalibration calibrated_lambda(const VerifyContext& ctx, const MartingaleSetup& m) {
  static std::map<std::pair<std::uint64_t, double>, LambdaCalibration> cache;
  const auto key = std::make_pair(ctx.seed, ctx.budget.scale);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const std::vector<double> grid{0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  auto cal = calibrate_lambda(grid, [&](double l) {
    return m.diagnose(l, ctx.budget.n(1000, 250), ctx.seed, stream_of("verify/lambda-calibration"));
  });
  return cache.emplace(key, cal).first->second;
}

inline std::vector<StatReport> martingale_check(const VerifyContext& ctx) {
  const MartingaleSetup m;
  const auto cal = calibrated_lambda(ctx, m);
  const auto r = m.diagnose(cal.best, ctx.budget.n(4000, 1000), ctx.seed, stream_of("verify/martingale"));
  std::string grid;
  for (const auto& p : cal.grid) grid += (grid.empty() ? "" : " ") + fmt(p.lambda) + ":" + fmt(p.report.estimate.value);
  return {stat_report("martingale diagnostic DGFF 24x24 at calibrated lambda " + fmt(cal.best), r.estimate,
                      ctx.budget.sigmas, r.pass, "approximate martingale theorem",
                      "used " + std::to_string(r.used) + ", excluded " + std::to_string(r.excluded) +
                          "; calibration grid " + grid)};
}

inline std::vector<StatReport> negative_controls(const VerifyContext& ctx) {
  std::vector<StatReport> out;
  {
    const MartingaleSetup m;
    const auto cal = calibrated_lambda(ctx, m);
    const auto r = m.diagnose(10.0 * cal.best, ctx.budget.n(4000, 1000), ctx.seed, stream_of("verify/martingale-wrong"));
    out.push_back(stat_report("negative control: lambda x10 makes the diagnostic significant", r.estimate,
                              ctx.budget.sigmas, !r.covers_zero, "approximate martingale theorem",
                              "expected |estimate| > " + fmt(ctx.budget.sigmas) + " se"));
  }
  {
    const auto d = share(build_rectangle(8, 8));
    const auto p = Potential::quadratic();
    const std::vector<double> sa(d->num_sites(), 1.0), sb(d->num_sites(), 0.0);
    CoupledState cs = coupled_pair(d, p, 1.0, 0.0, Bands::free(64), sa, sb);
    std::vector<StepRecord> rec(2000);
    const NoiseStream na(ctx.seed, stream_of("verify/broken-a")), nb(ctx.seed, stream_of("verify/broken-b"));
    for (auto& r : rec) step_coupled(cs, 0.1, na, nb, &r);
    const auto first = domination_monitor(rec);
    out.push_back(exact_report("negative control: independent noise breaks domination",
                               first ? static_cast<double>(*first) : -1.0, first.has_value(),
                               "stochastic domination lemma", "first violating step"));
  }
  {
    RunConfig cold;
    cold.domain = share(build_rectangle(16, 16));
    cold.potential = Potential::anharmonic();
    cold.burnin = 50;
    cold.thin = 1;
    cold.samples = 800;
    cold.chains = 1;
    cold.seed = ctx.seed;
    cold.stream = stream_of("verify/cold-start");
    cold.start = Field(cold.domain, std::vector<double>(cold.domain->num_sites(), 0.0));
    for (std::size_t i = 0; i < cold.domain->num_interior(); ++i) (*cold.start)[static_cast<int>(i)] = 30.0;
    const auto r = run(cold);
    const auto e = flow_balance(r.batch, cold.potential, cold.domain->index_of({8, 8}));
    out.push_back(stat_report("negative control: non-stationary start breaks flow balance", e, ctx.budget.sigmas,
                              !e.covers(0.0, ctx.budget.sigmas), "expectation symmetry lemma",
                              "16x16 started at height 30, 50 burn-in steps"));
  }
  return out;
}

// ---------------------------------------------------------------- heat kernel

inline std::vector<StatReport> heat_kernel_check(const VerifyContext& ctx) {
  std::vector<StatReport> out;
  std::map<std::string, std::vector<double>> constants;
  for (const Potential& pot : {Potential::quadratic(), Potential::anharmonic()}) {
    // common window: the walk from the centre of the smallest box rarely meets its boundary
    const double t_max = 16.0 / (4.0 * pot.A());
    for (int L : {8, 16, 32}) {
      RunConfig c;
      c.domain = share(build_rectangle(L, L));
      c.potential = pot;
      c.burnin = 3000;
      c.seed = ctx.seed;
      c.stream = stream_of("verify/heat-env/" + pot.name(), static_cast<std::uint64_t>(L));
      const auto r = heat_kernel_envelope(recorded_source(c, t_max, 200), ctx.budget.n(40, 10),
                                          c.domain->index_of({L / 2, L / 2}), t_max, 10, ctx.budget.n(4000, 1000),
                                          ctx.seed, stream_of("verify/heat/" + pot.name(), static_cast<std::uint64_t>(L)));
      constants[pot.name()].push_back(r.c_hat);
      out.push_back(exact_report("heat kernel lower constant delta, " + pot.name() + " L=" + std::to_string(L),
                                 r.delta_hat, r.delta_hat > 0.0, "Nash-Aronson estimates",
                                 "C_hat " + fmt(r.c_hat) + ", window " + fmt(t_max) + ", bins " + std::to_string(r.bins)));
    }
  }
  for (const auto& [name, cs] : constants) {
    const double lo = *std::min_element(cs.begin(), cs.end()), hi = *std::max_element(cs.begin(), cs.end());
    out.push_back(exact_report("heat kernel constant spread over L=8/16/32, " + name, hi / lo, hi <= 2.0 * lo && lo > 0.0,
                               "Nash-Aronson estimates", "C_hat " + fmt(cs[0]) + ", " + fmt(cs[1]) + ", " + fmt(cs[2])));
  }
  const double ratio = constants["anharmonic"].back() / constants["quadratic"].back();
  out.push_back(exact_report("heat kernel constant anharmonic/quadratic (L=32)", ratio, ratio <= 10.0 && ratio >= 0.1,
                             "Nash-Aronson estimates", "within a factor 10"));
  return out;
}

inline std::vector<StatReport> hitting_check(const VerifyContext& ctx) {
  const double R = 12.0;
  const auto d = share(build_rectangle(25, 25));
  const int x0 = d->index_of({12, 12});
  const std::vector<Site> target{{18, 12}};
  std::map<std::string, HittingReport> res;
  for (const Potential& pot : {Potential::quadratic(), Potential::anharmonic()}) {
    RunConfig c;
    c.domain = d;
    c.potential = pot;
    c.burnin = 3000;
    c.seed = ctx.seed;
    c.stream = stream_of("verify/hitting-env/" + pot.name());
    // ball exit takes about R^2 / (4 a_V); ten times that as the window
    const double horizon = 10.0 * R * R / (4.0 * (pot.kind() == Potential::Kind::quadratic ? 1.0 : 5.0));
    res[pot.name()] = hitting_lower_bound(recorded_source(c, horizon, 200), ctx.budget.n(20, 5), x0, target, R, kInf,
                                          ctx.budget.n(2000, 500), ctx.seed, stream_of("verify/hitting/" + pot.name()));
  }
  const auto& q = res["quadratic"];
  const auto& a = res["anharmonic"];
  const double c_hat = q.constant / 4.0;
  const double bound = c_hat * 1.0 / (R * R);
  return {stat_report("hitting probability quadratic (calibrates c)", q.probability, ctx.budget.sigmas,
                      q.probability.value > 0.0, "first hitting estimate", "c_hat = " + fmt(q.constant)),
          stat_report("hitting probability anharmonic vs c_hat/4 |A|/R^2", a.probability, ctx.budget.sigmas,
                      a.probability.value >= bound && a.probability.value >= q.probability.value / 4.0 &&
                          a.probability.value <= 4.0 * q.probability.value,
                      "first hitting estimate", "bound " + fmt(bound) + ", quadratic " + fmt(q.probability.value))};
}

}  // namespace verify_detail

inline std::vector<VerifyCheck> verify_checks() {
  using namespace verify_detail;
  return {
      {"exact", "summation_by_parts", "discrete Green identity", summation_by_parts},
      {"exact", "green_path", "Green's function covariance of the DGFF", green_path},
      {"exact", "dirichlet_residual", "discrete harmonic extension", dirichlet_residual},
      {"exact", "tracer_golden", "turning rule for the zero-height interface", tracer_golden},
      {"exact", "coupled_pathwise", "energy inequality", coupled_pathwise},
      {"quadratic", "langevin_path", "DGFF mean and covariance", langevin_path},
      {"quadratic", "langevin_square", "DGFF mean and covariance", langevin_square},
      {"quadratic", "hs_occupation", "HS representation of the covariance", hs_occupation_quadratic},
      {"quadratic", "hs_mean", "HS representation of the mean", hs_mean_quadratic},
      {"quadratic", "exit_law", "walk exit law and harmonic measure", exit_law_quadratic},
      {"quadratic", "clt", "Gaussian limit of the rescaled field", clt_quadratic},
      {"anharmonic", "flow_balance", "expectation symmetry lemma", flow_balance_check},
      {"anharmonic", "fkg", "FKG inequality", fkg_check_suite},
      {"anharmonic", "brascamp_lieb", "Brascamp-Lieb inequalities", brascamp_lieb_suite},
      {"anharmonic", "hs_cross", "HS representation of the covariance", hs_cross_check},
      {"anharmonic", "harmonic_deviation", "mean harmonic theorem", harmonic_deviation_check},
      {"anharmonic", "gradient_decay", "gradient error lemma", gradient_decay_check},
      {"anharmonic", "exit_law_trend", "homogenization of the walk exit law", exit_law_trend},
      {"anharmonic", "a_v", "homogenized coefficient", a_v_check},
      {"interface", "tracer_invariants", "zero-height interface", tracer_invariants},
      {"interface", "martingale", "approximate martingale theorem", martingale_check},
      {"interface", "negative_controls", "negative controls", negative_controls},
      {"heatkernel", "heat_kernel", "Nash-Aronson estimates", heat_kernel_check},
      {"heatkernel", "hitting", "first hitting estimate", hitting_check},
  };
}

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> s{"exact", "quadratic", "anharmonic", "interface", "heatkernel"};
  return s;
}

/// Runs `checks` in order. A check that throws becomes a failed report and the run continues.
inline std::vector<StatReport> run_checks(const std::vector<VerifyCheck>& checks, const VerifyContext& ctx,
                                          std::ostream* log = nullptr) {
  std::vector<StatReport> out;
  for (const auto& check : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<StatReport> reps;
    try {
      reps = check.run(ctx);
    } catch (const std::exception& e) {
      reps = {crash_report(check.name, e.what(), check.ref)};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (auto& r : reps) {
      r.suite = check.suite;
      if (log) *log << (r.pass ? "PASS " : "FAIL ") << check.suite << '/' << r.name << "  " << r.estimate << "  " << r.detail << '\n';
      out.push_back(std::move(r));
    }
    if (log) *log << "     (" << check.suite << '/' << check.name << ": " << verify_detail::fmt(secs) << " s)\n" << std::flush;
  }
  return out;
}

/// Checks of `suite` ("all" for every suite), optionally restricted to one check name.
inline std::vector<VerifyCheck> select_checks(const std::string& suite, const std::string& only = {}) {
  const auto& suites = verify_suites();
  require(suite == "all" || std::find(suites.begin(), suites.end(), suite) != suites.end(),
          "unknown suite '" + suite + "' (exact | quadratic | anharmonic | interface | heatkernel | all)");
  std::vector<VerifyCheck> out;
  for (auto& c : verify_checks())
    if ((suite == "all" || c.suite == suite) && (only.empty() || c.name == only)) out.push_back(std::move(c));
  require(!out.empty(), "no check named '" + only + "' in suite '" + suite + "'");
  return out;
}

inline std::vector<StatReport> run_verify(const std::string& suite, const Budget& budget, std::uint64_t seed,
                                          std::ostream* log = nullptr, const std::string& only = {}) {
  return run_checks(select_checks(suite, only), {seed, budget}, log);
}

inline int verify_exit_code(const std::vector<StatReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const StatReport& r) { return r.pass; }) ? 0 : 1;
}

}  // namespace glsim
