#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "glsim/clt.hpp"
#include "glsim/config.hpp"
#include "glsim/coupling.hpp"
#include "glsim/gff.hpp"
#include "glsim/hswalk.hpp"
#include "glsim/interface.hpp"
#include "glsim/report.hpp"
#include "glsim/verify.hpp"

namespace fs = std::filesystem;
using namespace glsim;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out = "out";
};

/// Where a subcommand writes: `--out x.csv` names the data file (reports beside it), any other
/// path is a directory holding `default_name` and the reports.
struct OutputPaths {
  fs::path data;
  fs::path dir;
};

OutputPaths resolve_out(const Globals& g, const std::string& local, const std::string& default_name) {
  const fs::path p = local.empty() ? fs::path(g.out) : fs::path(local);
  OutputPaths o;
  if (p.has_extension()) {
    o.data = p;
    o.dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  } else {
    o.dir = p;
    o.data = p / default_name;
  }
  fs::create_directories(o.dir);
  return o;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw RuntimeError("cannot write " + p.string());
  os.precision(17);
  return os;
}

ExperimentConfig base_config(const std::string& path, const Globals& g) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
  if (g.seed) c.seed = *g.seed;
  return c;
}

Site parse_site(const std::string& s) {
  int x = 0, y = 0;
  char comma = 0;
  std::istringstream is(s);
  if (!(is >> x >> comma >> y) || comma != ',') throw InvalidArgument("expected X,Y but got '" + s + "'");
  return {x, y};
}

double parse_fraction(const std::string& s) {
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return std::stod(s);
    return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad number '" + s + "'");
  }
}

void write_field_rows(std::ostream& os, std::size_t replica, const Field& f, std::optional<double> time) {
  const Domain& d = f.domain();
  for (std::size_t i = 0; i < d.num_interior(); ++i) {
    const Site s = d.site(static_cast<int>(i));
    os << replica << ',';
    if (time) os << *time << ',';
    os << s.x << ',' << s.y << ',' << f[static_cast<int>(i)] << '\n';
  }
}

std::string site_label(const Domain& d, int i) {
  const Site s = d.site(i);
  return "(" + std::to_string(s.x) + "," + std::to_string(s.y) + ")";
}

int finish(const fs::path& dir, const std::vector<StatReport>& reports) {
  write_reports(dir, reports);
  for (const auto& r : reports)
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  " << r.estimate << " +- " << r.stderr_ << '\n';
  return 0;
}

// ---------------------------------------------------------------- subcommands

int cmd_dgff(const Globals& g, const std::string& config, const std::string& domain, std::optional<std::size_t> count,
             std::optional<double> psi, const std::string& out) {
  ExperimentConfig c = base_config(config, g);
  if (!domain.empty()) c.domain = domain;
  if (count) c.count = *count;
  if (psi) c.psi = *psi;
  const auto d = c.make_domain();
  const auto solver = std::make_shared<const LaplacianSolver>(d);
  const auto batch = sample_dgff(solver, c.make_psi(*d), c.count, c.seed, substream("dgff", 0));
  const auto o = resolve_out(g, out, "dgff.csv");
  auto os = open_out(o.data);
  os << "replica,site_x,site_y,value\n";
  for (std::size_t k = 0; k < batch.count(); ++k) write_field_rows(os, k, batch.fields[k], std::nullopt);

  // variance at the most central site against G
  int centre = 0;
  for (std::size_t i = 0; i < d->num_interior(); ++i)
    if (d->depth(static_cast<int>(i)) > d->depth(centre)) centre = static_cast<int>(i);
  const auto series = batch.site_series(centre);
  const double m = mean(series);
  std::vector<double> sq;
  for (double v : series) sq.push_back((v - m) * (v - m));
  const Estimate var = mean_estimate(sq);
  const double target = solver->solve(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(solver->size()), centre))[centre];
  return finish(o.dir, {stat_report("DGFF variance at " + site_label(*d, centre), var, 3.0, var.covers(target, 3.0),
                                    "Green's function covariance of the DGFF", "G(x,x) = " + std::to_string(target))});
}

int cmd_langevin(const Globals& g, const std::string& config, const std::string& out) {
  const ExperimentConfig c = base_config(config, g);
  const RunConfig rc = c.make_run();
  const auto r = run(rc);
  const auto o = resolve_out(g, out, "samples.csv");
  auto os = open_out(o.data);
  os << "replica,time,site_x,site_y,value\n";
  const std::size_t per = r.batch.count() / static_cast<std::size_t>(std::max(1, rc.chains));
  const auto& dg = r.diagnostics;
  for (std::size_t k = 0; k < r.batch.count(); ++k) {
    const double time = static_cast<double>(dg.burnin + static_cast<long>(k % per + 1) * dg.thin) * dg.dt;
    write_field_rows(os, k, r.batch.fields[k], time);
  }
  const Domain& d = *rc.domain;
  int centre = 0;
  for (std::size_t i = 0; i < d.num_interior(); ++i)
    if (d.depth(static_cast<int>(i)) > d.depth(centre)) centre = static_cast<int>(i);
  std::vector<StatReport> reps;
  if (rc.bands->unconstrained(static_cast<std::size_t>(centre))) {
    const auto fb = flow_balance(r.batch, rc.potential, centre);
    reps.push_back(stat_report("flow balance at " + site_label(d, centre), fb, 3.0, fb.covers(0.0, 3.0),
                               "expectation symmetry lemma"));
  }
  reps.push_back(exact_report("R-hat across chains", dg.rhat, dg.rhat < 1.1, "batch means harness",
                              "tau " + std::to_string(dg.tau) + ", burnin " + std::to_string(dg.burnin) + ", thin " +
                                  std::to_string(dg.thin)));
  return finish(o.dir, reps);
}

int cmd_couple(const Globals& g, const std::string& config, const std::string& out) {
  const ExperimentConfig c = base_config(config, g);
  const auto d = c.make_domain();
  const Potential p = c.make_potential();
  const LaplacianSolver solver(d);
  RunConfig ra = c.make_run(), rb = ra;
  ra.domain = rb.domain = d;
  rb.psi.assign(d->num_boundary(), c.psi_b);
  CoupledState cs{initial_state(ra, solver), initial_state(rb, solver)};
  const double dt = resolved_dt(ra);
  const NoiseStream na(c.seed, substream("couple", 0));
  const NoiseStream nb = c.shared_noise ? na : NoiseStream(c.seed, substream("couple", 1));
  const bool ordered_start = domination_precondition(cs);
  std::vector<StepRecord> rec(c.steps);
  for (auto& r : rec) step_coupled(cs, dt, na, nb, &r);
  const auto o = resolve_out(g, out, "ledger.csv");
  auto os = open_out(o.data);
  write_ledger_csv(os, rec);
  const auto chk = check_records(rec, p);
  const auto e = energy_ledger(rec, p);
  std::vector<StatReport> reps{
      exact_report("band invariant", chk.bands, chk.bands, "conditioned dynamics"),
      exact_report("conductances within [a, A]", chk.conductance, chk.conductance, "difference dynamics conductances"),
      exact_report("energy inequality lhs - rhs", e.lhs - e.rhs, !e.violated, "energy inequality")};
  if (c.psi == c.psi_b && c.psi_file.empty())
    reps.push_back(exact_report("l2 contraction", chk.contraction, chk.contraction, "stationary coupling of two solutions"));
  if (ordered_start) {
    const auto first = domination_monitor(rec);
    reps.push_back(exact_report("order preservation (first violating step, -1 if none)",
                                first ? static_cast<double>(*first) : -1.0, !first, "stochastic domination lemma"));
  }
  return finish(o.dir, reps);
}

int cmd_hswalk(const Globals& g, const std::string& config, const std::string& env_path, const std::string& from,
               std::optional<std::size_t> walks, const std::string& record, std::size_t record_steps,
               const std::string& out) {
  const ExperimentConfig c = base_config(config, g);
  if (!record.empty()) {
    RunConfig rc = c.make_run();
    EnvironmentStream stream(rc, 0);
    std::ofstream os(record, std::ios::binary);
    if (!os) throw RuntimeError("cannot write " + record);
    write_environment(os, stream.next(record_steps));
    std::cout << "recorded " << record_steps << " steps to " << record << '\n';
    return 0;
  }
  require(!env_path.empty(), "hswalk: --env is required (or --record to create one)");
  std::ifstream is(env_path, std::ios::binary);
  if (!is) throw RuntimeError("cannot read " + env_path);
  const Environment env = read_environment(is);
  const Domain& d = env.domain();
  const Site x0s = from.empty() ? Site{c.from[0], c.from[1]} : parse_site(from);
  const int x0 = d.index_of(x0s);
  require(x0 >= 0 && d.is_interior(x0), "hswalk: --from must be an interior site");
  const std::size_t n = walks.value_or(c.walks);
  const auto o = resolve_out(g, out, "exits.csv");
  auto os = open_out(o.data);
  os << "walk,exit_x,exit_y,exit_time\n";
  std::vector<double> counts(d.num_boundary(), 0.0);
  std::size_t absorbed = 0;
  for (std::size_t w = 0; w < n; ++w) {
    Rng rng = walk_rng(c.seed, substream("hswalk-cli", 0), 0, w);
    const WalkExit e = walk_core(env, x0, 0.0, env.horizon(), rng, [](int, double, double) {});
    os << w << ',';
    if (e.absorbed()) {
      const Site s = d.site(e.site);
      os << s.x << ',' << s.y << ',' << e.time << '\n';
      counts[static_cast<std::size_t>(e.site) - d.num_interior()] += 1.0;
      ++absorbed;
    } else {
      os << ",,\n";
    }
  }
  std::vector<StatReport> reps{exact_report("absorbed fraction", static_cast<double>(absorbed) / static_cast<double>(n),
                                            absorbed == n, "HS representation of the mean")};
  if (absorbed > 0) {
    for (double& v : counts) v /= static_cast<double>(absorbed);
    const LaplacianSolver solver(env.domain_ptr());
    const auto ref = harmonic_measure(solver, x0);
    const double tv = total_variation(counts, ref);
    const auto null = null_tv_distribution(ref, absorbed, 400, c.seed);
    std::vector<double> sorted = null;
    std::sort(sorted.begin(), sorted.end());
    const double q = sorted[static_cast<std::size_t>(0.999 * static_cast<double>(sorted.size() - 1))];
    reps.push_back(exact_report("exit law TV to harmonic measure", tv, tv <= q, "walk exit law and harmonic measure",
                                "null 99.9% quantile " + std::to_string(q)));
  }
  return finish(o.dir, reps);
}

/// Reads replica,[time,]site_x,site_y,value rows; the listed sites form the interior.
SampleBatch read_samples(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeError("cannot read " + path);
  std::string header;
  std::getline(is, header);
  const bool has_time = header.find("time") != std::string::npos;
  struct Row {
    std::size_t replica;
    Site s;
    double v;
  };
  std::vector<Row> rows;
  std::vector<Site> sites;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Row r{};
    double time = 0.0;
    if (!(ls >> r.replica) || (has_time && !(ls >> time)) || !(ls >> r.s.x >> r.s.y >> r.v))
      throw InvalidArgument("samples: bad line '" + line + "'");
    rows.push_back(r);
    sites.push_back(r.s);
  }
  require(!rows.empty(), "samples: no rows");
  const auto d = share(Domain::from_interior(sites));
  std::size_t replicas = 0;
  for (const Row& r : rows) replicas = std::max(replicas, r.replica + 1);
  SampleBatch b{d, std::vector<Field>(replicas, Field(d)), 0, 0, "csv"};
  for (const Row& r : rows) b.fields[r.replica][d->index_of(r.s)] = r.v;
  return b;
}

int cmd_clt(const Globals& g, const std::string& samples, const std::string& testfn, const std::string& epsilon,
            std::optional<double> rho, const std::string& out) {
  require(testfn == "bump", "clt: only --testfn bump is available");
  const SampleBatch batch = read_samples(samples);
  const Domain& d = *batch.domain;
  const double eps = parse_fraction(epsilon);
  Site lo = d.interior()[0], hi = lo;
  for (const Site& s : d.interior()) {
    lo = {std::min(lo.x, s.x), std::min(lo.y, s.y)};
    hi = {std::max(hi.x, s.x), std::max(hi.y, s.y)};
  }
  const double cx = eps * 0.5 * (lo.x + hi.x + 1), cy = eps * 0.5 * (lo.y + hi.y + 1);
  const double r = rho.value_or(0.3 * eps * (std::min(hi.x - lo.x, hi.y - lo.y) + 1));
  const auto w = functional_weights(d, bump(cx, cy, r), eps);
  std::vector<double> xi;
  for (const Field& f : batch.fields) xi.push_back(field_functional(f, w));
  const auto o = resolve_out(g, out, "xi.csv");
  auto os = open_out(o.data);
  os << "replica,xi\n";
  for (std::size_t k = 0; k < xi.size(); ++k) os << k << ',' << xi[k] << '\n';
  const double m = mean(xi);
  std::vector<double> sq;
  for (double v : xi) sq.push_back((v - m) * (v - m));
  const LaplacianSolver solver(batch.domain);
  const double dgff = dgff_functional_variance(solver, w);
  const Estimate var = mean_estimate(sq);
  std::vector<StatReport> reps{stat_report("functional variance (DGFF value for reference)", var, 3.0, true,
                                           "Gaussian limit of the rescaled field", "DGFF " + std::to_string(dgff))};
  if (xi.size() >= 500) {
    const auto ad = gaussianity_test(xi);
    reps.push_back(exact_report("Anderson-Darling A2*", ad.a2_star, ad.pass, "Gaussian limit of the rescaled field"));
  }
  return finish(o.dir, reps);
}

int cmd_interface(const Globals& g, const std::string& config, bool diag, const std::string& out) {
  const ExperimentConfig c = base_config(config, g);
  const auto d = c.make_domain();
  const auto solver = std::make_shared<const LaplacianSolver>(d);
  const auto bc = make_two_sided(d, {c.x[0], c.x[1]}, {c.y[0], c.y[1]}, c.lambda);
  const auto field = two_sided_dgff(solver, bc, 1, c.seed, substream("interface", 0)).fields[0];
  const auto path = trace(field, bc);
  const auto o = resolve_out(g, out, "path.csv");
  auto os = open_out(o.data);
  os << "step,dual_from_x,dual_from_y,dual_to_x,dual_to_y\n";
  for (std::size_t k = 0; k < path.size(); ++k) {
    const auto [a, b] = path.edges[k].dual_endpoints();
    os << k << ',' << a[0] << ',' << a[1] << ',' << b[0] << ',' << b[1] << '\n';
  }
  const auto chk = check_path(path, field, bc);
  std::vector<StatReport> reps{exact_report("traced path invariants", chk.ok(), chk.ok(), "zero-height interface",
                                            std::to_string(path.size()) + " edges")};
  if (diag) {
    const Site z{c.z[0], c.z[1]};
    const auto batch = two_sided_dgff(solver, bc, c.count, c.seed, substream("interface", 1));
    const auto m = martingale_diagnostic(batch, bc, z, c.t, c.s);
    auto ds = open_out(o.dir / "martingale.csv");
    ds << "lambda,z_x,z_y,t,s,estimate,stderr,used,excluded,pass\n";
    ds << m.lambda << ',' << z.x << ',' << z.y << ',' << c.t << ',' << c.s << ',' << m.estimate.value << ','
       << m.estimate.se << ',' << m.used << ',' << m.excluded << ',' << (m.pass ? "true" : "false") << '\n';
    reps.push_back(stat_report("martingale diagnostic", m.estimate, 3.0, m.pass, "approximate martingale theorem",
                               "used " + std::to_string(m.used) + ", excluded " + std::to_string(m.excluded)));
  }
  return finish(o.dir, reps);
}

int cmd_verify(const Globals& g, const std::string& suite, const std::string& budget, const std::string& check,
               const std::string& out) {
  const auto reports = run_verify(suite, make_budget(budget), g.seed.value_or(1), &std::cout, check);
  const fs::path dir = out.empty() ? fs::path(g.out) : fs::path(out);
  fs::create_directories(dir);
  write_reports(dir, reports);
  const auto failed = std::count_if(reports.begin(), reports.end(), [](const StatReport& r) { return !r.pass; });
  std::cout << reports.size() - static_cast<std::size_t>(failed) << "/" << reports.size() << " passed; reports in "
            << dir.string() << '\n';
  return verify_exit_code(reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ginzburg-Landau gradient field simulator"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Root seed (overrides config)");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "Output directory");

  std::string config, domain, out, env_path, from, record, samples, testfn = "bump", epsilon = "1/32",
                                                                     suite = "all", budget = "default", check;
  std::optional<std::size_t> count, walks;
  std::optional<double> psi, rho;
  std::size_t record_steps = 1000;
  bool diag = false;

  auto* dgff = app.add_subcommand("dgff", "Exact DGFF samples");
  dgff->add_option("--config", config, "TOML config")->check(CLI::ExistingFile);
  dgff->add_option("--domain", domain, "rect:WxH | disk:R:S | path:N");
  dgff->add_option("--count", count, "Replicas");
  dgff->add_option("--psi", psi, "Constant boundary value");
  dgff->add_option("--out", out, "Output CSV or directory");

  auto* langevin = app.add_subcommand("langevin", "Stationary Langevin samples");
  langevin->add_option("--config", config, "TOML config")->check(CLI::ExistingFile);
  langevin->add_option("--out", out, "Output CSV or directory");

  auto* couple = app.add_subcommand("couple", "Coupled pair with per-step energy ledger");
  couple->add_option("--config", config, "TOML config")->check(CLI::ExistingFile);
  couple->add_option("--out", out, "Output CSV or directory");

  auto* hswalk = app.add_subcommand("hswalk", "Walks in a recorded dynamic environment");
  hswalk->add_option("--config", config, "TOML config")->check(CLI::ExistingFile);
  hswalk->add_option("--env", env_path, "Environment file (glenv v1)");
  hswalk->add_option("--from", from, "Start site X,Y");
  hswalk->add_option("--walks", walks, "Number of walks");
  hswalk->add_option("--record", record, "Record an environment from the config to this file instead");
  hswalk->add_option("--record-steps", record_steps, "Steps to record");
  hswalk->add_option("--out", out, "Output CSV or directory");

  auto* clt = app.add_subcommand("clt", "Rescaled field tested against a smooth function");
  clt->add_option("--samples", samples, "Samples CSV from dgff or langevin")->required()->check(CLI::ExistingFile);
  clt->add_option("--testfn", testfn, "Test function (bump)");
  clt->add_option("--epsilon", epsilon, "Mesh size, e.g. 1/32");
  clt->add_option("--rho", rho, "Bump radius in rescaled units");
  clt->add_option("--out", out, "Output CSV or directory");

  auto* iface = app.add_subcommand("interface", "Zero-height interface with two-sided boundary data");
  iface->add_option("--config", config, "TOML config")->check(CLI::ExistingFile);
  iface->add_flag("--diag", diag, "Also run the martingale diagnostic");
  iface->add_option("--out", out, "Output CSV or directory");

  auto* verify = app.add_subcommand("verify", "Acceptance suites");
  verify->add_option("--suite", suite, "exact | quadratic | anharmonic | interface | heatkernel | all");
  verify->add_option("--budget", budget, "default | low");
  verify->add_option("--check", check, "Run a single check by name");
  verify->add_option("--out", out, "Report directory");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;
  set_default_threads(g.threads);

  try {
    if (*dgff) return cmd_dgff(g, config, domain, count, psi, out);
    if (*langevin) return cmd_langevin(g, config, out);
    if (*couple) return cmd_couple(g, config, out);
    if (*hswalk) return cmd_hswalk(g, config, env_path, from, walks, record, record_steps, out);
    if (*clt) return cmd_clt(g, samples, testfn, epsilon, rho, out);
    if (*iface) return cmd_interface(g, config, diag, out);
    if (*verify) return cmd_verify(g, suite, budget, check, out);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
