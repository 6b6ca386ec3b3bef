// One line per acceptance criterion: every check of the suite must pass within the runtime budget.
#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "glsim/verify.hpp"

using namespace glsim;

int main(int argc, char** argv) {
  CLI::App app{"glsim acceptance criteria"};
  std::uint64_t seed = 1;
  std::string budget_name = "default", out = "acceptance_reports";
  int threads = 0;
  bool strict = false;
  app.add_option("--seed", seed);
  app.add_option("--budget", budget_name);
  app.add_option("--threads", threads);
  app.add_option("--out", out, "Directory for reports.json / reports.csv");
  app.add_flag("--strict", strict, "Exit non-zero when a criterion fails");
  CLI11_PARSE(app, argc, argv);
  set_default_threads(threads);
  const Budget budget = make_budget(budget_name);

  struct Criterion {
    int id;
    std::string suite;
    std::string title;
    double seconds;
  };
  const std::vector<Criterion> criteria{
      {1, "exact", "exact suite", 10.0},
      {2, "quadratic", "quadratic-oracle suite", 300.0},
      {3, "anharmonic", "anharmonic suite", 1800.0},
      {4, "interface", "interface suite", 1800.0},
      {5, "heatkernel", "heat-kernel envelope", 1800.0},
  };

  std::vector<StatReport> all;
  std::vector<std::string> lines;
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto reps = run_verify(c.suite, budget, seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto passed = std::count_if(reps.begin(), reps.end(), [](const StatReport& r) { return r.pass; });
    const bool ok = static_cast<std::size_t>(passed) == reps.size() && secs < c.seconds;
    failed += !ok;
    std::ostringstream line;
    line << (ok ? "PASS" : "FAIL") << "  criterion " << c.id << "  " << c.title << ": " << passed << "/" << reps.size()
         << " checks, " << std::fixed << std::setprecision(1) << secs << " s (limit " << c.seconds << " s)";
    for (const auto& r : reps)
      if (!r.pass) line << "\n        failed: " << r.name << " = " << std::defaultfloat << std::setprecision(6) << r.estimate << "  [" << r.detail << "]";
    lines.push_back(line.str());
    std::cout << lines.back() << '\n' << std::flush;
    all.insert(all.end(), reps.begin(), reps.end());
  }
  std::filesystem::create_directories(out);
  write_reports(out, all);
  std::cout << "\n" << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size()
            << " criteria met (seed " << seed << ", budget " << budget.name << ")\n";
  return strict && failed ? 1 : 0;
}
