#include <sstream>

#include <gtest/gtest.h>

#include "glsim/verify.hpp"

namespace glsim {
namespace {

TEST(Verify, Budgets) {
  EXPECT_EQ(make_budget("default").scale, 1.0);
  EXPECT_EQ(make_budget("default").sigmas, 3.0);
  const Budget low = make_budget("low");
  EXPECT_EQ(low.sigmas, 4.0);
  EXPECT_EQ(low.n(4000, 1000), 1000u);
  EXPECT_EQ(low.n(100, 100), 100u);
  EXPECT_THROW(make_budget("huge"), InvalidArgument);
}

TEST(Verify, SuiteSelection) {
  EXPECT_THROW(select_checks("nonsense"), InvalidArgument);
  EXPECT_THROW(select_checks("exact", "no_such_check"), InvalidArgument);
  std::size_t total = 0;
  for (const auto& s : verify_suites()) total += select_checks(s).size();
  EXPECT_EQ(total, select_checks("all").size());
  for (const auto& c : verify_checks()) EXPECT_FALSE(c.ref.empty()) << c.name;
}

TEST(Verify, CrashIsRecordedAndRunContinues) {
  std::vector<VerifyCheck> checks{
      {"exact", "boom", "nothing", [](const VerifyContext&) -> std::vector<StatReport> { throw RuntimeError("kaput"); }},
      {"exact", "fine", "nothing", [](const VerifyContext&) { return std::vector{exact_report("ok", 1.0, true, "nothing")}; }},
  };
  std::ostringstream log;
  const auto reps = run_checks(checks, {}, &log);
  ASSERT_EQ(reps.size(), 2u);
  EXPECT_FALSE(reps[0].pass);
  EXPECT_TRUE(std::isnan(reps[0].estimate));
  EXPECT_NE(reps[0].detail.find("kaput"), std::string::npos);
  EXPECT_TRUE(reps[1].pass);
  EXPECT_EQ(reps[1].suite, "exact");
  EXPECT_EQ(verify_exit_code(reps), 1);
  EXPECT_EQ(verify_exit_code({reps[1]}), 0);
  EXPECT_NE(log.str().find("FAIL exact/boom"), std::string::npos);
}

TEST(Verify, CheapExactChecksPassAndRepeat) {
  for (const char* name : {"summation_by_parts", "green_path", "dirichlet_residual", "tracer_golden"}) {
    const auto a = run_verify("exact", {}, 1, nullptr, name);
    const auto b = run_verify("exact", {}, 1, nullptr, name);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_TRUE(a[k].pass) << a[k].name << " " << a[k].detail;
      EXPECT_EQ(a[k].estimate, b[k].estimate);
      EXPECT_LE(a[k].ci_low, a[k].estimate);
      EXPECT_LE(a[k].estimate, a[k].ci_high);
    }
  }
}

TEST(Verify, QuadraticPathCheckIsReproducible) {
  const Budget low = make_budget("low");
  const auto a = run_verify("quadratic", low, 5, nullptr, "langevin_path");
  const auto b = run_verify("quadratic", low, 5, nullptr, "langevin_path");
  ASSERT_EQ(a.size(), 9u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].estimate, b[k].estimate);
    EXPECT_EQ(a[k].stderr_, b[k].stderr_);
    EXPECT_TRUE(a[k].pass) << a[k].name << " " << a[k].detail;
  }
}

}  // namespace
}  // namespace glsim
