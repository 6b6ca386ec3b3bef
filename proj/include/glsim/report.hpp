#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glsim/error.hpp"
#include "glsim/stats.hpp"

namespace glsim {

struct StatReport {
  std::string name;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool pass = false;
  std::string paper_ref;
  std::string suite;
  std::string detail;  ///< free-form context (thresholds, counts); JSON only
};

/// Deterministic check: no standard error, degenerate interval.
inline StatReport exact_report(std::string name, double value, bool pass, std::string ref, std::string detail = {}) {
  return {std::move(name), value, 0.0, value, value, pass, std::move(ref), {}, std::move(detail)};
}

/// Estimate with a ±sigmas·se interval.
inline StatReport stat_report(std::string name, const Estimate& e, double sigmas, bool pass, std::string ref,
                              std::string detail = {}) {
  return {std::move(name), e.value, e.se, e.value - sigmas * e.se, e.value + sigmas * e.se, pass, std::move(ref),
          {}, std::move(detail)};
}

inline StatReport crash_report(std::string name, const std::string& what, std::string ref) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {std::move(name), nan, nan, nan, nan, false, std::move(ref), {}, "crashed: " + what};
}

inline nlohmann::json to_json(const StatReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"name", r.name},         {"estimate", num(r.estimate)}, {"stderr", num(r.stderr_)},
          {"ci_low", num(r.ci_low)}, {"ci_high", num(r.ci_high)},  {"pass", r.pass},
          {"paper_ref", r.paper_ref}, {"suite", r.suite},          {"detail", r.detail}};
}

inline StatReport report_from_json(const nlohmann::json& j) {
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  StatReport r;
  r.name = j.at("name").get<std::string>();
  r.estimate = num(j.at("estimate"));
  r.stderr_ = num(j.at("stderr"));
  r.ci_low = num(j.at("ci_low"));
  r.ci_high = num(j.at("ci_high"));
  r.pass = j.at("pass").get<bool>();
  r.paper_ref = j.at("paper_ref").get<std::string>();
  r.suite = j.value("suite", "");
  r.detail = j.value("detail", "");
  return r;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_reports_csv(std::ostream& os, const std::vector<StatReport>& reports) {
  os << "name,estimate,stderr,ci_low,ci_high,pass,paper_ref\n" << std::setprecision(17);
  for (const auto& r : reports)
    os << csv_field(r.name) << ',' << r.estimate << ',' << r.stderr_ << ',' << r.ci_low << ',' << r.ci_high << ','
       << (r.pass ? "true" : "false") << ',' << csv_field(r.paper_ref) << '\n';
}

inline void write_reports_json(std::ostream& os, const std::vector<StatReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  os << arr.dump(2) << '\n';
}

/// Writes reports.json and reports.csv into dir (created if needed).
inline void write_reports(const std::filesystem::path& dir, const std::vector<StatReport>& reports) {
  std::filesystem::create_directories(dir);
  std::ofstream js(dir / "reports.json"), cs(dir / "reports.csv");
  if (!js || !cs) throw RuntimeError("cannot write reports into " + dir.string());
  write_reports_json(js, reports);
  write_reports_csv(cs, reports);
}

}  // namespace glsim
