#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "glsim/dynamics.hpp"
#include "glsim/error.hpp"
#include "glsim/lattice.hpp"
#include "glsim/potential.hpp"

namespace glsim {

/// Everything a subcommand needs; unset keys keep these defaults.
struct ExperimentConfig {
  std::string module;
  std::string domain = "rect:8x8";
  std::string potential = "quadratic";
  std::optional<double> potential_a;
  std::optional<double> potential_A;

  double psi = 0.0;             ///< constant boundary value
  std::string psi_file;         ///< per-site boundary values "x,y,value"; overrides psi
  double psi_b = 0.0;           ///< second boundary for couplings
  std::string bands = "free";   ///< free | positive
  double dt = 0.0;              ///< 0: 0.1 / A
  long burnin = -1;             ///< -1: automatic
  std::size_t samples = 1000;
  long thin = -1;
  int chains = 2;
  std::size_t count = 1000;     ///< replicas for direct samplers
  std::size_t steps = 10000;    ///< coupled steps for the energy ledger
  bool shared_noise = true;
  std::uint64_t seed = 1;
  std::string out = "out";

  // interface
  std::array<int, 2> x{0, -1};
  std::array<int, 2> y{0, 1};
  double lambda = 0.6;
  std::array<int, 2> z{0, 0};
  std::size_t t = 5;
  std::size_t s = 5;

  // hswalk / clt
  std::array<int, 2> from{0, 0};
  std::size_t walks = 1000;
  std::size_t environments = 100;
  double epsilon = 1.0 / 32.0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  DomainPtr make_domain() const { return share(parse_domain_spec(domain)); }

  Potential make_potential() const {
    Potential p = builtin_potential(potential);
    if (potential_a || potential_A) p = p.with_bounds(potential_a.value_or(p.a()), potential_A.value_or(p.A()));
    return p;
  }

  Bands make_bands(const Domain& d) const {
    if (bands == "free") return Bands::free(d.num_interior());
    if (bands == "positive") return Bands::positive(d.num_interior());
    throw InvalidArgument("config: bands must be 'free' or 'positive'");
  }

  /// Boundary values in the domain's boundary order.
  std::vector<double> make_psi(const Domain& d) const {
    std::vector<double> v(d.num_boundary(), psi);
    if (psi_file.empty()) return v;
    std::ifstream in(psi_file);
    if (!in) throw RuntimeError("config: cannot open psi file " + psi_file);
    std::vector<char> seen(d.num_boundary(), 0);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream is(line);
      Site s;
      double value = 0.0;
      if (!(is >> s.x >> s.y >> value)) throw InvalidArgument("config: bad psi line '" + line + "'");
      const int i = d.index_of(s);
      if (i < 0 || !d.is_boundary(i)) throw InvalidArgument("config: psi site is not a boundary site");
      v[static_cast<std::size_t>(i) - d.num_interior()] = value;
      seen[static_cast<std::size_t>(i) - d.num_interior()] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
      throw InvalidArgument("config: psi file does not cover every boundary site");
    return v;
  }

  RunConfig make_run() const {
    RunConfig c;
    c.domain = make_domain();
    c.potential = make_potential();
    c.psi = make_psi(*c.domain);
    c.bands = make_bands(*c.domain);
    c.dt = dt;
    c.burnin = burnin;
    c.samples = samples;
    c.thin = thin;
    c.chains = chains;
    c.seed = seed;
    return c;
  }
};

namespace detail {

template <class T>
void read_into(const toml::table& t, std::string_view key, T& dst) {
  if (const auto* node = t.get(key)) {
    if constexpr (std::is_same_v<T, std::string>) {
      auto v = node->value<std::string>();
      if (!v) throw InvalidArgument("config: '" + std::string(key) + "' must be a string");
      dst = *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      auto v = node->value<bool>();
      if (!v) throw InvalidArgument("config: '" + std::string(key) + "' must be a boolean");
      dst = *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = node->value<double>();
      if (!v) throw InvalidArgument("config: '" + std::string(key) + "' must be a number");
      dst = *v;
    } else {
      auto v = node->value<std::int64_t>();
      if (!v) throw InvalidArgument("config: '" + std::string(key) + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (*v < 0) throw InvalidArgument("config: '" + std::string(key) + "' must be non-negative");
      dst = static_cast<T>(*v);
    }
  }
}

inline void read_pair(const toml::table& t, std::string_view key, std::array<int, 2>& dst) {
  if (const auto* node = t.get(key)) {
    const auto* arr = node->as_array();
    if (!arr || arr->size() != 2 || !arr->get(0)->is_integer() || !arr->get(1)->is_integer())
      throw InvalidArgument("config: '" + std::string(key) + "' must be [x, y]");
    dst = {static_cast<int>(arr->get(0)->value<std::int64_t>().value()),
           static_cast<int>(arr->get(1)->value<std::int64_t>().value())};
  }
}

}  // namespace detail

/// `potential` is either a name or a table {name, a, A}. `psi` is a number or a file path.
/// `seed` may be a string when it does not fit a signed 64-bit integer.
inline ExperimentConfig config_from_toml(const toml::table& t) {
  using detail::read_into;
  using detail::read_pair;
  ExperimentConfig c;
  read_into(t, "module", c.module);
  read_into(t, "domain", c.domain);
  if (const auto* p = t.get("potential")) {
    if (const auto* tbl = p->as_table()) {
      read_into(*tbl, "name", c.potential);
      if (tbl->contains("a")) c.potential_a = tbl->get("a")->value<double>();
      if (tbl->contains("A")) c.potential_A = tbl->get("A")->value<double>();
    } else {
      read_into(t, "potential", c.potential);
    }
  }
  if (const auto* p = t.get("psi")) {
    if (p->is_string())
      c.psi_file = *p->value<std::string>();
    else
      read_into(t, "psi", c.psi);
  }
  read_into(t, "psi_b", c.psi_b);
  read_into(t, "bands", c.bands);
  read_into(t, "dt", c.dt);
  read_into(t, "burnin", c.burnin);
  read_into(t, "samples", c.samples);
  read_into(t, "thin", c.thin);
  read_into(t, "chains", c.chains);
  read_into(t, "count", c.count);
  read_into(t, "steps", c.steps);
  read_into(t, "shared_noise", c.shared_noise);
  if (const auto* s = t.get("seed")) {
    if (s->is_string())
      c.seed = std::stoull(*s->value<std::string>());
    else
      read_into(t, "seed", c.seed);
  }
  read_into(t, "out", c.out);
  read_pair(t, "x", c.x);
  read_pair(t, "y", c.y);
  read_into(t, "lambda", c.lambda);
  read_pair(t, "z", c.z);
  read_into(t, "t", c.t);
  read_into(t, "s", c.s);
  read_pair(t, "from", c.from);
  read_into(t, "walks", c.walks);
  read_into(t, "environments", c.environments);
  read_into(t, "epsilon", c.epsilon);
  (void)c.make_potential();
  return c;
}

inline ExperimentConfig parse_config(std::string_view text) {
  try {
    return config_from_toml(toml::parse(text));
  } catch (const toml::parse_error& e) {
    throw InvalidArgument(std::string("config: ") + std::string(e.description()));
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline toml::table config_to_toml(const ExperimentConfig& c) {
  auto pair = [](const std::array<int, 2>& p) { return toml::array{p[0], p[1]}; };
  toml::table t;
  t.insert("module", c.module);
  t.insert("domain", c.domain);
  if (c.potential_a || c.potential_A) {
    toml::table p{{"name", c.potential}};
    if (c.potential_a) p.insert("a", *c.potential_a);
    if (c.potential_A) p.insert("A", *c.potential_A);
    t.insert("potential", std::move(p));
  } else {
    t.insert("potential", c.potential);
  }
  if (c.psi_file.empty())
    t.insert("psi", c.psi);
  else
    t.insert("psi", c.psi_file);
  t.insert("psi_b", c.psi_b);
  t.insert("bands", c.bands);
  t.insert("dt", c.dt);
  t.insert("burnin", static_cast<std::int64_t>(c.burnin));
  t.insert("samples", static_cast<std::int64_t>(c.samples));
  t.insert("thin", static_cast<std::int64_t>(c.thin));
  t.insert("chains", static_cast<std::int64_t>(c.chains));
  t.insert("count", static_cast<std::int64_t>(c.count));
  t.insert("steps", static_cast<std::int64_t>(c.steps));
  t.insert("shared_noise", c.shared_noise);
  if (c.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    t.insert("seed", std::to_string(c.seed));
  else
    t.insert("seed", static_cast<std::int64_t>(c.seed));
  t.insert("out", c.out);
  t.insert("x", pair(c.x));
  t.insert("y", pair(c.y));
  t.insert("lambda", c.lambda);
  t.insert("z", pair(c.z));
  t.insert("t", static_cast<std::int64_t>(c.t));
  t.insert("s", static_cast<std::int64_t>(c.s));
  t.insert("from", pair(c.from));
  t.insert("walks", static_cast<std::int64_t>(c.walks));
  t.insert("environments", static_cast<std::int64_t>(c.environments));
  t.insert("epsilon", c.epsilon);
  return t;
}

inline std::string config_to_string(const ExperimentConfig& c) {
  std::ostringstream os;
  os << config_to_toml(c) << '\n';
  return os.str();
}

}  // namespace glsim
