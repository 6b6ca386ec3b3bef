#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glsim/gff.hpp"
#include "glsim/harmonic.hpp"
#include "glsim/lattice.hpp"
#include "glsim/parallel.hpp"
#include "glsim/stats.hpp"

namespace glsim {

inline std::string site_string(Site s) {
  std::ostringstream os;
  os << '(' << s.x << ',' << s.y << ')';
  return os.str();
}

/// Boundary sites of a simply connected square-lattice domain in clockwise order, found by
/// following the outer contour of the union of unit cells centred at interior sites.
inline std::vector<int> boundary_cycle(const Domain& d) {
  require(d.stencil() == Stencil::square && !d.empty(), "boundary_cycle: needs a non-empty square domain");
  struct Edge {
    Site end;  // doubled coordinates
    Site outside;
  };
  // Doubled-coordinate corners; each face is directed so the cell lies on its right.
  std::map<Site, std::vector<Edge>> out;
  Site start{0, 0};
  Site top = d.interior()[0];
  for (const Site& p : d.interior()) {
    if (p.y > top.y || (p.y == top.y && p.x < top.x)) top = p;
    const int x = 2 * p.x, y = 2 * p.y;
    const Site faces[4][3] = {{{0, 1}, {x - 1, y + 1}, {x + 1, y + 1}},
                              {{1, 0}, {x + 1, y + 1}, {x + 1, y - 1}},
                              {{0, -1}, {x + 1, y - 1}, {x - 1, y - 1}},
                              {{-1, 0}, {x - 1, y - 1}, {x - 1, y + 1}}};
    for (const auto& f : faces)
      if (!d.in_interior(p + f[0])) out[f[1]].push_back({f[2], p + f[0]});
  }
  start = {2 * top.x - 1, 2 * top.y + 1};

  // At a pinch corner prefer the left-most continuation to stay on the outer contour.
  auto turn_rank = [](Site in, Site next) {
    const long cross = static_cast<long>(in.x) * next.y - static_cast<long>(in.y) * next.x;
    if (cross > 0) return 0;
    if (cross == 0) return 1;
    return 2;
  };
  std::vector<int> seq;
  std::set<std::pair<Site, Site>> used;
  Site corner = start, dir{1, 0};
  do {
    auto it = out.find(corner);
    require(it != out.end(), "boundary_cycle: contour is not closed");
    const Edge* best = nullptr;
    Site best_dir{};
    for (const Edge& e : it->second) {
      if (used.count({corner, e.end})) continue;
      const Site nd{(e.end.x - corner.x) / 2, (e.end.y - corner.y) / 2};
      if (!best || turn_rank(dir, nd) < turn_rank(dir, best_dir)) {
        best = &e;
        best_dir = nd;
      }
    }
    require(best != nullptr, "boundary_cycle: contour is not closed");
    used.insert({corner, best->end});
    const int b = d.index_of(best->outside);
    if (seq.empty() || seq.back() != b) seq.push_back(b);
    corner = best->end;
    dir = best_dir;
  } while (corner != start);
  while (seq.size() > 1 && seq.front() == seq.back()) seq.pop_back();

  std::vector<char> seen(d.num_sites(), 0);
  for (int b : seq) {
    if (seen[static_cast<std::size_t>(b)])
      throw InvalidArgument("boundary_cycle: boundary site " + site_string(d.site(b)) + " visited twice");
    seen[static_cast<std::size_t>(b)] = 1;
  }
  if (seq.size() != d.num_boundary())
    throw InvalidArgument("boundary_cycle: domain is not simply connected");
  return seq;
}

/// Primal bond crossed by the interface, `left` carrying the positive sign relative to the
/// direction of travel.
struct DualEdge {
  Site left;
  Site right;

  friend bool operator==(const DualEdge&, const DualEdge&) = default;
  /// Travel direction: left - right rotated clockwise.
  Site direction() const { return {left.y - right.y, right.x - left.x}; }
  bool horizontal_bond() const { return left.y == right.y; }
  /// Centres of the squares before and after the crossing.
  std::pair<std::array<double, 2>, std::array<double, 2>> dual_endpoints() const {
    const double mx = 0.5 * (left.x + right.x), my = 0.5 * (left.y + right.y);
    const Site t = direction();
    return {{mx - 0.5 * t.x, my - 0.5 * t.y}, {mx + 0.5 * t.x, my + 0.5 * t.y}};
  }
  std::pair<Site, Site> bond_key() const { return std::minmax(left, right); }
};

struct TwoSidedBoundary {
  DomainPtr domain;
  double lambda = 0.0;
  int x = -1, y = -1;
  DualEdge x_star, y_star;
  std::vector<int> cycle;       ///< boundary site indices, clockwise
  std::vector<int> plus_arc;    ///< clockwise from x to y
  std::vector<int> minus_arc;
  std::vector<double> psi;      ///< boundary values in the domain's boundary order

  double value(int site) const { return psi[static_cast<std::size_t>(site) - domain->num_interior()]; }
};

inline bool lattice_adjacent(Site a, Site b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y) == 1; }

inline TwoSidedBoundary make_two_sided(DomainPtr domain, Site x, Site y, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), "make_two_sided: lambda must be positive");
  const int xi = domain->index_of(x), yi = domain->index_of(y);
  require(xi >= 0 && domain->is_boundary(xi), "make_two_sided: x is not a boundary site");
  require(yi >= 0 && domain->is_boundary(yi), "make_two_sided: y is not a boundary site");
  require(xi != yi, "make_two_sided: x and y must differ");

  TwoSidedBoundary t;
  t.domain = domain;
  t.lambda = lambda;
  t.x = xi;
  t.y = yi;
  t.cycle = boundary_cycle(*domain);
  const std::size_t n = t.cycle.size();
  const auto px = static_cast<std::size_t>(std::find(t.cycle.begin(), t.cycle.end(), xi) - t.cycle.begin());
  const auto py = static_cast<std::size_t>(std::find(t.cycle.begin(), t.cycle.end(), yi) - t.cycle.begin());
  for (std::size_t k = px;; k = (k + 1) % n) {
    t.plus_arc.push_back(t.cycle[k]);
    if (k == py) break;
  }
  for (std::size_t k = (py + 1) % n; k != px; k = (k + 1) % n) t.minus_arc.push_back(t.cycle[k]);
  require(!t.minus_arc.empty(), "make_two_sided: minus arc is empty");

  const Site before_x = domain->site(t.cycle[(px + n - 1) % n]);
  const Site after_y = domain->site(t.cycle[(py + 1) % n]);
  require(lattice_adjacent(x, before_x), "make_two_sided: x must not sit at a corner of the boundary cycle");
  require(lattice_adjacent(y, after_y), "make_two_sided: y must not sit at a corner of the boundary cycle");
  t.x_star = {x, before_x};
  t.y_star = {y, after_y};

  t.psi.assign(domain->num_boundary(), -lambda);
  for (int s : t.plus_arc) t.psi[static_cast<std::size_t>(s) - domain->num_interior()] = lambda;
  return t;
}

struct DualPath {
  std::vector<DualEdge> edges;

  std::size_t size() const { return edges.size(); }
  bool empty() const { return edges.empty(); }
};

/// Zero-height interface from x* to y*. The next edge is the first sign change met when
/// rotating around the square ahead: clockwise after a horizontal bond, counterclockwise
/// after a vertical one.
inline DualPath trace(const Field& h, const TwoSidedBoundary& bc) {
  const Domain& d = h.domain();
  require(&d == bc.domain.get() || d.sites() == bc.domain->sites(), "trace: field and boundary live on different domains");
  for (int s : bc.plus_arc)
    require(h[s] > 0.0, "trace: field is not positive on the plus arc at " + site_string(d.site(s)));
  for (int s : bc.minus_arc)
    require(h[s] < 0.0, "trace: field is not negative on the minus arc at " + site_string(d.site(s)));

  // +1 / -1, or 0 for a site outside the domain
  auto sign = [&](Site s) {
    const int i = d.index_of(s);
    if (i < 0) return 0;
    const double v = h[i];
    if (v == 0.0) throw InvalidArgument("trace: zero height at site " + site_string(s));
    return v > 0.0 ? 1 : -1;
  };

  DualPath path;
  std::set<std::pair<Site, Site>> visited;
  DualEdge cur = bc.x_star;
  path.edges.push_back(cur);
  visited.insert(cur.bond_key());
  const std::size_t limit = d.bonds().size() + d.num_boundary() + 2;
  while (!(cur == bc.y_star)) {
    const Site t = cur.direction();
    const Site a = cur.left + t, b = cur.right + t;
    const int sa = sign(a), sb = sign(b);
    // Candidates in clockwise order around the square ahead.
    const std::array<std::pair<bool, DualEdge>, 3> cw{{{sa < 0, {cur.left, a}},
                                                      {sa > 0 && sb < 0, {a, b}},
                                                      {sb > 0, {b, cur.right}}}};
    const DualEdge* pick = nullptr;
    for (int k = 0; k < 3 && !pick; ++k) {
      const auto& c = cw[static_cast<std::size_t>(cur.horizontal_bond() ? k : 2 - k)];
      if (c.first) pick = &c.second;
    }
    if (!pick)
      throw RuntimeError("trace: no continuation after crossing " + site_string(cur.left) + "|" +
                         site_string(cur.right));
    const DualEdge next = *pick;
    if (!visited.insert(next.bond_key()).second)
      throw RuntimeError("trace: dual edge revisited at " + site_string(next.left) + "|" + site_string(next.right));
    path.edges.push_back(next);
    cur = next;
    if (path.size() > limit) throw RuntimeError("trace: path exceeds the number of bonds");
  }
  return path;
}

struct PathCheck {
  bool connected = true;
  bool simple = true;
  bool signs = true;
  bool endpoints = true;
  bool ok() const { return connected && simple && signs && endpoints; }
};

/// Exact check of the interface invariants against the field that produced the path.
inline PathCheck check_path(const DualPath& p, const Field& h, const TwoSidedBoundary& bc) {
  PathCheck c;
  const Domain& d = h.domain();
  c.endpoints = !p.empty() && p.edges.front() == bc.x_star && p.edges.back() == bc.y_star;
  std::set<std::pair<Site, Site>> seen;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const DualEdge& e = p.edges[k];
    const int l = d.index_of(e.left), r = d.index_of(e.right);
    if (!lattice_adjacent(e.left, e.right) || l < 0 || r < 0 || !(h[l] > 0.0) || !(h[r] < 0.0)) c.signs = false;
    if (!seen.insert(e.bond_key()).second) c.simple = false;
    if (k > 0 && p.edges[k - 1].dual_endpoints().second != e.dual_endpoints().first) c.connected = false;
  }
  return c;
}

/// Harmonic function in D minus the first `steps` crossings after x*: +λ on the plus arc
/// and on sites left of the prefix, -λ on the minus arc and on sites right of it. Sites
/// next to the prefix become Dirichlet sites, so the slit is a genuine boundary.
inline Field observable(const DualPath& path, std::size_t steps, const TwoSidedBoundary& bc) {
  const Domain& d = *bc.domain;
  require(!path.empty() && path.edges.front() == bc.x_star, "observable: prefix does not start at x*");
  const std::size_t last = std::min(steps, path.size() - 1);
  std::map<int, double> pinned;
  for (std::size_t k = 0; k <= last; ++k) {
    const int l = d.index_of(path.edges[k].left), r = d.index_of(path.edges[k].right);
    require(l >= 0 && r >= 0, "observable: prefix leaves the domain");
    if (!pinned.emplace(l, bc.lambda).second && pinned[l] != bc.lambda)
      throw InvalidArgument("observable: inconsistent prefix at " + site_string(d.site(l)));
    if (!pinned.emplace(r, -bc.lambda).second && pinned[r] != -bc.lambda)
      throw InvalidArgument("observable: inconsistent prefix at " + site_string(d.site(r)));
  }

  std::vector<double> values(d.num_sites(), 0.0);
  for (std::size_t b = 0; b < d.num_boundary(); ++b) values[d.num_interior() + b] = bc.psi[b];
  std::vector<Site> free;
  for (int i = 0; i < static_cast<int>(d.num_interior()); ++i) {
    if (auto it = pinned.find(i); it != pinned.end())
      values[static_cast<std::size_t>(i)] = it->second;
    else
      free.push_back(d.site(i));
  }
  if (!free.empty()) {
    const auto slit = share(Domain::from_interior(std::move(free)));
    std::vector<double> bv(slit->num_boundary());
    for (std::size_t b = 0; b < bv.size(); ++b)
      bv[b] = values[static_cast<std::size_t>(d.index_of(slit->site(static_cast<int>(slit->num_interior() + b))))];
    const Field inner = solve_dirichlet(slit, bv);
    for (int i = 0; i < static_cast<int>(slit->num_interior()); ++i)
      values[static_cast<std::size_t>(d.index_of(slit->site(i)))] = inner[i];
  }
  return Field(bc.domain, std::move(values));
}

/// Euclidean distance from z to the nearest site touched by the first `steps` crossings.
inline double distance_to_prefix(const DualPath& path, std::size_t steps, Site z) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= std::min(steps, path.size() - 1); ++k)
    for (Site s : {path.edges[k].left, path.edges[k].right})
      best = std::min(best, std::hypot(double(s.x - z.x), double(s.y - z.y)));
  return best;
}

struct MartingaleReport {
  double lambda = 0.0;
  Estimate estimate;            ///< E[f_{t+s}(z) - f_t(z)]
  std::size_t used = 0;
  std::size_t excluded = 0;
  bool too_many_excluded = false;
  bool covers_zero = false;     ///< |estimate| <= 3 se
  bool within_tolerance = false;  ///< |estimate| <= 0.05 λ
  bool pass = false;
};

/// Averages f_{t+s}(z) - f_t(z) over replicas whose prefix of length t+s stays at distance
/// >= min_distance from z. z itself must be at depth >= min_distance.
inline MartingaleReport martingale_diagnostic(const SampleBatch& batch, const TwoSidedBoundary& bc, Site z,
                                              std::size_t t, std::size_t s, double min_distance = 5.0) {
  const Domain& d = *bc.domain;
  const int zi = d.index_of(z);
  require(zi >= 0 && d.is_interior(zi), "martingale_diagnostic: z is not an interior site");
  require(d.depth(zi) >= min_distance, "martingale_diagnostic: z is too close to the boundary");
  const std::size_t n = batch.count();
  std::vector<double> diff(n, 0.0);
  std::vector<char> keep(n, 0);
  parallel_for(n, [&](std::size_t r) {
    const DualPath p = trace(batch.fields[r], bc);
    if (distance_to_prefix(p, t + s, z) < min_distance) return;
    keep[r] = 1;
    if (s == 0) return;
    diff[r] = observable(p, t + s, bc)[zi] - observable(p, t, bc)[zi];
  });
  MartingaleReport m;
  m.lambda = bc.lambda;
  std::vector<double> kept;
  for (std::size_t r = 0; r < n; ++r)
    if (keep[r]) kept.push_back(diff[r]);
  m.used = kept.size();
  m.excluded = n - m.used;
  m.too_many_excluded = 2 * m.excluded > n;
  if (kept.size() >= 2) m.estimate = series_estimate(kept);
  m.covers_zero = std::abs(m.estimate.value) <= 3.0 * m.estimate.se;
  m.within_tolerance = std::abs(m.estimate.value) <= 0.05 * bc.lambda;
  m.pass = !m.too_many_excluded && (m.covers_zero || m.within_tolerance);
  return m;
}

/// DGFF replicas with two-sided data: the zero-boundary field plus the harmonic extension
/// of ψ, so every λ shares the same Gaussian noise.
inline SampleBatch two_sided_dgff(const std::shared_ptr<const LaplacianSolver>& solver, const TwoSidedBoundary& bc,
                                  std::size_t count, std::uint64_t seed, std::uint64_t stream = 0) {
  return sample_dgff(solver, bc.psi, count, seed, stream);
}

struct CalibrationPoint {
  double lambda = 0.0;
  MartingaleReport report;
};

struct LambdaCalibration {
  std::vector<CalibrationPoint> grid;
  double best = 0.0;  ///< grid λ minimising |estimate| / λ
};

inline LambdaCalibration calibrate_lambda(const std::vector<double>& grid,
                                          const std::function<MartingaleReport(double)>& diagnose) {
  require(!grid.empty(), "calibrate_lambda: empty grid");
  LambdaCalibration c;
  double score = std::numeric_limits<double>::infinity();
  for (double l : grid) {
    c.grid.push_back({l, diagnose(l)});
    const double sc = std::abs(c.grid.back().report.estimate.value) / l;
    if (sc < score) {
      score = sc;
      c.best = l;
    }
  }
  return c;
}

}  // namespace glsim
