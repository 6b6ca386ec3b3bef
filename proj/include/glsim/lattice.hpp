#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glsim/error.hpp"

namespace glsim {

struct Site {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(const Site&, const Site&) = default;
  /// Row-major order: by y, then by x.
  friend constexpr std::strong_ordering operator<=>(const Site& a, const Site& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
  friend constexpr Site operator+(Site a, Site b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Site operator-(Site a, Site b) { return {a.x - b.x, a.y - b.y}; }
};

enum class Orientation : std::uint8_t { horizontal, vertical };

/// Undirected nearest-neighbour bond stored in canonical orientation:
/// to - from is (1,0) for horizontal and (0,1) for vertical bonds.
/// The gradient across the bond is h(to) - h(from).
struct Bond {
  Site from;
  Site to;
  Orientation orientation = Orientation::horizontal;
  int from_index = -1;
  int to_index = -1;
};

/// Neighbour structure. `square` is Z^2; `chain` is the one-dimensional path graph
/// embedded on the x-axis (used for the path-graph oracles).
enum class Stencil : std::uint8_t { square, chain };

/// Finite domain D of the lattice: interior sites, the edge-adjacent exterior ring as
/// boundary, and D* (every bond with at least one interior endpoint).
///
/// Sites are indexed densely: interior sites occupy [0, num_interior()) in row-major
/// order, boundary sites follow in row-major order.
class Domain {
 public:
  Domain() = default;

  static Domain from_interior(std::vector<Site> interior, Stencil stencil = Stencil::square) {
    Domain d;
    d.stencil_ = stencil;
    d.offsets_ = stencil_offsets(stencil);
    std::sort(interior.begin(), interior.end());
    interior.erase(std::unique(interior.begin(), interior.end()), interior.end());
    d.n_interior_ = static_cast<int>(interior.size());

    std::vector<Site> boundary;
    if (!interior.empty()) {
      // Membership lookup for the interior while the boundary is unknown.
      const auto [lo, hi] = bounding_box(interior, 1);
      std::vector<char> inside(static_cast<std::size_t>((hi.x - lo.x + 1) * (hi.y - lo.y + 1)), 0);
      const auto slot = [&](Site s) {
        return static_cast<std::size_t>((s.y - lo.y) * (hi.x - lo.x + 1) + (s.x - lo.x));
      };
      for (const Site& s : interior) inside[slot(s)] = 1;
      for (const Site& s : interior) {
        for (const Site& off : d.offsets_) {
          const Site t = s + off;
          if (!inside[slot(t)]) boundary.push_back(t);
        }
      }
      std::sort(boundary.begin(), boundary.end());
      boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
    }
    d.n_boundary_ = static_cast<int>(boundary.size());
    d.sites_ = std::move(interior);
    d.sites_.insert(d.sites_.end(), boundary.begin(), boundary.end());
    d.build_index();
    d.build_bonds();
    d.build_adjacency();
    d.build_depth();
    return d;
  }

  Stencil stencil() const { return stencil_; }
  int degree() const { return static_cast<int>(offsets_.size()); }
  std::span<const Site> offsets() const { return offsets_; }

  bool empty() const { return n_interior_ == 0; }
  std::size_t num_interior() const { return static_cast<std::size_t>(n_interior_); }
  std::size_t num_boundary() const { return static_cast<std::size_t>(n_boundary_); }
  std::size_t num_sites() const { return sites_.size(); }

  const std::vector<Site>& sites() const { return sites_; }
  std::span<const Site> interior() const { return {sites_.data(), num_interior()}; }
  std::span<const Site> boundary() const {
    return {sites_.data() + n_interior_, num_boundary()};
  }
  const Site& site(int index) const { return sites_[static_cast<std::size_t>(index)]; }

  bool is_interior(int index) const { return index >= 0 && index < n_interior_; }
  bool is_boundary(int index) const { return index >= n_interior_; }

  /// Dense index of a site, or -1 when the site is neither interior nor boundary.
  int index_of(Site s) const {
    if (sites_.empty()) return -1;
    if (s.x < lo_.x || s.x > hi_.x || s.y < lo_.y || s.y > hi_.y) return -1;
    return index_[static_cast<std::size_t>((s.y - lo_.y) * width_ + (s.x - lo_.x))];
  }
  bool contains(Site s) const { return index_of(s) >= 0; }
  bool in_interior(Site s) const { return is_interior(index_of(s)); }

  /// D*: all bonds with at least one interior endpoint.
  const std::vector<Bond>& bonds() const { return bonds_; }
  /// Indices (into bonds()) of the bonds with exactly one interior endpoint.
  const std::vector<int>& boundary_bonds() const { return boundary_bonds_; }

  /// Neighbours of an interior site, one per stencil offset, as dense site indices.
  std::span<const int> neighbors(int interior_index) const {
    return {adjacency_.data() + static_cast<std::size_t>(interior_index) * offsets_.size(),
            offsets_.size()};
  }
  /// Bond indices aligned with neighbors().
  std::span<const int> neighbor_bonds(int interior_index) const {
    return {adjacency_bonds_.data() + static_cast<std::size_t>(interior_index) * offsets_.size(),
            offsets_.size()};
  }

  /// Graph distance to the boundary through interior sites: 0 on the boundary, 1 for
  /// interior sites adjacent to it.
  int depth(int index) const { return depth_[static_cast<std::size_t>(index)]; }
  /// max(depth(from), depth(to)); bonds of the r-fold erosion D(r)* have level > r.
  int bond_level(const Bond& b) const { return std::max(depth(b.from_index), depth(b.to_index)); }

  bool is_connected() const {
    if (n_interior_ == 0) return true;
    std::vector<char> seen(num_interior(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    int count = 1;
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      for (int j : neighbors(i)) {
        if (is_interior(j) && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          ++count;
          queue.push_back(j);
        }
      }
    }
    return count == n_interior_;
  }

 private:
  static std::vector<Site> stencil_offsets(Stencil stencil) {
    if (stencil == Stencil::chain) return {{1, 0}, {-1, 0}};
    return {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  }

  static std::pair<Site, Site> bounding_box(const std::vector<Site>& sites, int pad) {
    Site lo = sites.front();
    Site hi = sites.front();
    for (const Site& s : sites) {
      lo.x = std::min(lo.x, s.x);
      lo.y = std::min(lo.y, s.y);
      hi.x = std::max(hi.x, s.x);
      hi.y = std::max(hi.y, s.y);
    }
    return {{lo.x - pad, lo.y - pad}, {hi.x + pad, hi.y + pad}};
  }

  void build_index() {
    if (sites_.empty()) return;
    std::tie(lo_, hi_) = bounding_box(sites_, 0);
    width_ = hi_.x - lo_.x + 1;
    index_.assign(static_cast<std::size_t>(width_ * (hi_.y - lo_.y + 1)), -1);
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      const Site& s = sites_[i];
      index_[static_cast<std::size_t>((s.y - lo_.y) * width_ + (s.x - lo_.x))] =
          static_cast<int>(i);
    }
  }

  void build_bonds() {
    std::vector<int> order(sites_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return site(a) < site(b); });
    const bool chain = stencil_ == Stencil::chain;
    for (int i : order) {
      const Site s = site(i);
      for (int dir = 0; dir < (chain ? 1 : 2); ++dir) {
        const Site t = s + (dir == 0 ? Site{1, 0} : Site{0, 1});
        const int j = index_of(t);
        if (j < 0 || (!is_interior(i) && !is_interior(j))) continue;
        bonds_.push_back({s, t, dir == 0 ? Orientation::horizontal : Orientation::vertical, i, j});
        if (is_interior(i) != is_interior(j)) {
          boundary_bonds_.push_back(static_cast<int>(bonds_.size()) - 1);
        }
      }
    }
  }

  void build_adjacency() {
    const std::size_t deg = offsets_.size();
    adjacency_.assign(num_interior() * deg, -1);
    adjacency_bonds_.assign(num_interior() * deg, -1);
    for (int i = 0; i < n_interior_; ++i) {
      for (std::size_t k = 0; k < deg; ++k) {
        adjacency_[static_cast<std::size_t>(i) * deg + k] = index_of(site(i) + offsets_[k]);
      }
    }
    for (std::size_t b = 0; b < bonds_.size(); ++b) {
      const Bond& bond = bonds_[b];
      for (int end = 0; end < 2; ++end) {
        const int here = end == 0 ? bond.from_index : bond.to_index;
        const int there = end == 0 ? bond.to_index : bond.from_index;
        if (!is_interior(here)) continue;
        for (std::size_t k = 0; k < deg; ++k) {
          if (adjacency_[static_cast<std::size_t>(here) * deg + k] == there) {
            adjacency_bonds_[static_cast<std::size_t>(here) * deg + k] = static_cast<int>(b);
          }
        }
      }
    }
  }

  void build_depth() {
    depth_.assign(sites_.size(), -1);
    std::deque<int> queue;
    for (int i = n_interior_; i < static_cast<int>(sites_.size()); ++i) {
      depth_[static_cast<std::size_t>(i)] = 0;
      queue.push_back(i);
    }
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      for (const Site& off : offsets_) {
        const int j = index_of(site(i) + off);
        if (j < 0 || !is_interior(j) || depth_[static_cast<std::size_t>(j)] >= 0) continue;
        depth_[static_cast<std::size_t>(j)] = depth_[static_cast<std::size_t>(i)] + 1;
        queue.push_back(j);
      }
    }
  }

  Stencil stencil_ = Stencil::square;
  std::vector<Site> offsets_ = stencil_offsets(Stencil::square);
  int n_interior_ = 0;
  int n_boundary_ = 0;
  std::vector<Site> sites_;
  Site lo_{};
  Site hi_{};
  int width_ = 0;
  std::vector<int> index_;
  std::vector<Bond> bonds_;
  std::vector<int> boundary_bonds_;
  std::vector<int> adjacency_;
  std::vector<int> adjacency_bonds_;
  std::vector<int> depth_;
};

using DomainPtr = std::shared_ptr<const Domain>;

inline DomainPtr share(Domain d) { return std::make_shared<const Domain>(std::move(d)); }

/// Interior [0, width) x [0, height).
inline Domain build_rectangle(int width, int height) {
  require(width >= 1 && height >= 1, "build_rectangle: dimensions must be positive");
  std::vector<Site> interior;
  interior.reserve(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) interior.push_back({x, y});
  return Domain::from_interior(std::move(interior));
}

/// Integer sites strictly inside the disk of radius radius * scale about the origin.
inline Domain build_disk(double radius, int scale) {
  require(radius > 0.0 && scale >= 1, "build_disk: radius and scale must be positive");
  const double r = radius * scale;
  const int bound = static_cast<int>(std::ceil(r));
  std::vector<Site> interior;
  for (int y = -bound; y <= bound; ++y)
    for (int x = -bound; x <= bound; ++x)
      if (static_cast<double>(x) * x + static_cast<double>(y) * y < r * r) interior.push_back({x, y});
  require(!interior.empty(), "build_disk: empty interior");
  return Domain::from_interior(std::move(interior));
}

/// Path graph with interior {1..n} and boundary {0, n+1} on the x-axis.
inline Domain build_path(int n) {
  require(n >= 1, "build_path: need at least one interior site");
  std::vector<Site> interior;
  for (int x = 1; x <= n; ++x) interior.push_back({x, 0});
  return Domain::from_interior(std::move(interior), Stencil::chain);
}

/// Peels r layers: keeps interior sites at graph distance > r from the boundary, so
/// erode(D, 0) == D and erode(erode(D, r), s) == erode(D, r + s). The result may be empty.
inline Domain erode(const Domain& domain, int r) {
  require(r >= 0, "erode: radius must be nonnegative");
  if (r == 0) return domain;
  std::vector<Site> kept;
  for (int i = 0; i < static_cast<int>(domain.num_interior()); ++i)
    if (domain.depth(i) > r) kept.push_back(domain.site(i));
  return Domain::from_interior(std::move(kept), domain.stencil());
}

inline nlohmann::json sites_to_json(std::span<const Site> sites) {
  auto arr = nlohmann::json::array();
  for (const Site& s : sites) arr.push_back({s.x, s.y});
  return arr;
}

inline nlohmann::json to_json(const Domain& d) {
  return {{"interior", sites_to_json(d.interior())},
          {"boundary", sites_to_json(d.boundary())},
          {"stencil", d.stencil() == Stencil::chain ? "chain" : "square"}};
}

inline Domain domain_from_json(const nlohmann::json& j) {
  std::vector<Site> interior;
  for (const auto& p : j.at("interior")) interior.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  const Stencil stencil =
      j.value("stencil", std::string("square")) == "chain" ? Stencil::chain : Stencil::square;
  Domain d = Domain::from_interior(std::move(interior), stencil);
  if (j.contains("boundary")) {
    std::vector<Site> boundary;
    for (const auto& p : j.at("boundary")) boundary.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    std::sort(boundary.begin(), boundary.end());
    if (!std::equal(boundary.begin(), boundary.end(), d.boundary().begin(), d.boundary().end()))
      throw InvalidArgument("domain JSON: boundary does not match the interior");
  }
  return d;
}

/// Parses "rect:WxH", "disk:RADIUS:SCALE" or "path:N".
inline Domain parse_domain_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  std::vector<double> nums;
  try {
    std::size_t pos = 0;
    while (pos < rest.size()) {
      const auto end = rest.find_first_of("x:", pos);
      nums.push_back(std::stod(rest.substr(pos, end - pos)));
      if (end == std::string::npos) break;
      pos = end + 1;
    }
  } catch (const std::exception&) {
    nums.clear();
  }
  if (kind == "rect" && nums.size() == 2)
    return build_rectangle(static_cast<int>(nums[0]), static_cast<int>(nums[1]));
  if (kind == "disk" && (nums.size() == 1 || nums.size() == 2))
    return build_disk(nums[0], nums.size() == 2 ? static_cast<int>(nums[1]) : 1);
  if (kind == "path" && nums.size() == 1) return build_path(static_cast<int>(nums[0]));
  throw InvalidArgument("unrecognized domain spec '" + spec + "' (rect:WxH | disk:R:S | path:N)");
}

}  // namespace glsim
