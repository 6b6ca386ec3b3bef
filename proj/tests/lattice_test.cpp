#include <gtest/gtest.h>

#include "glsim/lattice.hpp"
#include "glsim/rng.hpp"

namespace glsim {
namespace {

std::size_t count_interior_bonds(const Domain& d) {
  std::size_t n = 0;
  for (const Bond& b : d.bonds()) n += d.is_interior(b.from_index) && d.is_interior(b.to_index);
  return n;
}

void expect_domain_invariants(const Domain& d) {
  for (int i = 0; i < static_cast<int>(d.num_interior()); ++i) {
    int bonds_at_site = 0;
    for (const Bond& b : d.bonds()) bonds_at_site += (b.from_index == i) + (b.to_index == i);
    EXPECT_EQ(bonds_at_site, d.degree());
  }
  for (const Site& s : d.boundary()) {
    EXPECT_FALSE(d.in_interior(s));
    bool adjacent = false;
    for (const Site& off : d.offsets()) adjacent |= d.in_interior(s + off);
    EXPECT_TRUE(adjacent);
  }
  for (int b : d.boundary_bonds()) {
    const Bond& bond = d.bonds()[static_cast<std::size_t>(b)];
    EXPECT_NE(d.is_boundary(bond.from_index), d.is_boundary(bond.to_index));
  }
  EXPECT_EQ(d.bonds().size(), count_interior_bonds(d) + d.boundary_bonds().size());
  for (const Bond& b : d.bonds()) {
    const Site delta = b.to - b.from;
    EXPECT_TRUE((delta == Site{1, 0} && b.orientation == Orientation::horizontal) ||
                (delta == Site{0, 1} && b.orientation == Orientation::vertical));
  }
  // Rebuilding from the interior reproduces the boundary.
  const Domain again = Domain::from_interior({d.interior().begin(), d.interior().end()}, d.stencil());
  EXPECT_TRUE(std::equal(again.boundary().begin(), again.boundary().end(), d.boundary().begin(),
                         d.boundary().end()));
}

TEST(Lattice, RectangleCounts) {
  const Domain d33 = build_rectangle(3, 3);
  EXPECT_EQ(d33.num_interior(), 9u);
  EXPECT_EQ(d33.num_boundary(), 12u);
  EXPECT_EQ(d33.bonds().size(), 24u);
  EXPECT_EQ(count_interior_bonds(d33), 12u);
  EXPECT_EQ(d33.boundary_bonds().size(), 12u);

  const Domain d11 = build_rectangle(1, 1);
  EXPECT_EQ(d11.num_interior(), 1u);
  EXPECT_EQ(d11.num_boundary(), 4u);
  EXPECT_EQ(d11.bonds().size(), 4u);

  const Domain d21 = build_rectangle(2, 1);
  EXPECT_EQ(d21.num_interior(), 2u);
  EXPECT_EQ(d21.num_boundary(), 6u);
  EXPECT_EQ(d21.bonds().size(), 7u);

  // No diagonal corners in the boundary ring.
  EXPECT_FALSE(d33.contains({-1, -1}));
  for (const Domain* d : {&d33, &d11, &d21}) expect_domain_invariants(*d);
}

TEST(Lattice, RejectsBadDimensions) {
  EXPECT_THROW(build_rectangle(0, 3), InvalidArgument);
  EXPECT_THROW(build_rectangle(3, -1), InvalidArgument);
  EXPECT_THROW(build_disk(0.0, 1), InvalidArgument);
}

TEST(Lattice, DiskMatchesEnumeration) {
  const Domain plus = build_disk(1.2, 1);
  ASSERT_EQ(plus.num_interior(), 5u);
  for (Site s : {Site{0, 0}, Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}})
    EXPECT_TRUE(plus.in_interior(s));

  // Brute-force count of x^2 + y^2 < 2.4^2.
  int expected = 0;
  for (int x = -5; x <= 5; ++x)
    for (int y = -5; y <= 5; ++y) expected += (x * x + y * y < 5.76);
  EXPECT_EQ(expected, 21);
  const Domain d = build_disk(1.2, 2);
  EXPECT_EQ(static_cast<int>(d.num_interior()), expected);
  expect_domain_invariants(d);

  const Domain single = build_disk(0.5, 1);
  ASSERT_EQ(single.num_interior(), 1u);
  EXPECT_EQ(single.interior()[0], (Site{0, 0}));
}

TEST(Lattice, Erosion) {
  const Domain d = build_rectangle(5, 5);
  const Domain e1 = erode(d, 1);
  ASSERT_EQ(e1.num_interior(), 9u);
  for (int x = 1; x <= 3; ++x)
    for (int y = 1; y <= 3; ++y) EXPECT_TRUE(e1.in_interior({x, y}));

  const Domain e0 = erode(d, 0);
  EXPECT_TRUE(std::equal(e0.interior().begin(), e0.interior().end(), d.interior().begin(),
                         d.interior().end()));
  EXPECT_TRUE(erode(build_rectangle(3, 3), 2).empty());
}

TEST(Lattice, ErosionComposes) {
  const Domain d = build_disk(7.3, 1);
  for (int r = 0; r <= 4; ++r) {
    for (int s = 0; s <= 4; ++s) {
      const Domain lhs = erode(erode(d, r), s);
      const Domain rhs = erode(d, r + s);
      EXPECT_TRUE(std::equal(lhs.interior().begin(), lhs.interior().end(), rhs.interior().begin(),
                             rhs.interior().end()))
          << "r=" << r << " s=" << s;
    }
  }
}

TEST(Lattice, RandomBlobsSatisfyInvariants) {
  Rng rng(11, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Site> interior{{0, 0}};
    for (int k = 0; k < 40; ++k) {
      const Site base = interior[rng.below(static_cast<std::uint32_t>(interior.size()))];
      const Site step[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      interior.push_back(base + step[rng.below(4)]);
    }
    const Domain d = Domain::from_interior(interior);
    EXPECT_TRUE(d.is_connected());
    expect_domain_invariants(d);
  }
}

TEST(Lattice, PathGraph) {
  const Domain p = build_path(3);
  EXPECT_EQ(p.num_interior(), 3u);
  EXPECT_EQ(p.num_boundary(), 2u);
  EXPECT_EQ(p.bonds().size(), 4u);
  EXPECT_EQ(p.degree(), 2);
  expect_domain_invariants(p);
}

TEST(Lattice, JsonRoundTrip) {
  const Domain d = build_disk(3.5, 1);
  const Domain back = domain_from_json(to_json(d));
  EXPECT_TRUE(std::equal(back.sites().begin(), back.sites().end(), d.sites().begin(), d.sites().end()));
  auto j = to_json(d);
  j["boundary"].erase(0);
  EXPECT_THROW(domain_from_json(j), InvalidArgument);
}

TEST(Lattice, DomainSpecs) {
  EXPECT_EQ(parse_domain_spec("rect:4x3").num_interior(), 12u);
  EXPECT_EQ(parse_domain_spec("disk:1.2:2").num_interior(), 21u);
  EXPECT_EQ(parse_domain_spec("path:5").num_interior(), 5u);
  EXPECT_THROW(parse_domain_spec("hex:3"), InvalidArgument);
}

}  // namespace
}  // namespace glsim
