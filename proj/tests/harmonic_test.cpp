#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "glsim/harmonic.hpp"
#include "glsim/rng.hpp"

namespace glsim {
namespace {

// Dense -Δ assembled directly from site coordinates, independent of the sparse path.
Eigen::MatrixXd dense_negative_laplacian(const Domain& d) {
  const int n = static_cast<int>(d.num_interior());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, i) = d.degree();
    for (int j = 0; j < n; ++j) {
      const Site diff = d.site(j) - d.site(i);
      if (std::abs(diff.x) + std::abs(diff.y) == 1 && (d.stencil() == Stencil::square || diff.y == 0))
        m(i, j) = -1.0;
    }
  }
  return m;
}

TEST(Harmonic, PathGreensFunction) {
  const auto g = greens_function(share(build_path(3)));
  EXPECT_NEAR(g(0, 0), 0.75, 1e-12);
  EXPECT_NEAR(g(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(g(0, 2), 0.25, 1e-12);
  // closed form x(n+1-y)/(n+1) for x <= y on the path with n = 5
  const auto g5 = greens_function(share(build_path(5)));
  for (int x = 1; x <= 5; ++x)
    for (int y = x; y <= 5; ++y) EXPECT_NEAR(g5(x - 1, y - 1), x * (6.0 - y) / 6.0, 1e-12);
}

TEST(Harmonic, GreensMatchesDenseInverse) {
  for (const Domain& raw : {build_rectangle(4, 3), build_disk(3.2, 1)}) {
    const auto d = share(raw);
    const auto g = greens_function(d);
    const Eigen::MatrixXd inv = dense_negative_laplacian(*d).inverse();
    EXPECT_LT((g.dense() - inv).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((g.dense() - g.dense().transpose()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Harmonic, SummationByParts) {
  // Σ_x f(x)(-Δg)(x) = Σ_{b∈D*} ∇f ∇g when f vanishes on the boundary.
  const auto d = share(build_disk(4.5, 1));
  Rng rng(5, 0);
  Field f(d), g(d);
  for (std::size_t i = 0; i < d->num_interior(); ++i) f[static_cast<int>(i)] = rng.normal();
  for (std::size_t i = 0; i < d->num_sites(); ++i) g[static_cast<int>(i)] = rng.normal();
  const auto lap = laplacian_apply(g);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < d->num_interior(); ++i) lhs -= f[static_cast<int>(i)] * lap[i];
  for (const Bond& b : d->bonds()) rhs += f.gradient(b) * g.gradient(b);
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
}

TEST(Harmonic, OneSidedDirichletCenter) {
  const auto d = share(build_rectangle(3, 3));
  std::vector<double> bvals(d->num_boundary(), 0.0);
  for (std::size_t k = 0; k < bvals.size(); ++k)
    if (d->boundary()[k].y == 3) bvals[k] = 1.0;
  const Field u = solve_dirichlet(d, bvals);
  // dense oracle
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(9);
  for (int i = 0; i < 9; ++i)
    if (d->site(i).y == 2) rhs[i] = 1.0;
  const Eigen::VectorXd dense = dense_negative_laplacian(*d).lu().solve(rhs);
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(u[i], dense[i], 1e-12);
  EXPECT_NEAR(u.at({1, 1}), 0.25, 1e-12);
  const auto lap = laplacian_apply(u);
  for (double r : lap) EXPECT_LT(std::abs(r), 1e-12);
}

TEST(Harmonic, ConstantAndLinearBoundaryData) {
  const auto d = share(build_disk(5.0, 1));
  LaplacianSolver solver(d);
  std::vector<double> ones(d->num_boundary(), 1.0);
  const Field c = solver.harmonic_extension(ones);
  for (double v : c.interior()) EXPECT_NEAR(v, 1.0, 1e-12);
  std::vector<double> linear;
  for (const Site& s : d->boundary()) linear.push_back(2.0 * s.x - 0.5 * s.y);
  const Field l = solver.harmonic_extension(linear);
  for (std::size_t i = 0; i < d->num_interior(); ++i) {
    const Site s = d->site(static_cast<int>(i));
    EXPECT_NEAR(l[static_cast<int>(i)], 2.0 * s.x - 0.5 * s.y, 1e-10);
  }
}

TEST(Harmonic, HarmonicMeasureIsDistribution) {
  const auto d = share(build_rectangle(5, 5));
  const auto p = harmonic_measure(d, {2, 2});
  double total = 0.0;
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  // symmetry of the square about the centre
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Site s = d->boundary()[k];
    EXPECT_NEAR(p[k], p[static_cast<std::size_t>(d->index_of({4 - s.x, s.y})) - d->num_interior()], 1e-12);
  }
  // mean of the exit position equals the start (linear functions are harmonic)
  double mx = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) mx += p[k] * d->boundary()[k].x;
  EXPECT_NEAR(mx, 2.0, 1e-12);
}

TEST(Harmonic, GradientCheck) {
  const auto d = share(build_path(3));
  LaplacianSolver solver(d);
  // u = 0 at x = 0, 1 at x = 4: slope 0.25; depth of the inner pair minimum is 1
  const double ratio = harmonic_gradient_check(solver, std::vector<double>{0.0, 1.0});
  EXPECT_NEAR(ratio, 0.25 * 1, 1e-12);
  EXPECT_EQ(harmonic_gradient_check(solver, std::vector<double>{0.0, 0.0}), 0.0);
}

TEST(Harmonic, CorrelateGivesGreensCovariance) {
  const auto d = share(build_rectangle(3, 2));
  LaplacianSolver solver(d);
  const auto n = static_cast<Eigen::Index>(solver.size());
  // Columns of the linear map M with M M^T = G.
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) m.col(j) = solver.correlate(Eigen::VectorXd::Unit(n, j));
  const Eigen::MatrixXd inv = dense_negative_laplacian(*d).inverse();
  EXPECT_LT((m * m.transpose() - inv).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Harmonic, CsvHasOneRowPerSite) {
  const auto g = greens_function(share(build_path(4)));
  std::ostringstream os;
  g.write_csv(os);
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
  EXPECT_EQ(std::count(s.begin(), s.end(), ','), 12);
}

}  // namespace
}  // namespace glsim
