#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "glsim/error.hpp"
#include "glsim/lattice.hpp"

namespace glsim {

/// Real values on every site of a domain: interior block first, boundary block after,
/// following the domain's dense site order.
class Field {
 public:
  Field() = default;
  explicit Field(DomainPtr domain)
      : domain_(std::move(domain)), values_(domain_->num_sites(), 0.0) {}
  Field(DomainPtr domain, std::vector<double> values)
      : domain_(std::move(domain)), values_(std::move(values)) {
    require(values_.size() == domain_->num_sites(), "Field: value count does not match domain");
  }

  static Field from_parts(DomainPtr domain, std::span<const double> interior,
                          std::span<const double> boundary) {
    require(interior.size() == domain->num_interior(), "Field: interior size mismatch");
    require(boundary.size() == domain->num_boundary(), "Field: boundary size mismatch");
    std::vector<double> v(interior.begin(), interior.end());
    v.insert(v.end(), boundary.begin(), boundary.end());
    return Field(std::move(domain), std::move(v));
  }

  const Domain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> interior() { return {values_.data(), domain_->num_interior()}; }
  std::span<const double> interior() const { return {values_.data(), domain_->num_interior()}; }
  std::span<double> boundary() {
    return {values_.data() + domain_->num_interior(), domain_->num_boundary()};
  }
  std::span<const double> boundary() const {
    return {values_.data() + domain_->num_interior(), domain_->num_boundary()};
  }

  double& operator[](int index) { return values_[static_cast<std::size_t>(index)]; }
  double operator[](int index) const { return values_[static_cast<std::size_t>(index)]; }
  double at(Site s) const {
    const int i = domain_->index_of(s);
    require(i >= 0, "Field::at: site outside domain");
    return (*this)[i];
  }

  double gradient(const Bond& b) const { return (*this)[b.to_index] - (*this)[b.from_index]; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  DomainPtr domain_;
  std::vector<double> values_;
};

/// (Δf)(x) = Σ_{y~x} (f(y) - f(x)) on interior sites, boundary neighbours included.
inline std::vector<double> laplacian_apply(const Field& f) {
  const Domain& d = f.domain();
  std::vector<double> out(d.num_interior());
  for (int i = 0; i < static_cast<int>(d.num_interior()); ++i) {
    double acc = 0.0;
    for (int j : d.neighbors(i)) acc += f[j] - f[i];
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

/// Sparse -Δ with Dirichlet boundary on the interior sites.
inline Eigen::SparseMatrix<double> negative_laplacian(const Domain& d) {
  std::vector<Eigen::Triplet<double>> t;
  const int n = static_cast<int>(d.num_interior());
  t.reserve(static_cast<std::size_t>(n) * (static_cast<std::size_t>(d.degree()) + 1));
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, static_cast<double>(d.degree()));
    for (int j : d.neighbors(i))
      if (d.is_interior(j)) t.emplace_back(i, j, -1.0);
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Sparse Cholesky factorization P(-Δ)P^T = L L^T of one domain, shared by Dirichlet
/// solves, Green's function rows and exact DGFF sampling. Immutable after construction.
class LaplacianSolver {
 public:
  explicit LaplacianSolver(DomainPtr domain) : domain_(std::move(domain)) {
    require(!domain_->empty(), "LaplacianSolver: empty domain");
    llt_.compute(negative_laplacian(*domain_));
    if (llt_.info() != Eigen::Success) throw RuntimeError("LaplacianSolver: factorization failed");
  }

  const Domain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }
  std::size_t size() const { return domain_->num_interior(); }

  /// Solves (-Δ) u = rhs with zero boundary data.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd u = llt_.solve(rhs);
    if (llt_.info() != Eigen::Success) throw RuntimeError("LaplacianSolver: solve failed");
    return u;
  }

  /// Discrete harmonic function with the given boundary values.
  Field harmonic_extension(std::span<const double> boundary_values) const {
    const Domain& d = *domain_;
    require(boundary_values.size() == d.num_boundary(), "harmonic_extension: boundary size mismatch");
    Field out(domain_);
    std::copy(boundary_values.begin(), boundary_values.end(), out.boundary().begin());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
    for (int i = 0; i < static_cast<int>(size()); ++i)
      for (int j : d.neighbors(i))
        if (d.is_boundary(j)) rhs[i] += out[j];
    const Eigen::VectorXd u = solve(rhs);
    for (int i = 0; i < static_cast<int>(size()); ++i) out[i] = u[i];
    return out;
  }

  /// Maps i.i.d. standard normals z to P^T L^{-T} z, whose covariance is (-Δ)^{-1}.
  Eigen::VectorXd correlate(const Eigen::VectorXd& z) const {
    Eigen::VectorXd y = llt_.matrixU().solve(z);
    return llt_.permutationPinv() * y;
  }

 private:
  DomainPtr domain_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

inline Field solve_dirichlet(const LaplacianSolver& solver, std::span<const double> boundary_values) {
  return solver.harmonic_extension(boundary_values);
}

inline Field solve_dirichlet(DomainPtr domain, std::span<const double> boundary_values) {
  return LaplacianSolver(std::move(domain)).harmonic_extension(boundary_values);
}

/// G = (-Δ)^{-1}, so that Cov(h(x), h(y)) = G(x, y) for the zero-boundary DGFF.
/// Materialized densely up to kDenseLimit interior sites; larger domains compute
/// rows on demand.
class GreensFunction {
 public:
  static constexpr std::size_t kDenseLimit = 4096;

  explicit GreensFunction(std::shared_ptr<const LaplacianSolver> solver) : solver_(std::move(solver)) {
    const auto n = static_cast<Eigen::Index>(solver_->size());
    if (solver_->size() <= kDenseLimit) {
      dense_.resize(n, n);
      for (Eigen::Index j = 0; j < n; ++j) dense_.col(j) = solver_->solve(Eigen::VectorXd::Unit(n, j));
      // symmetrize away solver round-off
      dense_ = 0.5 * (dense_ + dense_.transpose()).eval();
    }
  }

  bool is_dense() const { return dense_.size() > 0; }
  std::size_t size() const { return solver_->size(); }

  double operator()(int x, int y) const {
    if (is_dense()) return dense_(x, y);
    return row(y)[x];
  }

  Eigen::VectorXd row(int y) const {
    if (is_dense()) return dense_.col(y);
    return solver_->solve(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(size()), y));
  }

  const Eigen::MatrixXd& dense() const {
    require(is_dense(), "GreensFunction: not materialized for this domain size");
    return dense_;
  }

  void write_csv(std::ostream& os) const {
    const auto n = static_cast<int>(size());
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd r = row(i);
      for (int j = 0; j < n; ++j) os << (j ? "," : "") << r[j];
      os << '\n';
    }
  }

 private:
  std::shared_ptr<const LaplacianSolver> solver_;
  Eigen::MatrixXd dense_;
};

inline GreensFunction greens_function(DomainPtr domain) {
  return GreensFunction(std::make_shared<const LaplacianSolver>(std::move(domain)));
}

/// Exit distribution of the rate-1-per-edge walk started at interior site x, indexed like
/// domain.boundary(). Uses P(exit at z) = Σ_{y~z} G(x, y).
inline std::vector<double> harmonic_measure(const LaplacianSolver& solver, int x) {
  const Domain& d = solver.domain();
  require(d.is_interior(x), "harmonic_measure: start must be interior");
  const Eigen::VectorXd g =
      solver.solve(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(solver.size()), x));
  std::vector<double> mass(d.num_boundary(), 0.0);
  for (int b : d.boundary_bonds()) {
    const Bond& bond = d.bonds()[static_cast<std::size_t>(b)];
    const int inner = d.is_interior(bond.from_index) ? bond.from_index : bond.to_index;
    const int outer = inner == bond.from_index ? bond.to_index : bond.from_index;
    mass[static_cast<std::size_t>(outer) - d.num_interior()] += g[inner];
  }
  return mass;
}

inline std::vector<double> harmonic_measure(DomainPtr domain, Site x) {
  LaplacianSolver solver(domain);
  return harmonic_measure(solver, domain->index_of(x));
}

/// max over interior neighbour pairs of |g(x) - g(y)| * min(depth(x), depth(y)) / ||g_∂||_∞
/// for the harmonic extension g of the boundary data. Returns 0 for zero boundary data.
inline double harmonic_gradient_check(const LaplacianSolver& solver,
                                      std::span<const double> boundary_values) {
  double norm = 0.0;
  for (double v : boundary_values) norm = std::max(norm, std::abs(v));
  if (norm == 0.0) return 0.0;
  const Field g = solver.harmonic_extension(boundary_values);
  const Domain& d = solver.domain();
  double worst = 0.0;
  for (const Bond& b : d.bonds()) {
    if (!d.is_interior(b.from_index) || !d.is_interior(b.to_index)) continue;
    const int dist = std::min(d.depth(b.from_index), d.depth(b.to_index));
    worst = std::max(worst, std::abs(g.gradient(b)) * dist / norm);
  }
  return worst;
}

}  // namespace glsim
