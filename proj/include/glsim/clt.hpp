#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "glsim/gff.hpp"
#include "glsim/harmonic.hpp"
#include "glsim/potential.hpp"
#include "glsim/stats.hpp"

namespace glsim {

/// Continuum test function through its gradient, supported in [x0, x1] x [y0, y1].
struct TestFunction {
  std::function<double(double, double)> grad_x;
  std::function<double(double, double)> grad_y;
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

  bool in_support(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
};

/// f(p) = exp(-1 / (1 - |p - c|² / ρ²)) inside the disc of radius ρ about c, 0 outside.
inline TestFunction bump(double cx, double cy, double rho) {
  require(rho > 0.0, "bump: radius must be positive");
  auto grad = [=](double x, double y, bool along_x) {
    const double dx = x - cx, dy = y - cy;
    const double s = (dx * dx + dy * dy) / (rho * rho);
    if (s >= 1.0) return 0.0;
    const double f = std::exp(-1.0 / (1.0 - s));
    // d/dp exp(-1/(1-s)) = f * (-1/(1-s)²) * ds/dp, ds/dp = 2 (p - c) / ρ²
    return -f / ((1.0 - s) * (1.0 - s)) * 2.0 * (along_x ? dx : dy) / (rho * rho);
  };
  return {[=](double x, double y) { return grad(x, y, true); },
          [=](double x, double y) { return grad(x, y, false); },
          cx - rho, cx + rho, cy - rho, cy + rho};
}

/// Per-bond weights ε ∇f(ε mid_b) · e_b, where the oriented component matches the bond
/// orientation. Every bond whose midpoint lies in the support must join two interior sites.
inline std::vector<double> functional_weights(const Domain& d, const TestFunction& f, double epsilon) {
  require(epsilon > 0.0, "field_functional: epsilon must be positive");
  std::vector<double> w(d.bonds().size(), 0.0);
  for (std::size_t k = 0; k < d.bonds().size(); ++k) {
    const Bond& b = d.bonds()[k];
    const double mx = epsilon * 0.5 * (b.from.x + b.to.x);
    const double my = epsilon * 0.5 * (b.from.y + b.to.y);
    if (!f.in_support(mx, my)) continue;
    const double g = b.orientation == Orientation::horizontal ? f.grad_x(mx, my) : f.grad_y(mx, my);
    if (g == 0.0) continue;
    if (!d.is_interior(b.from_index) || !d.is_interior(b.to_index))
      throw InvalidArgument("field_functional: test function support reaches the boundary");
    w[k] = epsilon * g;
  }
  return w;
}

/// ξ^{ε,D}(∇f) = ε Σ_b ∇f(ε b) · ∇h(b).
inline double field_functional(const Field& h, std::span<const double> weights) {
  const auto& bonds = h.domain().bonds();
  double acc = 0.0;
  for (std::size_t k = 0; k < bonds.size(); ++k)
    if (weights[k] != 0.0) acc += weights[k] * h.gradient(bonds[k]);
  return acc;
}

inline double field_functional(const Field& h, const TestFunction& f, double epsilon) {
  return field_functional(h, functional_weights(h.domain(), f, epsilon));
}

/// Site coefficients u with ξ = Σ_x u(x) h(x) (interior sites; boundary terms vanish).
inline Eigen::VectorXd functional_site_vector(const Domain& d, std::span<const double> weights) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.num_interior()));
  for (std::size_t k = 0; k < d.bonds().size(); ++k) {
    if (weights[k] == 0.0) continue;
    const Bond& b = d.bonds()[k];
    if (d.is_interior(b.to_index)) u[b.to_index] += weights[k];
    if (d.is_interior(b.from_index)) u[b.from_index] -= weights[k];
  }
  return u;
}

/// Exact DGFF variance uᵀ G u of the functional.
inline double dgff_functional_variance(const LaplacianSolver& solver, std::span<const double> weights) {
  const Eigen::VectorXd u = functional_site_vector(solver.domain(), weights);
  return u.dot(solver.solve(u));
}

/// Variance of ⟨ν, h⟩ under the zero-boundary DGFF: νᵀ G ν.
inline double dgff_linear_variance(const LaplacianSolver& solver, const Eigen::VectorXd& nu) {
  return nu.dot(solver.solve(nu));
}

inline NormalityTest gaussianity_test(std::span<const double> samples) {
  require(samples.size() >= 500, "gaussianity_test: need at least 500 samples");
  return anderson_darling(samples);
}

struct BondEstimate {
  int bond = -1;
  Estimate estimate;
};

struct HomogenizedCoefficient {
  Estimate value;                  ///< pooled over bulk bonds and samples
  std::vector<BondEstimate> per_bond;
  double max_z = 0.0;              ///< largest |per-bond - pooled| / se
  double threshold = 0.0;          ///< family-wise 4 sigma over the bonds
  bool bond_independent = true;
};

/// Bonds whose both endpoints have depth >= min_depth.
inline std::vector<int> bulk_bonds(const Domain& d, int min_depth) {
  std::vector<int> out;
  for (std::size_t k = 0; k < d.bonds().size(); ++k) {
    const Bond& b = d.bonds()[k];
    if (std::min(d.depth(b.from_index), d.depth(b.to_index)) >= min_depth) out.push_back(static_cast<int>(k));
  }
  return out;
}

/// a_V = E V''(∇h(b)) over bulk bonds. Per-bond standard errors by batch means.
inline HomogenizedCoefficient estimate_a_v(const SampleBatch& batch, const Potential& p, std::span<const int> bonds) {
  require(!bonds.empty(), "estimate_a_v: no bulk bonds");
  const Domain& d = *batch.domain;
  HomogenizedCoefficient r;
  std::vector<double> pooled(batch.count(), 0.0);
  for (int b : bonds) {
    const Bond& bond = d.bonds()[static_cast<std::size_t>(b)];
    std::vector<double> series;
    series.reserve(batch.count());
    for (std::size_t s = 0; s < batch.count(); ++s) {
      const double v = p.d2(batch.fields[s].gradient(bond));
      series.push_back(v);
      pooled[s] += v / static_cast<double>(bonds.size());
    }
    r.per_bond.push_back({b, series_estimate(series)});
  }
  r.value = series_estimate(pooled);
  // each bond against the mean of the others keeps the comparison free of self-correlation
  const double total = r.value.value * static_cast<double>(bonds.size());
  for (const auto& be : r.per_bond) {
    const double others = bonds.size() > 1 ? (total - be.estimate.value) / static_cast<double>(bonds.size() - 1)
                                           : be.estimate.value;
    if (be.estimate.se > 0.0) r.max_z = std::max(r.max_z, std::abs(be.estimate.value - others) / be.estimate.se);
  }
  r.threshold = joint_threshold(4.0, bonds.size());
  r.bond_independent = r.max_z <= r.threshold;
  return r;
}

struct FkgReport {
  std::vector<Estimate> covariances;
  std::size_t violations = 0;   ///< pairs with Cov < -4 se
  bool pass = true;
};

/// One-sided check Cov(h(x), h(y)) >= -4 se for each pair, se by batch means of the
/// centred product series.
inline FkgReport fkg_check(const SampleBatch& batch, std::span<const std::pair<int, int>> pairs) {
  FkgReport r;
  for (const auto& [x, y] : pairs) {
    const auto hx = batch.site_series(x);
    const auto hy = batch.site_series(y);
    const double mx = mean(hx), my = mean(hy);
    std::vector<double> prod(hx.size());
    for (std::size_t i = 0; i < hx.size(); ++i) prod[i] = (hx[i] - mx) * (hy[i] - my);
    const Estimate e = series_estimate(prod);
    r.covariances.push_back(e);
    if (e.value < -4.0 * e.se) ++r.violations;
  }
  r.pass = r.violations == 0;
  return r;
}

struct BrascampLiebReport {
  Estimate variance;        ///< of ⟨ν, h⟩ under the sampled law
  double dgff_variance = 0.0;
  double bound = 0.0;       ///< Var_DGFF / a
  Estimate exp_moment;      ///< E exp(⟨ν, h⟩ - E⟨ν, h⟩)
  double exp_bound = 0.0;   ///< exp(Var_DGFF / (2a))
  bool variance_pass = true;
  bool exp_pass = true;
};

/// Var⟨ν,h⟩ <= Var_DGFF⟨ν,h*⟩ / a and E exp(⟨ν,h - Eh⟩) <= exp(Var_DGFF / (2a)), each
/// accepted when the bound lies within `sigmas` standard errors above the estimate.
inline BrascampLiebReport brascamp_lieb_check(const SampleBatch& batch, const LaplacianSolver& solver,
                                              const Eigen::VectorXd& nu, double a, double sigmas = 3.0) {
  std::vector<double> lin;
  lin.reserve(batch.count());
  for (const Field& f : batch.fields) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < nu.size(); ++i) acc += nu[i] * f[static_cast<int>(i)];
    lin.push_back(acc);
  }
  const double m = mean(lin);
  std::vector<double> sq, ex;
  for (double v : lin) {
    sq.push_back((v - m) * (v - m));
    ex.push_back(std::exp(v - m));
  }
  BrascampLiebReport r;
  r.variance = series_estimate(sq);
  r.dgff_variance = dgff_linear_variance(solver, nu);
  r.bound = r.dgff_variance / a;
  r.exp_moment = series_estimate(ex);
  r.exp_bound = std::exp(r.dgff_variance / (2.0 * a));
  r.variance_pass = r.variance.value - sigmas * r.variance.se <= r.bound;
  r.exp_pass = r.exp_moment.value - sigmas * r.exp_moment.se <= r.exp_bound;
  return r;
}

}  // namespace glsim
