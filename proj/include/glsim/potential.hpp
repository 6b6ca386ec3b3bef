#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "glsim/error.hpp"

namespace glsim {

/// V(x) = x^2 / 2.
struct QuadraticV {
  double value(double x) const { return 0.5 * x * x; }
  double d1(double x) const { return x; }
  double d2(double) const { return 1.0; }
};

/// V(x) = 4x^2 + cos x + exp(-x^2).
struct AnharmonicV {
  double value(double x) const { return 4.0 * x * x + std::cos(x) + std::exp(-x * x); }
  double d1(double x) const { return 8.0 * x - std::sin(x) - 2.0 * x * std::exp(-x * x); }
  double d2(double x) const {
    const double x2 = x * x;
    return 8.0 - std::cos(x) + (4.0 * x2 - 2.0) * std::exp(-x2);
  }
};

/// User-supplied interaction evaluated through std::function.
struct CustomV {
  std::function<double(double)> v;
  std::function<double(double)> v1;
  std::function<double(double)> v2;
  double value(double x) const { return v(x); }
  double d1(double x) const { return v1(x); }
  double d2(double x) const { return v2(x); }
};

/// The nearest-neighbour interaction V with its declared convexity bounds
/// a <= V'' <= A and the Lipschitz constant of V''.
///
/// Hot loops should call visit() so that the concrete functor is inlined.
class Potential {
 public:
  enum class Kind { quadratic, anharmonic, custom };

  static Potential quadratic() { return Potential(Kind::quadratic, "quadratic", 1.0, 1.0, 0.0); }

  /// Bounds from a dense search: V''(0) = 5 is the minimum; the maximum
  /// 9.0020013... sits near x = 3.130. The declared A is rounded up.
  static Potential anharmonic() {
    return Potential(Kind::anharmonic, "anharmonic", 5.0, 9.0020014, 4.4164);
  }

  static Potential custom(std::string name, std::function<double(double)> v,
                          std::function<double(double)> v1, std::function<double(double)> v2,
                          double a, double A, double lipschitz) {
    Potential p(Kind::custom, std::move(name), a, A, lipschitz);
    p.custom_ = CustomV{std::move(v), std::move(v1), std::move(v2)};
    return p;
  }

  /// Same interaction with overridden declared bounds (negative controls, config overrides).
  Potential with_bounds(double a, double A) const {
    Potential p = *this;
    p.a_ = a;
    p.A_ = A;
    return p;
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double a() const { return a_; }
  double A() const { return A_; }
  double lipschitz() const { return lipschitz_; }

  template <class F>
  decltype(auto) visit(F&& f) const {
    switch (kind_) {
      case Kind::quadratic:
        return f(QuadraticV{});
      case Kind::anharmonic:
        return f(AnharmonicV{});
      case Kind::custom:
        break;
    }
    return f(custom_);
  }

  double value(double x) const {
    return visit([x](const auto& v) { return v.value(x); });
  }
  double d1(double x) const {
    return visit([x](const auto& v) { return v.d1(x); });
  }
  double d2(double x) const {
    return visit([x](const auto& v) { return v.d2(x); });
  }

 private:
  Potential(Kind kind, std::string name, double a, double A, double lipschitz)
      : kind_(kind), name_(std::move(name)), a_(a), A_(A), lipschitz_(lipschitz) {
    require(a > 0.0 && a <= A, "potential: need 0 < a <= A");
  }

  Kind kind_;
  std::string name_;
  double a_;
  double A_;
  double lipschitz_;
  CustomV custom_;
};

inline Potential builtin_potential(std::string_view name) {
  if (name == "quadratic") return Potential::quadratic();
  if (name == "anharmonic") return Potential::anharmonic();
  throw InvalidArgument("unknown potential '" + std::string(name) + "'");
}

struct PotentialReport {
  double a_hat = 0.0;
  double A_hat = 0.0;
  double L_hat = 0.0;
  bool symmetric = true;
  bool strictly_convex() const { return a_hat > 0.0; }
  bool ok() const { return symmetric && strictly_convex(); }
};

/// Samples V'' on a uniform grid of [-xmax, xmax]. Violations are reported, not thrown.
inline PotentialReport validate(const Potential& potential, double xmax, int samples) {
  require(xmax > 0.0, "validate: xmax must be positive");
  require(samples >= 3, "validate: need at least 3 samples");
  PotentialReport r;
  r.a_hat = std::numeric_limits<double>::infinity();
  r.A_hat = -std::numeric_limits<double>::infinity();
  const double h = 2.0 * xmax / (samples - 1);
  double prev = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = -xmax + h * i;
    const double v2 = potential.d2(x);
    r.a_hat = std::min(r.a_hat, v2);
    r.A_hat = std::max(r.A_hat, v2);
    if (i > 0) r.L_hat = std::max(r.L_hat, std::abs(v2 - prev) / h);
    prev = v2;
    if (std::abs(potential.value(x) - potential.value(-x)) > 1e-12) r.symmetric = false;
  }
  return r;
}

}  // namespace glsim
