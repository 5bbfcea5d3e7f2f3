#pragma once

#include <Eigen/Core>
#include <cmath>

#include "vnc/errors.hpp"

namespace vnc {

/// Upper bound on chart dimension; gradients are stack-allocated up to this.
inline constexpr int kMaxChartDim = 16;

/// Forward-mode dual scalar: a value plus its gradient with respect to the
/// active chart coordinates. Constants carry an empty gradient and arithmetic
/// broadcasts it, so parameter-heavy expressions stay cheap.
class Dual {
 public:
  using Grad = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor,
                             kMaxChartDim, 1>;

  Dual() : value_(0.0) {}
  Dual(double v) : value_(v) {}  // NOLINT: implicit by design (constants)
  Dual(double v, Grad g) : value_(v), grad_(std::move(g)) {}

  /// Active variable: derivative slot `slot` of `n` is seeded with 1.
  static Dual seeded(double v, int slot, int n) {
    Grad g = Grad::Zero(n);
    g[slot] = 1.0;
    return Dual(v, std::move(g));
  }

  double value() const { return value_; }
  const Grad& grad() const { return grad_; }
  bool is_constant() const { return grad_.size() == 0; }

  /// Partial derivative with respect to coordinate `i` (0 for constants).
  double partial(int i) const {
    return i < grad_.size() ? grad_[i] : 0.0;
  }

  Dual operator-() const { return Dual(-value_, -grad_); }

  Dual& operator+=(const Dual& o) {
    value_ += o.value_;
    accumulate(grad_, o.grad_, 1.0);
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value_ -= o.value_;
    accumulate(grad_, o.grad_, -1.0);
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    // d(ab) = a db + b da; scale own gradient first, then fold in o's.
    if (grad_.size() != 0) grad_ *= o.value_;
    accumulate(grad_, o.grad_, value_);
    value_ *= o.value_;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.value_;
    if (grad_.size() != 0) grad_ *= inv;
    value_ *= inv;
    // now holds a/b; d(a/b) = da/b - (a/b) db/b
    accumulate(grad_, o.grad_, -value_ * inv);
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }

  friend bool operator<(const Dual& a, const Dual& b) {
    return a.value_ < b.value_;
  }
  friend bool operator>(const Dual& a, const Dual& b) {
    return a.value_ > b.value_;
  }
  friend bool operator<=(const Dual& a, const Dual& b) {
    return a.value_ <= b.value_;
  }
  friend bool operator>=(const Dual& a, const Dual& b) {
    return a.value_ >= b.value_;
  }
  friend bool operator==(const Dual& a, const Dual& b) {
    return a.value_ == b.value_;
  }
  friend bool operator!=(const Dual& a, const Dual& b) {
    return a.value_ != b.value_;
  }

 private:
  // g += s * h, broadcasting an empty gradient on either side.
  static void accumulate(Grad& g, const Grad& h, double s) {
    if (h.size() == 0) return;
    if (g.size() == 0) {
      g = s * h;
      return;
    }
    g += s * h;
  }

  double value_;
  Grad grad_;
};

/// Chain rule helper: f(x) with derivative df at x.value().
inline Dual chain(const Dual& x, double f, double df) {
  if (x.is_constant()) return Dual(f);
  return Dual(f, df * x.grad());
}

inline Dual sin(const Dual& x) {
  return chain(x, std::sin(x.value()), std::cos(x.value()));
}
inline Dual cos(const Dual& x) {
  return chain(x, std::cos(x.value()), -std::sin(x.value()));
}
inline Dual tan(const Dual& x) {
  const double c = std::cos(x.value());
  return chain(x, std::tan(x.value()), 1.0 / (c * c));
}
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.value());
  return chain(x, e, e);
}
inline Dual log(const Dual& x) {
  return chain(x, std::log(x.value()), 1.0 / x.value());
}
inline Dual sqrt(const Dual& x) {
  const double r = std::sqrt(x.value());
  return chain(x, r, 0.5 / r);
}
inline Dual abs(const Dual& x) {
  const double s = x.value() > 0 ? 1.0 : (x.value() < 0 ? -1.0 : 0.0);
  return chain(x, std::abs(x.value()), s);
}

/// a^b. A constant exponent keeps the usual power-rule derivative (and admits
/// negative bases with integer exponents); a varying exponent requires a > 0.
inline Dual pow(const Dual& a, const Dual& b) {
  const double v = std::pow(a.value(), b.value());
  if (b.is_constant()) {
    const double da = b.value() * std::pow(a.value(), b.value() - 1.0);
    return chain(a, v, da);
  }
  if (a.value() <= 0.0) {
    throw DomainError("pow: nonpositive base with non-constant exponent");
  }
  Dual::Grad g;
  const double da = b.value() * v / a.value();
  const double db = v * std::log(a.value());
  if (!a.is_constant()) g = da * a.grad();
  if (!b.is_constant()) {
    if (g.size() == 0)
      g = db * b.grad();
    else
      g += db * b.grad();
  }
  return Dual(v, std::move(g));
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value(); }

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const Dual& x) {
  return std::isfinite(x.value()) && x.grad().allFinite();
}

}  // namespace vnc

namespace Eigen {

template <>
struct NumTraits<vnc::Dual> : NumTraits<double> {
  using Real = vnc::Dual;
  using NonInteger = vnc::Dual;
  using Nested = vnc::Dual;
  using Literal = vnc::Dual;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8,
  };
};

}  // namespace Eigen
