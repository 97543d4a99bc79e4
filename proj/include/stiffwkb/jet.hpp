#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>

namespace stiffwkb {

/// Truncated derivative jet of a scalar function at a point:
/// d[i] = f^(i)(x) for i <= order(). Arithmetic follows Leibniz and the
/// standard Taylor-series recurrences, so composite expressions carry exact
/// derivatives without finite differences.
class Jet {
 public:
  static constexpr int kMaxOrder = 6;

  Jet() { d_.fill(0.0); }

  /// A constant (all derivatives zero) valid to `order`.
  static Jet constant(double value, int order = kMaxOrder) {
    Jet j;
    j.order_ = order;
    j.d_[0] = value;
    return j;
  }

  /// The identity map x -> x at `x`.
  static Jet variable(double x, int order = kMaxOrder) {
    Jet j = constant(x, order);
    if (order >= 1) j.d_[1] = 1.0;
    return j;
  }

  static Jet from_derivatives(const double* values, int order) {
    Jet j;
    j.order_ = order;
    for (int i = 0; i <= order; ++i) j.d_[i] = values[i];
    return j;
  }

  int order() const { return order_; }
  double operator[](int i) const { return d_[i]; }
  double& operator[](int i) { return d_[i]; }
  double value() const { return d_[0]; }

  /// Jet of f' (one order lower).
  Jet derivative(int times = 1) const {
    Jet j;
    j.order_ = std::max(order_ - times, -1);
    for (int i = 0; i <= j.order_; ++i) j.d_[i] = d_[i + times];
    return j;
  }

  Jet truncated(int order) const {
    Jet j = *this;
    j.order_ = std::min(order_, order);
    for (int i = j.order_ + 1; i <= kMaxOrder; ++i) j.d_[i] = 0.0;
    return j;
  }

  Jet& operator+=(const Jet& o) {
    order_ = std::min(order_, o.order_);
    for (int i = 0; i <= kMaxOrder; ++i) d_[i] += o.d_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    order_ = std::min(order_, o.order_);
    for (int i = 0; i <= kMaxOrder; ++i) d_[i] -= o.d_[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& v : d_) v *= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) {
    a.d_[0] += s;
    return a;
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    r.order_ = std::min(a.order_, b.order_);
    for (int n = 0; n <= r.order_; ++n) {
      double s = 0.0;
      for (int i = 0; i <= n; ++i) s += binomial(n, i) * a.d_[i] * b.d_[n - i];
      r.d_[n] = s;
    }
    return r;
  }

  friend Jet exp(const Jet& u) {
    auto t = u.taylor();
    std::array<double, kMaxOrder + 1> e{};
    e[0] = std::exp(t[0]);
    for (int k = 1; k <= u.order_; ++k) {
      double s = 0.0;
      for (int j = 1; j <= k; ++j) s += j * t[j] * e[k - j];
      e[k] = s / k;
    }
    return from_taylor(e, u.order_);
  }

  /// Simultaneous (cos u, sin u).
  friend std::pair<Jet, Jet> cos_sin(const Jet& u) {
    auto t = u.taylor();
    std::array<double, kMaxOrder + 1> c{}, s{};
    c[0] = std::cos(t[0]);
    s[0] = std::sin(t[0]);
    for (int k = 1; k <= u.order_; ++k) {
      double sc = 0.0, ss = 0.0;
      for (int j = 1; j <= k; ++j) {
        sc += j * t[j] * s[k - j];
        ss += j * t[j] * c[k - j];
      }
      c[k] = -sc / k;
      s[k] = ss / k;
    }
    return {from_taylor(c, u.order_), from_taylor(s, u.order_)};
  }

  /// u^alpha for u(x) > 0.
  friend Jet pow(const Jet& u, double alpha) {
    auto t = u.taylor();
    std::array<double, kMaxOrder + 1> p{};
    p[0] = std::pow(t[0], alpha);
    for (int k = 1; k <= u.order_; ++k) {
      double s = 0.0;
      for (int j = 1; j <= k; ++j) s += (alpha * j - (k - j)) * t[j] * p[k - j];
      p[k] = s / (k * t[0]);
    }
    return from_taylor(p, u.order_);
  }

 private:
  static double binomial(int n, int k) {
    static constexpr double table[kMaxOrder + 1][kMaxOrder + 1] = {
        {1, 0, 0, 0, 0, 0, 0},      {1, 1, 0, 0, 0, 0, 0},       {1, 2, 1, 0, 0, 0, 0},
        {1, 3, 3, 1, 0, 0, 0},      {1, 4, 6, 4, 1, 0, 0},       {1, 5, 10, 10, 5, 1, 0},
        {1, 6, 15, 20, 15, 6, 1}};
    return table[n][k];
  }

  static double factorial(int n) {
    static constexpr double table[kMaxOrder + 1] = {1, 1, 2, 6, 24, 120, 720};
    return table[n];
  }

  std::array<double, kMaxOrder + 1> taylor() const {
    std::array<double, kMaxOrder + 1> t{};
    for (int i = 0; i <= order_; ++i) t[i] = d_[i] / factorial(i);
    return t;
  }

  static Jet from_taylor(const std::array<double, kMaxOrder + 1>& t, int order) {
    Jet j;
    j.order_ = order;
    for (int i = 0; i <= order; ++i) j.d_[i] = t[i] * factorial(i);
    return j;
  }

  std::array<double, kMaxOrder + 1> d_;
  int order_ = kMaxOrder;
};

}  // namespace stiffwkb
