#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "linalg.hpp"

namespace stiffwkb {

/// Chebyshev series sum c_k T_k(t) on [lo, hi], t the affine image in [-1, 1].
class Cheb {
 public:
  Cheb() = default;
  Cheb(std::vector<double> coeffs, double lo, double hi)
      : c_(std::move(coeffs)), lo_(lo), hi_(hi) {
    if (c_.empty()) c_.push_back(0.0);
  }

  static Cheb zero(double lo, double hi) { return Cheb({0.0}, lo, hi); }
  static Cheb constant(double v, double lo, double hi) { return Cheb({v}, lo, hi); }

  /// Interpolant at n Chebyshev points of the first kind.
  template <class F>
  static Cheb interpolate(const F& f, int n, double lo, double hi) {
    std::vector<double> fx(n), c(n, 0.0);
    for (int j = 0; j < n; ++j) {
      const double t = std::cos(std::numbers::pi * (j + 0.5) / n);
      fx[j] = f(0.5 * (lo + hi) + 0.5 * (hi - lo) * t);
    }
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += fx[j] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
      c[k] = (k == 0 ? 1.0 : 2.0) * s / n;
    }
    return Cheb(std::move(c), lo, hi);
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t size() const { return c_.size(); }
  const std::vector<double>& coeffs() const { return c_; }

  double operator()(double x) const {
    const double t = (2.0 * x - lo_ - hi_) / (hi_ - lo_);
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = c_.size(); k-- > 1;) {
      const double b0 = 2.0 * t * b1 - b2 + c_[k];
      b2 = b1;
      b1 = b0;
    }
    return t * b1 - b2 + c_[0];
  }

  Cheb derivative() const {
    const std::size_t n = c_.size();
    if (n <= 1) return zero(lo_, hi_);
    std::vector<double> d(n + 1, 0.0);
    const double scale = 2.0 / (hi_ - lo_);
    for (std::size_t k = n - 1; k >= 1; --k) d[k - 1] = d[k + 1] + 2.0 * k * c_[k];
    d.resize(n - 1);
    d[0] *= 0.5;
    for (auto& v : d) v *= scale;
    return Cheb(std::move(d), lo_, hi_);
  }

  Cheb derivative(int times) const {
    Cheb r = *this;
    for (int i = 0; i < times; ++i) r = r.derivative();
    return r;
  }

  /// Antiderivative vanishing at lo.
  Cheb integral() const {
    const std::size_t n = c_.size();
    std::vector<double> I(n + 1, 0.0);
    const double scale = 0.5 * (hi_ - lo_);
    auto c = [&](std::size_t k) { return k < n ? c_[k] : 0.0; };
    for (std::size_t k = 1; k <= n; ++k) {
      const double prev = k == 1 ? 2.0 * c(0) : c(k - 1);
      I[k] = scale * (prev - c(k + 1)) / (2.0 * k);
    }
    Cheb r(std::move(I), lo_, hi_);
    r.c_[0] -= r(lo_);
    return r;
  }

  Cheb& operator+=(const Cheb& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
    for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  Cheb& operator-=(const Cheb& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0.0);
    for (std::size_t k = 0; k < o.c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Cheb& operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  friend Cheb operator+(Cheb a, const Cheb& b) { return a += b; }
  friend Cheb operator-(Cheb a, const Cheb& b) { return a -= b; }
  friend Cheb operator*(double s, Cheb a) { return a *= s; }

 private:
  std::vector<double> c_{0.0};
  double lo_ = 0.0;
  double hi_ = 1.0;
};

/// Pointwise product re-interpolated at n points.
inline Cheb multiply(const Cheb& a, const Cheb& b, int n) {
  return Cheb::interpolate([&](double x) { return a(x) * b(x); }, n, a.lo(), a.hi());
}

/// Four-component Chebyshev vector function.
using ChebVec = std::array<Cheb, 4>;

inline ChebVec cheb_vec_zero(double lo, double hi) {
  return {Cheb::zero(lo, hi), Cheb::zero(lo, hi), Cheb::zero(lo, hi), Cheb::zero(lo, hi)};
}

inline Vec4 eval(const ChebVec& f, double x) { return {f[0](x), f[1](x), f[2](x), f[3](x)}; }

inline ChebVec derivative(const ChebVec& f) {
  return {f[0].derivative(), f[1].derivative(), f[2].derivative(), f[3].derivative()};
}

inline ChebVec operator+(const ChebVec& a, const ChebVec& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

inline ChebVec operator*(double s, const ChebVec& a) {
  return {s * a[0], s * a[1], s * a[2], s * a[3]};
}

template <class F>
ChebVec interpolate_vec(const F& f, int n, double lo, double hi) {
  std::vector<Vec4> vals(n);
  std::vector<double> xs(n);
  for (int j = 0; j < n; ++j) {
    const double t = std::cos(std::numbers::pi * (j + 0.5) / n);
    xs[j] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
    vals[j] = f(xs[j]);
  }
  ChebVec out;
  for (int i = 0; i < 4; ++i) {
    int j = 0;
    out[i] = Cheb::interpolate(
        [&](double) { return vals[j++][i]; }, n, lo, hi);
  }
  return out;
}

}  // namespace stiffwkb
