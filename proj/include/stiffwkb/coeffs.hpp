#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "jet.hpp"
#include "linalg.hpp"
#include "quadrature.hpp"

namespace stiffwkb {

// ============================================================================
// Coefficient catalog
// ============================================================================

enum class CoefficientKind { constant, affine, exponential };

inline const char* to_string(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::constant: return "constant";
    case CoefficientKind::affine: return "affine";
    case CoefficientKind::exponential: return "exponential";
  }
  return "constant";
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
};

/// k(x) = c, c + d x, or c exp(d x) on a closed interval, strictly positive.
class CoefficientFn {
 public:
  CoefficientFn() = default;
  CoefficientFn(CoefficientKind kind, double c, double d, Interval domain)
      : kind_(kind), c_(c), d_(kind == CoefficientKind::constant ? 0.0 : d), domain_(domain) {}

  CoefficientKind kind() const { return kind_; }
  double c() const { return c_; }
  double d() const { return d_; }
  const Interval& domain() const { return domain_; }

  double operator()(double x) const { return derivative(x, 0); }

  /// n-th derivative in closed form.
  double derivative(double x, int n) const {
    switch (kind_) {
      case CoefficientKind::constant: return n == 0 ? c_ : 0.0;
      case CoefficientKind::affine: return n == 0 ? c_ + d_ * x : (n == 1 ? d_ : 0.0);
      case CoefficientKind::exponential: return c_ * std::pow(d_, n) * std::exp(d_ * x);
    }
    return 0.0;
  }

  Jet jet(double x, int order = Jet::kMaxOrder) const {
    Jet j = Jet::constant(0.0, order);
    for (int i = 0; i <= order; ++i) j[i] = derivative(x, i);
    return j;
  }

  /// Minimum of k over the domain; every catalog family is monotone, so the
  /// minimum sits at an endpoint.
  double min_value() const { return std::min((*this)(domain_.lo), (*this)(domain_.hi)); }

  /// Exact definite integral of k.
  double integral(double x0, double x1) const {
    switch (kind_) {
      case CoefficientKind::constant: return c_ * (x1 - x0);
      case CoefficientKind::affine: return c_ * (x1 - x0) + 0.5 * d_ * (x1 * x1 - x0 * x0);
      case CoefficientKind::exponential:
        if (d_ == 0.0) return c_ * (x1 - x0);
        return c_ / d_ * (std::exp(d_ * x1) - std::exp(d_ * x0));
    }
    return 0.0;
  }

  bool is_constant() const { return kind_ == CoefficientKind::constant || d_ == 0.0; }

 private:
  CoefficientKind kind_ = CoefficientKind::constant;
  double c_ = 1.0;
  double d_ = 0.0;
  Interval domain_{};
};

inline CoefficientFn make_coefficient(CoefficientKind kind, double c, double d, Interval domain) {
  if (!(domain.lo < domain.hi)) throw std::invalid_argument("make_coefficient: empty domain");
  CoefficientFn k(kind, c, d, domain);
  const double m = k.min_value();
  if (!(m > 0.0) || !std::isfinite(m))
    throw Error(ErrorKind::non_positive_coefficient,
                std::string(to_string(kind)) + " coefficient has minimum " + std::to_string(m) +
                    " on [" + std::to_string(domain.lo) + ", " + std::to_string(domain.hi) + "]");
  return k;
}

inline CoefficientFn constant_coefficient(double c, Interval domain) {
  return make_coefficient(CoefficientKind::constant, c, 0.0, domain);
}

// ============================================================================
// Phase S(x) = omega0 * int_0^x k1^{-1/4}
// ============================================================================

class PhaseFn {
 public:
  PhaseFn() = default;

  PhaseFn(double omega0, CoefficientFn k1, double b, double tol = 1e-12, int knots = 32)
      : omega0_(omega0), k1_(std::move(k1)), b_(b), tol_(tol) {
    knot_x_.resize(knots + 1);
    knot_s_.resize(knots + 1);
    knot_s_[0] = 0.0;
    for (int i = 0; i <= knots; ++i) knot_x_[i] = b_ * i / knots;
    for (int i = 1; i <= knots; ++i)
      knot_s_[i] = knot_s_[i - 1] + segment(knot_x_[i - 1], knot_x_[i]);
  }

  double omega0() const { return omega0_; }
  const CoefficientFn& k1() const { return k1_; }
  double b() const { return b_; }

  double operator()(double x) const {
    if (x <= 0.0) return x == 0.0 ? 0.0 : segment(0.0, x);
    const double n = static_cast<double>(knot_x_.size() - 1);
    auto i = static_cast<std::size_t>(std::clamp(std::floor(x / b_ * n), 0.0, n - 1));
    if (x >= b_) i = knot_x_.size() - 1;
    return knot_s_[i] + segment(knot_x_[i], x);
  }

  double S_b() const { return knot_s_.back(); }
  double dS(double x) const { return omega0_ * std::pow(k1_(x), -0.25); }

  double d2S(double x) const {
    return -0.25 * omega0_ * std::pow(k1_(x), -1.25) * k1_.derivative(x, 1);
  }

  /// Jet of S at x (value from the quadrature, derivatives in closed form).
  Jet jet(double x, int order = Jet::kMaxOrder) const {
    Jet dk = omega0_ * pow(k1_.jet(x, order - 1), -0.25);
    Jet s = Jet::constant((*this)(x), order);
    for (int i = 1; i <= order; ++i) s[i] = dk[i - 1];
    return s;
  }

 private:
  double segment(double x0, double x1) const {
    if (x0 == x1) return 0.0;
    const auto& k = k1_;
    return omega0_ * integrate([&k](double t) { return std::pow(k(t), -0.25); }, x0, x1, tol_);
  }

  double omega0_ = 1.0;
  CoefficientFn k1_{};
  double b_ = 1.0;
  double tol_ = 1e-12;
  std::vector<double> knot_x_{0.0};
  std::vector<double> knot_s_{0.0};
};

inline double phase(double omega0, const CoefficientFn& k1, double x, double tol = 1e-12) {
  return omega0 * integrate([&k1](double t) { return std::pow(k1(t), -0.25); }, 0.0, x, tol);
}

// ============================================================================
// Structure matrix T and the basis vector N
// ============================================================================

struct StructureMatrixT {
  /// blockdiag([[0,-1],[1,0]], [[-1,0],[0,1]])
  static Mat4 T() {
    Mat4 m{};
    m[0][1] = -1.0;
    m[1][0] = 1.0;
    m[2][2] = -1.0;
    m[3][3] = 1.0;
    return m;
  }
  static Mat4 T2() {
    Mat4 m{};
    m[0][0] = -1.0;
    m[1][1] = -1.0;
    m[2][2] = 1.0;
    m[3][3] = 1.0;
    return m;
  }
  /// T^3 = T^t = T^{-1}.
  static Mat4 T3() {
    Mat4 m{};
    m[0][1] = 1.0;
    m[1][0] = -1.0;
    m[2][2] = -1.0;
    m[3][3] = 1.0;
    return m;
  }
};

/// N(kappa, x) = (cos kS, sin kS, e^{-kS}, e^{k(S - S(b))}).
inline Vec4 basis_N(double kappa, double x, const PhaseFn& phase) {
  const double s = phase(x);
  return {std::cos(kappa * s), std::sin(kappa * s), std::exp(-kappa * s),
          std::exp(kappa * (s - phase.S_b()))};
}

/// Same vector from precomputed S(x) and S(b).
inline Vec4 basis_N_from_phase(double kappa, double s, double s_b) {
  return {std::cos(kappa * s), std::sin(kappa * s), std::exp(-kappa * s),
          std::exp(kappa * (s - s_b))};
}

/// Jets of the four components of N(kappa, x).
inline std::array<Jet, 4> basis_N_jet(double kappa, const Jet& s, double s_b) {
  auto [c, sn] = cos_sin(kappa * s);
  return {c, sn, exp(-kappa * s), exp(kappa * (s + (-s_b)))};
}

}  // namespace stiffwkb
