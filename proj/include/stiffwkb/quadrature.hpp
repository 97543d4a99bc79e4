#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "error.hpp"

namespace stiffwkb {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n) {
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  return r;
}

namespace detail {

// Kronrod 15-point abscissae (positive half) and weights; Gauss 7-point weights.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Gk15 {
  double kronrod;
  double error;
  double abs_integral;
};

template <class F>
Gk15 gk15(const F& f, double x0, double x1) {
  const double c = 0.5 * (x0 + x1), h = 0.5 * (x1 - x0);
  const double fc = f(c);
  double k = fc * kWgk[7], g = fc * kWg[3], ak = std::abs(fc) * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(c - dx), f2 = f(c + dx);
    k += kWgk[j] * (f1 + f2);
    ak += kWgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) g += kWg[j / 2] * (f1 + f2);
  }
  return {k * h, std::abs((k - g) * h), ak * std::abs(h)};
}

template <class F>
double adaptive(const F& f, double x0, double x1, double tol, double width, int level,
                int max_levels) {
  const Gk15 r = gk15(f, x0, x1);
  const double local_tol = tol * std::abs(x1 - x0) / width;
  const double floor = 50.0 * std::numeric_limits<double>::epsilon() * r.abs_integral;
  if (r.error <= std::max(local_tol, floor)) return r.kronrod;
  if (level >= max_levels)
    throw Error(ErrorKind::tolerance_not_reached,
                "adaptive quadrature hit the subdivision limit on [" + std::to_string(x0) + ", " +
                    std::to_string(x1) + "]");
  const double m = 0.5 * (x0 + x1);
  return adaptive(f, x0, m, tol, width, level + 1, max_levels) +
         adaptive(f, m, x1, tol, width, level + 1, max_levels);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) quadrature by recursive bisection. The error
/// budget is distributed proportionally to subinterval width, so the result
/// does not depend on the order in which subintervals are visited.
template <class F>
double integrate(const F& f, double x0, double x1, double tol = 1e-12, int max_levels = 24) {
  if (x0 == x1) return 0.0;
  if (!(tol > 0.0)) throw std::invalid_argument("integrate: tol must be positive");
  return detail::adaptive(f, x0, x1, tol, std::abs(x1 - x0), 0, max_levels);
}

}  // namespace stiffwkb
