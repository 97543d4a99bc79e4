#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "banded.hpp"
#include "error.hpp"
#include "fem.hpp"

namespace stiffwkb {

struct Eigenpair {
  double lambda = 0.0;
  std::size_t index = 0;  // 1-based position in the full spectrum
  GridFunction u;         // L2-normalized
  double residual = 0.0;  // |K u - lambda M u| / (lambda |M u|)
  bool guard = false;     // window guard (outside the requested window)
};

struct Spectrum {
  std::vector<Eigenpair> pairs;
  std::size_t size() const { return pairs.size(); }
  const Eigenpair& operator[](std::size_t i) const { return pairs[i]; }

  /// Pairs that are not window guards.
  std::vector<const Eigenpair*> interior() const {
    std::vector<const Eigenpair*> r;
    for (const auto& p : pairs)
      if (!p.guard) r.push_back(&p);
    return r;
  }
};

struct EigenRequest {
  std::optional<std::size_t> count;             // lowest `count` eigenvalues
  std::optional<std::pair<double, double>> window;  // all in [lo, hi] plus one guard each side
  std::optional<std::pair<std::size_t, std::size_t>> indices;  // 1-based inclusive range

  static EigenRequest lowest(std::size_t n) { return {n, std::nullopt, std::nullopt}; }
  static EigenRequest in_window(double lo, double hi) {
    return {std::nullopt, std::make_pair(lo, hi), std::nullopt};
  }
  static EigenRequest index_range(std::size_t first, std::size_t last) {
    return {std::nullopt, std::nullopt, std::make_pair(first, last)};
  }
};

struct EigenOptions {
  double tolerance = 1e-10;  // relative generalized residual
  int max_iterations = 60;
};

namespace detail {

/// Number of eigenvalues strictly below sigma (Sylvester inertia).
inline std::size_t count_below(const AssembledSystem& s, double sigma) {
  BandLdlt f(s.K.axpy(-sigma, s.M));
  return f.negative_count();
}

/// Bisection bracket [lo, hi] isolating the j-th eigenvalue to relative width rel.
inline std::pair<double, double> isolate(const AssembledSystem& s, std::size_t j, double lo,
                                         double hi, double rel) {
  for (int it = 0; it < 200; ++it) {
    if (hi - lo <= rel * std::max(std::abs(hi), std::numeric_limits<double>::min())) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (count_below(s, mid) >= j)
      hi = mid;
    else
      lo = mid;
  }
  return {lo, hi};
}

inline void fix_sign(std::vector<double>& x, const AssembledSystem& s) {
  // first nodal value (not slope) that is clearly nonzero is made positive
  double vmax = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (s.free_dofs[i] % 2 == 0) vmax = std::max(vmax, std::abs(x[i]));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (s.free_dofs[i] % 2 != 0) continue;
    if (std::abs(x[i]) > 1e-8 * vmax) {
      if (x[i] < 0.0)
        for (auto& v : x) v = -v;
      return;
    }
  }
}

struct RefinedPair {
  double lambda;
  std::vector<double> x;
  double residual;
};

inline RefinedPair inverse_iteration(const AssembledSystem& s, double sigma,
                                     const std::vector<std::vector<double>>& deflate,
                                     const EigenOptions& opt) {
  BandLdlt f(s.K.axpy(-sigma, s.M));
  const std::size_t n = s.size();
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(0.731 * i + 0.1);
  const double knorm = s.K.norm_inf();
  double lambda = sigma, residual = std::numeric_limits<double>::infinity();
  auto m_normalize = [&](std::vector<double>& y) {
    const double nrm = std::sqrt(dot(y, s.M.multiply(y)));
    for (auto& v : y) v /= nrm;
  };
  auto deflate_against = [&](std::vector<double>& y) {
    for (const auto& q : deflate) {
      const double c = dot(y, s.M.multiply(q));
      for (std::size_t i = 0; i < n; ++i) y[i] -= c * q[i];
    }
  };
  for (int it = 0; it < opt.max_iterations; ++it) {
    auto y = f.solve(s.M.multiply(x));
    deflate_against(y);
    m_normalize(y);
    x = std::move(y);
    const auto kx = s.K.multiply(x);
    const auto mx = s.M.multiply(x);
    lambda = dot(x, kx);  // x is M-normalized
    double r2 = 0.0, m2 = 0.0, x2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = kx[i] - lambda * mx[i];
      r2 += r * r;
      m2 += mx[i] * mx[i];
      x2 += x[i] * x[i];
    }
    const double rabs = std::sqrt(r2);
    residual = rabs / (std::abs(lambda) * std::sqrt(m2));
    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * knorm * std::sqrt(x2);
    if (it >= 1 && (residual <= opt.tolerance || rabs <= floor)) {
      fix_sign(x, s);
      return {lambda, std::move(x), residual};
    }
  }
  throw NoConvergence("inverse iteration at shift " + std::to_string(sigma), residual);
}

}  // namespace detail

/// Generalized symmetric eigenproblem K u = lambda M u by Sturm-count
/// bisection followed by shift-invert inverse iteration on each isolated
/// eigenvalue, with M-orthogonal deflation against converged neighbours.
inline Spectrum solve_eigs(const AssembledSystem& s, const EigenRequest& req,
                           const EigenOptions& opt = {}) {
  const std::size_t n = s.size();
  std::size_t first = 1, last = 0;
  double lo_bound = 0.0, hi_bound = 1.0;
  std::size_t win_first = 0, win_last = 0;
  if (req.window) {
    auto [wlo, whi] = *req.window;
    if (!(wlo < whi)) throw std::invalid_argument("solve_eigs: empty window");
    const std::size_t c_lo = detail::count_below(s, wlo);
    const std::size_t c_hi = detail::count_below(s, whi);
    win_first = c_lo + 1;
    win_last = c_hi;
    first = c_lo >= 1 ? c_lo : 1;
    last = std::min(n, c_hi + 1);
  } else if (req.count) {
    if (*req.count == 0) throw std::invalid_argument("solve_eigs: count must be positive");
    first = 1;
    last = std::min(n, *req.count);
  } else if (req.indices) {
    first = req.indices->first;
    last = std::min(n, req.indices->second);
    if (first < 1 || first > last) throw std::invalid_argument("solve_eigs: bad index range");
  } else {
    throw std::invalid_argument("solve_eigs: empty request");
  }
  // bracket covering indices first..last
  lo_bound = 0.0;
  hi_bound = 1.0;
  while (detail::count_below(s, hi_bound) < last) hi_bound *= 4.0;
  if (req.window) {
    lo_bound = 0.0;
  }

  Spectrum spec;
  std::vector<std::vector<double>> converged;
  for (std::size_t j = first; j <= last; ++j) {
    auto [l, u] = detail::isolate(s, j, lo_bound, hi_bound, 1e-11);
    const double sigma = 0.5 * (l + u);
    auto rp = detail::inverse_iteration(s, sigma, converged, opt);
    Eigenpair p;
    p.lambda = rp.lambda;
    p.index = j;
    p.residual = rp.residual;
    p.u = s.grid(rp.x);
    p.guard = req.window && (j < win_first || j > win_last);
    converged.push_back(std::move(rp.x));
    spec.pairs.push_back(std::move(p));
    lo_bound = l;
  }
  return spec;
}

/// Rayleigh quotient x^t K x / x^t M x.
inline double rayleigh_quotient(const AssembledSystem& s, const std::vector<double>& x) {
  return dot(x, s.K.multiply(x)) / dot(x, s.M.multiply(x));
}

// ============================================================================
// One-interval limit problems
// ============================================================================

struct LimitMode {
  double lambda = 0.0;
  GridFunction v;  // L2-normalized
  EndFlux lo;      // recovered moment/shear at the left end
  EndFlux hi;
};

namespace detail {

inline LimitMode limit_mode(const CoefficientFn& k, std::vector<double> nodes, bool clamp_lo,
                            bool clamp_hi, std::size_t mode) {
  if (mode < 1) throw std::invalid_argument("limit problem: mode must be >= 1");
  auto d = single_interval(k, std::move(nodes));
  const auto mask = clamp_mask(d.dofs(), clamp_lo, clamp_hi);
  auto s = constrain(std::move(d), mask);
  auto spec = solve_eigs(s, EigenRequest::index_range(mode, mode));
  LimitMode m;
  m.lambda = spec.pairs[0].lambda;
  m.v = spec.pairs[0].u;
  std::vector<double> zero(s.disc.dofs(), 0.0);
  auto [lo, hi] = recover_end_flux(s.full, m.v.dofs(), m.lambda, zero);
  m.lo = lo;
  m.hi = hi;
  return m;
}

}  // namespace detail

/// Clamped at a, free at 0: (k0 v'')'' = omega^4 v on (a, 0); v(0) > 0.
inline LimitMode solve_limit_cantilever(const CoefficientFn& k0, double a, std::size_t mode,
                                        std::size_t elements = kDefaultIntervalElements) {
  auto m = detail::limit_mode(k0, uniform_nodes(a, 0.0, elements), true, false, mode);
  if (m.v.value_at_node(m.v.nodes().size() - 1) < 0.0) {
    m.v *= -1.0;
    m.lo = {-m.lo.moment, -m.lo.shear};
    m.hi = {-m.hi.moment, -m.hi.shear};
  }
  return m;
}

/// Clamped at both ends: (k1 w'')'' = lambda0 w on (0, b).
inline LimitMode solve_limit_clamped(const CoefficientFn& k1, double b, std::size_t mode,
                                     std::size_t elements = kDefaultIntervalElements) {
  return detail::limit_mode(k1, uniform_nodes(0.0, b, elements), true, true, mode);
}

}  // namespace stiffwkb
