#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "chebyshev.hpp"
#include "coeffs.hpp"
#include "eigensolver.hpp"
#include "error.hpp"
#include "fem.hpp"
#include "linalg.hpp"

namespace stiffwkb {

// ============================================================================
// delta admissibility, omega1, eps_p
// ============================================================================

inline void check_delta(double delta, double guard = 1e-6) {
  if (!std::isfinite(delta) || std::abs(std::cos(delta)) < guard)
    throw Error(ErrorKind::degenerate_delta,
                "delta = " + std::to_string(delta) + " makes G0 singular (cos delta = 0)");
}

/// omega1 = -1/4 k1(0)^{1/4} v0(0)^2 (1 + tan delta).
inline double omega1(double delta, double k1_at_0, double v0_at_0) {
  check_delta(delta);
  return -0.25 * std::pow(k1_at_0, 0.25) * v0_at_0 * v0_at_0 * (1.0 + std::tan(delta));
}

struct EpsilonSequence {
  double delta = 0.0;
  double omega0 = 0.0;
  double omega1 = 0.0;
  double S_b = 0.0;
  int p_first = 1;
  std::vector<double> values;  // eps_p for p = p_first, p_first + 1, ...

  int p_last() const { return p_first + static_cast<int>(values.size()) - 1; }
  double eps(int p) const { return values.at(static_cast<std::size_t>(p - p_first)); }
  double gamma(int p) const { return 1.0 / eps(p) + omega1 / omega0; }
};

inline EpsilonSequence epsilon_sequence(double delta, double omega0, double omega1, double S_b,
                                        int p_max, int p_min = 1) {
  if (!(S_b > 0.0)) throw std::invalid_argument("epsilon_sequence: S_b must be positive");
  check_delta(delta);
  EpsilonSequence s{delta, omega0, omega1, S_b, 0, {}};
  int p = std::max(1, p_min);
  while (omega0 * (delta + 2.0 * std::numbers::pi * p) - omega1 * S_b <= 0.0) ++p;
  s.p_first = p;
  if (p_max < p)
    throw Error(ErrorKind::empty_sequence, "p_max = " + std::to_string(p_max) +
                                               " is below the first admissible p = " +
                                               std::to_string(p));
  for (; p <= p_max; ++p)
    s.values.push_back(omega0 * S_b /
                       (omega0 * (delta + 2.0 * std::numbers::pi * p) - omega1 * S_b));
  return s;
}

// ============================================================================
// Transport matrix A, fundamental matrix Phi, algebraic systems G, G0
// ============================================================================

struct TransportParams {
  double omega0 = 0.0;
  double omega1 = 0.0;
  double delta = 0.0;
  PhaseFn phase;

  const CoefficientFn& k1() const { return phase.k1(); }
  double b() const { return phase.b(); }
  double ratio() const { return omega1 / omega0; }
};

/// A(x) = -k1'/(8 k1) I + omega1 k1^{-1/4} T^3.
inline Mat4 transport_A(const TransportParams& p, double x) {
  const double k = p.k1()(x);
  const double diag = -p.k1().derivative(x, 1) / (8.0 * k);
  const double c = p.omega1 * std::pow(k, -0.25);
  Mat4 a = c * StructureMatrixT::T3();
  for (int i = 0; i < 4; ++i) a[i][i] += diag;
  return a;
}

namespace detail {
inline Mat4 phi_core(double r, double s, double s_b) {
  Mat4 m{};
  m[0][0] = std::cos(r * s);
  m[0][1] = std::sin(r * s);
  m[1][0] = -std::sin(r * s);
  m[1][1] = std::cos(r * s);
  m[2][2] = std::exp(-r * s);
  m[3][3] = std::exp(r * (s - s_b));
  return m;
}
}  // namespace detail

/// Phi(x) = k1^{-1/8} blockdiag(rot(r S), e^{-r S}, e^{r (S - S(b))}), r = omega1/omega0.
inline Mat4 fundamental_phi(const TransportParams& p, double x) {
  return std::pow(p.k1()(x), -0.125) *
         detail::phi_core(p.ratio(), p.phase(x), p.phase.S_b());
}

inline Mat4 fundamental_phi_inv(const TransportParams& p, double x) {
  return std::pow(p.k1()(x), 0.125) *
         detail::phi_core(-p.ratio(), p.phase(x), p.phase.S_b());
}

/// Rows <beta, N(gamma, 0)>, <beta, T N(gamma, 0)>, <beta, N(gamma, b)>, <beta, T N(gamma, b)>.
inline Mat4 algebraic_G(double gamma, double S_b) {
  const double c = std::cos(gamma * S_b), s = std::sin(gamma * S_b), e = std::exp(-gamma * S_b);
  const Mat4 t = StructureMatrixT::T();
  const Vec4 n0{1.0, 0.0, 1.0, e}, nb{c, s, e, 1.0};
  const Vec4 tn0 = t * n0, tnb = t * nb;
  return {n0, tn0, nb, tnb};
}

inline Mat4 algebraic_G0(double delta) {
  const Mat4 t = StructureMatrixT::T();
  const Vec4 n0{1.0, 0.0, 1.0, 0.0}, nd{std::cos(delta), std::sin(delta), 0.0, 1.0};
  return {n0, t * n0, nd, t * nd};
}

inline Vec4 solve_G0(double delta, const Vec4& g) {
  check_delta(delta);
  return solve(algebraic_G0(delta), g);
}

// ============================================================================
// Transport boundary-value problem
// ============================================================================

using VecFn = std::function<Vec4(double)>;

struct TransportSolution {
  ChebVec y;
  Vec4 beta{};
};

/// y' = A y + w on (0, b) with, neglecting exponentially small terms,
///   <y(0), N(1/eps, 0)> = s1, <y(0), T N(1/eps, 0)> = s2,
///   <y(b), N(1/eps, b)> = s3, <y(b), T N(1/eps, b)> = s4.
inline TransportSolution solve_transport(const VecFn& w, const Vec4& sigma,
                                         const TransportParams& p, int points = 48) {
  check_delta(p.delta);
  const double b = p.b();
  ChebVec h;
  const bool zero_w = !w;
  if (zero_w) {
    h = cheb_vec_zero(0.0, b);
  } else {
    const auto g = interpolate_vec(
        [&](double x) { return fundamental_phi_inv(p, x) * w(x); }, points, 0.0, b);
    for (int i = 0; i < 4; ++i) h[i] = g[i].integral();
  }
  const Vec4 hb = eval(h, b);
  const Mat4 t = StructureMatrixT::T();
  const Vec4 nd{std::cos(p.delta), std::sin(p.delta), 0.0, 1.0};
  const double m0 = std::pow(p.k1()(0.0), 0.125), m1 = std::pow(p.k1()(b), 0.125);
  const Vec4 g{m0 * sigma[0], m0 * sigma[1], m1 * sigma[2] - dot(hb, nd),
               m1 * sigma[3] - dot(hb, t * nd)};
  TransportSolution sol;
  sol.beta = solve_G0(p.delta, g);
  const Vec4 beta = sol.beta;
  sol.y = interpolate_vec(
      [&](double x) { return fundamental_phi(p, x) * (beta + eval(h, x)); }, points, 0.0, b);
  return sol;
}

// ============================================================================
// Operator expansion eps^4 (k1 u'')'' = <L L k1 L L F, N>, L = eps D + S' J
// ============================================================================

/// Coefficients in powers of eps of k1 L L f (moment), L k1 L L f (shear)
/// and L L k1 L L f (the full operator, O_0 ... O_4).
struct OperatorImage {
  std::vector<ChebVec> moment;  // eps^0..2
  std::vector<ChebVec> shear;   // eps^0..3
  std::vector<ChebVec> full;    // eps^0..4
};

namespace detail {

inline ChebVec apply_J(const ChebVec& v) {
  // J = T^t: (v1, -v0, -v2, v3)
  return {v[1], -1.0 * v[0], -1.0 * v[2], v[3]};
}

inline ChebVec times(const ChebVec& v, const std::function<double(double)>& g, int n) {
  ChebVec r;
  for (int i = 0; i < 4; ++i)
    r[i] = Cheb::interpolate([&](double x) { return v[i](x) * g(x); }, n, v[i].lo(), v[i].hi());
  return r;
}

inline std::vector<ChebVec> apply_L(const std::vector<ChebVec>& P, const PhaseFn& ph, int n) {
  const double lo = P.front()[0].lo(), hi = P.front()[0].hi();
  std::vector<ChebVec> out(P.size() + 1, cheb_vec_zero(lo, hi));
  const auto dS = [&ph](double x) { return ph.dS(x); };
  for (std::size_t e = 0; e < P.size(); ++e) {
    out[e + 1] = out[e + 1] + derivative(P[e]);
    out[e] = out[e] + times(apply_J(P[e]), dS, n);
  }
  return out;
}

}  // namespace detail

inline OperatorImage operator_image(const ChebVec& f, const PhaseFn& ph, int n = 48) {
  std::vector<ChebVec> P{f};
  P = detail::apply_L(P, ph, n);
  P = detail::apply_L(P, ph, n);
  const auto& k1 = ph.k1();
  const auto kfn = [&k1](double x) { return k1(x); };
  for (auto& v : P) v = detail::times(v, kfn, n);
  OperatorImage img;
  img.moment = P;
  img.shear = detail::apply_L(img.moment, ph, n);
  img.full = detail::apply_L(img.shear, ph, n);
  return img;
}

// ============================================================================
// WKB expansion state and recursion
// ============================================================================

/// lambda_s = sum_{i+j+k+l=s} w_i w_j w_k w_l (missing omegas count as 0).
inline double lambda_s(std::size_t s, const std::vector<double>& w) {
  auto om = [&w](std::size_t i) { return i < w.size() ? w[i] : 0.0; };
  double t = 0.0;
  for (std::size_t i = 0; i <= s; ++i)
    for (std::size_t j = 0; i + j <= s; ++j)
      for (std::size_t k = 0; i + j + k <= s; ++k) t += om(i) * om(j) * om(k) * om(s - i - j - k);
  return t;
}

/// Same coefficients by repeated polynomial multiplication of (sum eps^k w_k)^4.
inline std::vector<double> lambda_by_power(const std::vector<double>& w, std::size_t smax) {
  std::vector<double> p(smax + 1, 0.0);
  p[0] = 1.0;
  for (int rep = 0; rep < 4; ++rep) {
    std::vector<double> q(smax + 1, 0.0);
    for (std::size_t i = 0; i <= smax; ++i)
      for (std::size_t j = 0; j < w.size() && i + j <= smax; ++j) q[i + j] += p[i] * w[j];
    p = std::move(q);
  }
  return p;
}

struct WkbOptions {
  int order = 2;               // f_0..f_n, v_0..v_{n+1}, omega_0..omega_{n+1}
  std::size_t mode = 1;        // cantilever mode of the limit problem
  std::size_t stiff_elements = 256;
  int cheb_points = 48;
  double quadrature_tol = 1e-12;
};

struct WkbExpansion {
  double delta = 0.0;
  int order = 0;
  std::vector<double> omegas;  // omega_0 ... omega_{order+1}
  std::vector<GridFunction> vs;  // v_0 ... v_{order+1} on (a, 0)
  std::vector<ChebVec> fs;       // f_0 ... f_order on (0, b)
  TransportParams params;
  StiffProblem problem;
  double lambda_limit = 0.0;  // omega0^4 from the discrete limit problem
  double omega1_closed = 0.0;
  double omega1_fredholm = 0.0;
  std::vector<double> compatibility;  // v_{k+1} compatibility functional per step
  int cheb_points = 48;

  double omega0() const { return omegas[0]; }
  const PhaseFn& phase() const { return params.phase; }

  double lambda_coeff(std::size_t s) const { return lambda_s(s, omegas); }

  EpsilonSequence sequence(int p_max, int p_min = 1) const {
    return epsilon_sequence(delta, omegas[0], omegas[1], params.phase.S_b(), p_max, p_min);
  }
};

/// w_k = T^3 / (4 k1 S'^3) [sum_{l=2}^{k+1} lambda_l f_{k+1-l} - sum_{j=2}^{4} O_j f_{k+1-j}],
/// with lambda_{k+1} evaluated at omega_{k+1} = omega_next.
inline VecFn wk_rhs(int k, const WkbExpansion& st, const std::vector<OperatorImage>& images,
                    double omega_next) {
  std::vector<double> om(st.omegas.begin(), st.omegas.begin() + k + 1);
  om.push_back(omega_next);
  std::vector<double> lam(k + 2);
  for (int l = 0; l <= k + 1; ++l) lam[l] = lambda_s(l, om);
  const auto& ph = st.params.phase;
  return [k, lam, &st, &images, &ph](double x) {
    Vec4 acc{};
    for (int l = 2; l <= k + 1; ++l) acc = acc + lam[l] * eval(st.fs[k + 1 - l], x);
    for (int j = 2; j <= 4; ++j)
      if (k + 1 - j >= 0) acc = acc - eval(images[k + 1 - j].full[j], x);
    const double s1 = ph.dS(x);
    return (1.0 / (4.0 * ph.k1()(x) * s1 * s1 * s1)) * (StructureMatrixT::T3() * acc);
  };
}

namespace detail {

inline Vec4 N0() { return {1.0, 0.0, 1.0, 0.0}; }

/// N(1/eps_p, b) with exponentially small terms dropped.
inline Vec4 N_b(const WkbExpansion& st) {
  const double th = st.omegas[1] * st.params.phase.S_b() / st.omegas[0];
  return {std::cos(st.delta - th), std::sin(st.delta - th), 0.0, 1.0};
}

/// Moment (eps^{m-2}) and shear (eps^{m-1}) coefficients at 0 for v_m from f_0..f_{m-1}.
inline std::pair<double, double> natural_data(int m, const std::vector<OperatorImage>& imgs) {
  double mom = 0.0, sh = 0.0;
  const Vec4 n0 = N0();
  for (int i = 0; i < static_cast<int>(imgs.size()); ++i) {
    const int em = m - 2 - i, es = m - 1 - i;
    if (em >= 0 && em < static_cast<int>(imgs[i].moment.size()))
      mom += dot(eval(imgs[i].moment[em], 0.0), n0);
    if (es >= 0 && es < static_cast<int>(imgs[i].shear.size()))
      sh += dot(eval(imgs[i].shear[es], 0.0), n0);
  }
  return {mom, sh};
}

/// v_m: (k0 v'')'' - omega0^4 v = sum_{l=1}^m lambda_l v_{m-l}, clamped at a,
/// natural data at 0, orthogonal to v_0.
inline BvpSolution solve_vm(const WkbExpansion& st, int m, double moment, double shear) {
  std::vector<double> lam(m + 1);
  for (int l = 0; l <= m; ++l) lam[l] = lambda_s(l, st.omegas);
  std::vector<GridFunction> vs(st.vs.begin(), st.vs.begin() + m);
  const ScalarFn rhs = [lam, vs, m](double x) {
    double s = 0.0;
    for (int l = 1; l <= m; ++l) s += lam[l] * vs[m - l](x);
    return s;
  };
  return solve_bvp_orthogonal(st.problem.k0, rhs, BoundaryCondition::clamped(),
                              BoundaryCondition::natural(moment, shear), st.lambda_limit,
                              st.vs[0], 1e-5);
}

}  // namespace detail

/// f0 = Phi beta0 with sigma = (v0(0), 0, 0, 0).
inline ChebVec f0(const TransportParams& p, double v0_at_0, int points = 48) {
  return solve_transport(nullptr, {v0_at_0, 0.0, 0.0, 0.0}, p, points).y;
}

/// One step: f_k, omega_{k+1}, v_{k+1}. Requires f_0..f_{k-1}, v_0..v_k, omega_0..omega_k.
inline void recursion_step(int k, WkbExpansion& st, std::vector<OperatorImage>& images) {
  const auto& ph = st.params.phase;
  const double b = ph.b();
  const int n = st.cheb_points;
  const double w0 = st.omegas[0];
  const Vec4 n0 = detail::N0(), nb = detail::N_b(st);
  const auto& fprev = st.fs[k - 1];
  const ChebVec dprev = derivative(fprev);
  const Vec4 sigma{st.vs[k].eval(0.0, 0, -1),
                   (st.vs[k - 1].eval(0.0, 1, -1) - dot(eval(dprev, 0.0), n0)) / ph.dS(0.0), 0.0,
                   -dot(eval(dprev, b), nb) / ph.dS(b)};

  // f_k depends affinely on omega_{k+1}: f_k = fa + omega_{k+1} fb
  const auto wa = wk_rhs(k, st, images, 0.0);
  const auto w1 = wk_rhs(k, st, images, 1.0);
  const VecFn wb = [&wa, &w1](double x) { return w1(x) - wa(x); };
  const ChebVec fa = solve_transport(wa, sigma, st.params, n).y;
  const ChebVec fb = solve_transport(wb, {0.0, 0.0, 0.0, 0.0}, st.params, n).y;
  const auto img_a = operator_image(fa, ph, n);
  const auto img_b = operator_image(fb, ph, n);

  auto imgs_a = images;
  imgs_a.push_back(img_a);
  auto [mom_a, sh_a] = detail::natural_data(k + 1, imgs_a);
  std::vector<OperatorImage> imgs_b(images.size(), OperatorImage{});
  for (auto& im : imgs_b) {
    im.moment.assign(3, cheb_vec_zero(0.0, b));
    im.shear.assign(4, cheb_vec_zero(0.0, b));
  }
  imgs_b.push_back(img_b);
  auto [mom_b, sh_b] = detail::natural_data(k + 1, imgs_b);

  // Fredholm: lambda_{k+1} = shear v0(0) - moment v0'(0)
  std::vector<double> om(st.omegas.begin(), st.omegas.begin() + k + 1);
  om.push_back(0.0);
  const double lam_hat = lambda_s(k + 1, om);
  const double v00 = st.vs[0].eval(0.0, 0, -1), v0p = st.vs[0].eval(0.0, 1, -1);
  const double denom = 4.0 * w0 * w0 * w0 - sh_b * v00 + mom_b * v0p;
  const double w_next = (sh_a * v00 - mom_a * v0p - lam_hat) / denom;

  ChebVec fk;
  for (int i = 0; i < 4; ++i) fk[i] = fa[i] + w_next * fb[i];
  st.fs.push_back(fk);
  images.push_back(operator_image(fk, ph, n));
  if (static_cast<int>(st.omegas.size()) == k + 1)
    st.omegas.push_back(w_next);
  else
    st.omegas[k + 1] = w_next;

  auto [mom, sh] = detail::natural_data(k + 1, images);
  auto sol = detail::solve_vm(st, k + 1, mom, sh);
  st.vs.push_back(sol.y);
  st.compatibility.push_back(sol.compatibility);
}

/// Builds the expansion through order n (f_0..f_n, omega_0..omega_{n+1}, v_0..v_{n+1}).
inline WkbExpansion build_wkb(const StiffProblem& problem, double delta,
                              const WkbOptions& opt = {}) {
  problem.validate();
  check_delta(delta);
  WkbExpansion st;
  st.delta = delta;
  st.order = opt.order;
  st.problem = problem;
  st.cheb_points = opt.cheb_points;

  const auto lim = solve_limit_cantilever(problem.k0, problem.a, opt.mode, opt.stiff_elements);
  st.lambda_limit = lim.lambda;
  const double w0 = std::pow(lim.lambda, 0.25);
  st.omegas = {w0};
  st.vs = {lim.v};
  const double v00 = lim.v.eval(0.0, 0, -1);

  st.omega1_closed = omega1(delta, problem.k1(0.0), v00);
  st.params = TransportParams{w0, st.omega1_closed, delta,
                              PhaseFn(w0, problem.k1, problem.b, opt.quadrature_tol)};
  ChebVec f = f0(st.params, v00, opt.cheb_points);
  auto img = operator_image(f, st.params.phase, opt.cheb_points);
  // lambda_1 = shear_1 v0(0) (moment_1 = 0), lambda_1 = 4 omega0^3 omega1
  const double sh1 = dot(eval(img.shear[0], 0.0), detail::N0());
  st.omega1_fredholm = sh1 * v00 / (4.0 * w0 * w0 * w0);
  double w1 = st.omega1_closed;
  if (std::abs(st.omega1_fredholm - st.omega1_closed) >
      1e-6 * std::max(1.0, std::abs(st.omega1_closed))) {
    w1 = st.omega1_fredholm;
    st.params.omega1 = w1;
    f = f0(st.params, v00, opt.cheb_points);
    img = operator_image(f, st.params.phase, opt.cheb_points);
  }
  st.omegas.push_back(w1);
  st.fs = {f};
  std::vector<OperatorImage> images{img};

  auto v1 = detail::solve_vm(st, 1, 0.0, sh1);
  st.vs.push_back(v1.y);
  st.compatibility.push_back(v1.compatibility);

  for (int k = 1; k <= opt.order; ++k) recursion_step(k, st, images);
  return st;
}

// ============================================================================
// Composition along eps_p
// ============================================================================

struct HighFreqComposition {
  double epsilon = 0.0;
  double lambda = 0.0;
  std::function<double(double)> u;
};

inline HighFreqComposition compose_high(const WkbExpansion& st, double epsilon, int n) {
  if (n < 0 || n > st.order) throw std::invalid_argument("compose_high: order out of range");
  HighFreqComposition c;
  c.epsilon = epsilon;
  for (int s = 0; s <= n; ++s) c.lambda += std::pow(epsilon, s) * st.lambda_coeff(s);
  const auto* sp = &st;
  c.u = [sp, epsilon, n](double x) {
    double v = 0.0, e = 1.0;
    if (x < 0.0) {
      for (int k = 0; k <= n; ++k, e *= epsilon) v += e * sp->vs[k](x);
      return v;
    }
    const Vec4 N = basis_N(1.0 / epsilon, x, sp->phase());
    for (int k = 0; k <= n; ++k, e *= epsilon) v += e * dot(eval(sp->fs[k], x), N);
    return v;
  };
  return c;
}

inline HighFreqComposition compose_high(const WkbExpansion& st, const EpsilonSequence& seq, int p,
                                        int n) {
  return compose_high(st, seq.eps(p), n);
}

}  // namespace stiffwkb
