#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "stiffwkb/wkb.hpp"

using namespace stiffwkb;

namespace {

constexpr double pi = std::numbers::pi;

const WkbExpansion& canonical(double delta) {
  static const WkbExpansion e0 = build_wkb(canonical_problem(), 0.0, {.order = 3});
  static const WkbExpansion e1 = build_wkb(canonical_problem(), 1.0, {.order = 3});
  return delta == 0.0 ? e0 : e1;
}

TransportParams affine_params(double delta, double w1) {
  const auto k = make_coefficient(CoefficientKind::affine, 1.0, 0.5, {0.0, 1.0});
  return TransportParams{1.875, w1, delta, PhaseFn(1.875, k, 1.0)};
}

std::vector<OperatorImage> images_of(const WkbExpansion& st, int count) {
  std::vector<OperatorImage> out;
  for (int i = 0; i < count; ++i) out.push_back(operator_image(st.fs[i], st.phase(), st.cheb_points));
  return out;
}

/// Exact eigenvalue of the canonical problem closest to `target`.
double exact_near(double eps, double target, double window = 0.3) {
  const auto v = oracle::canonical_eigs(eps, target - window, target + window, 600);
  double best = v.at(0);
  for (double x : v)
    if (std::abs(x - target) < std::abs(best - target)) best = x;
  return best;
}

}  // namespace

TEST(omega1, examples) {
  EXPECT_NEAR(omega1(0.0, 1.0, 2.0), -1.0, 1e-15);
  EXPECT_NEAR(omega1(pi, 1.0, 2.0), -1.0, 1e-15);
  EXPECT_EQ(omega1(0.3, 1.0, 0.0), 0.0);
  EXPECT_NEAR(omega1(1.0, 16.0, 1.0), -0.5 * (1.0 + std::tan(1.0)), 1e-14);
}

TEST(delta_guard, degenerate_values) {
  for (double d : {pi / 2, -pi / 2, 3 * pi / 2, pi / 2 + 1e-7}) {
    try {
      check_delta(d);
      FAIL() << d;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::degenerate_delta);
    }
  }
  EXPECT_NO_THROW(check_delta(pi / 2 + 1e-5));
  EXPECT_THROW(solve_G0(pi / 2, {1, 0, 0, 0}), Error);
}

TEST(epsilon_sequence, formula_and_defining_relation) {
  const double w0 = oracle::clamped_free_root(1);
  const auto s = epsilon_sequence(0.0, w0, -1.0, w0, 6);
  ASSERT_EQ(s.p_first, 1);
  for (int p = 1; p <= 6; ++p) {
    EXPECT_NEAR(s.eps(p), w0 / (2 * pi * p + 1), 1e-15);
    EXPECT_NEAR(s.gamma(p) * s.S_b, 2 * pi * p, 1e-12);
  }
  const auto z = epsilon_sequence(0.4, 1.0, 0.0, 1.5, 3);
  for (int p = 1; p <= 3; ++p) EXPECT_NEAR(z.eps(p), 1.5 / (2 * pi * p + 0.4), 1e-15);
}

TEST(epsilon_sequence, skips_inadmissible_and_rejects_empty) {
  const auto s = epsilon_sequence(0.0, 1.0, 7.0, 1.0, 4);
  EXPECT_EQ(s.p_first, 2);
  for (double e : s.values) EXPECT_GT(e, 0.0);
  try {
    epsilon_sequence(0.0, 1.0, 7.0, 1.0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_sequence);
  }
}

TEST(algebraic_system, g0_determinant_and_limit) {
  EXPECT_DOUBLE_EQ(det(algebraic_G0(0.0)), -2.0);
  EXPECT_NEAR(det(algebraic_G0(0.7)), -2.0 * std::cos(0.7), 1e-14);
  const double delta = 0.3, s_b = 1.875;
  for (int p : {1, 3, 6}) {
    const double gamma = (delta + 2 * pi * p) / s_b;
    const double gap = max_abs(algebraic_G(gamma, s_b) - algebraic_G0(delta));
    EXPECT_LE(gap, 2 * std::exp(-gamma * s_b) + 1e-12);
  }
}

TEST(transport, fundamental_matrix_solves_homogeneous_system) {
  for (const auto& p : {affine_params(0.4, -1.3), affine_params(0.0, 0.8)}) {
    for (int i = 1; i < 20; ++i) {
      const double x = i / 20.0, h = 1e-5;
      const Mat4 fd = (1.0 / (2 * h)) * (fundamental_phi(p, x + h) - fundamental_phi(p, x - h));
      EXPECT_LE(max_abs(fd - transport_A(p, x) * fundamental_phi(p, x)), 1e-8);
      EXPECT_LE(max_abs(fundamental_phi(p, x) * fundamental_phi_inv(p, x) - identity_mat4()),
                1e-14);
    }
  }
}

TEST(transport, phi_transpose_identity) {
  const auto p = affine_params(0.4, -1.3);
  const double eps = 0.05, gamma = 1.0 / eps + p.ratio();
  for (int i = 0; i <= 20; ++i) {
    const double x = i / 20.0;
    const Vec4 lhs = transpose(fundamental_phi(p, x)) * basis_N(1.0 / eps, x, p.phase);
    const Vec4 rhs = std::pow(p.k1()(x), -0.125) * basis_N(gamma, x, p.phase);
    EXPECT_LE(norm_inf(lhs - rhs), 1e-9);
  }
}

TEST(transport, zero_data_gives_zero) {
  const auto p = affine_params(0.4, -1.3);
  const auto sol = solve_transport(nullptr, {0, 0, 0, 0}, p);
  EXPECT_EQ(norm_inf(sol.beta), 0.0);
  EXPECT_EQ(norm_inf(eval(sol.y, 0.6)), 0.0);
}

TEST(transport, f0_canonical_boundary_vector) {
  const auto& st = canonical(0.0);
  const Vec4 y0 = eval(st.fs[0], 0.0), yb = eval(st.fs[0], 1.0);
  EXPECT_NEAR(y0[0], 1.0, 1e-8);
  EXPECT_NEAR(y0[1], 1.0, 1e-8);
  EXPECT_NEAR(y0[2], 1.0, 1e-8);
  EXPECT_NEAR(yb[3], -1.0, 1e-8);
  // beta0 = v0(0)/2 (1 - tan d, 1 + tan d, 1 + tan d, -1/cos d) for k1 = 1
  const double d = 0.7;
  TransportParams p = st.params;
  p.delta = d;
  const auto sol = solve_transport(nullptr, {2.0, 0.0, 0.0, 0.0}, p);
  const Vec4 expect{1 - std::tan(d), 1 + std::tan(d), 1 + std::tan(d), -1 / std::cos(d)};
  EXPECT_LE(norm_inf(sol.beta - expect), 1e-13);
}

TEST(transport, manufactured_solution) {
  const auto p = affine_params(0.4, -1.3);
  auto c = [](double x) { return Vec4{std::sin(x), std::cos(2 * x), x * x * x, std::exp(0.5 * x)}; };
  auto dc = [](double x) {
    return Vec4{std::cos(x), -2 * std::sin(2 * x), 3 * x * x, 0.5 * std::exp(0.5 * x)};
  };
  auto exact = [&](double x) { return fundamental_phi(p, x) * c(x); };
  const VecFn w = [&](double x) { return fundamental_phi(p, x) * dc(x); };
  const Mat4 t = StructureMatrixT::T();
  const double th = p.ratio() * p.phase.S_b();
  const Vec4 n0{1, 0, 1, 0}, nb{std::cos(p.delta - th), std::sin(p.delta - th), 0, 1};
  const Vec4 y0 = exact(0.0), yb = exact(1.0);
  const Vec4 sigma{dot(y0, n0), dot(y0, t * n0), dot(yb, nb), dot(yb, t * nb)};
  const auto sol = solve_transport(w, sigma, p);
  const ChebVec dy = derivative(sol.y);
  for (int i = 0; i <= 40; ++i) {
    const double x = i / 40.0;
    EXPECT_LE(norm_inf(eval(sol.y, x) - exact(x)), 1e-10);
    const Vec4 r = eval(dy, x) - transport_A(p, x) * eval(sol.y, x) - w(x);
    EXPECT_LE(norm_inf(r), 1e-7);
  }
}

TEST(lambda_coefficients, two_ways) {
  const std::vector<double> w{1.8, -0.7, 0.3, 0.11, -0.05};
  const auto byp = lambda_by_power(w, 6);
  for (std::size_t s = 0; s <= 6; ++s) EXPECT_NEAR(lambda_s(s, w), byp[s], 1e-13);
  EXPECT_NEAR(lambda_s(0, w), std::pow(1.8, 4), 1e-13);
  EXPECT_NEAR(lambda_s(1, w), 4 * std::pow(1.8, 3) * -0.7, 1e-13);
}

TEST(operator_image, constant_coefficient_binomial_form) {
  // k1 = c, S' constant: (eps D + S' J)^4 c f has eps^j coefficient c C(4,j) S'^{4-j} J^{4-j} f^(j)
  const double c = 2.0, w0 = 1.875, s1 = w0 * std::pow(c, -0.25);
  const PhaseFn ph(w0, constant_coefficient(c, {0.0, 1.0}), 1.0);
  const ChebVec f = interpolate_vec(
      [](double x) { return Vec4{std::sin(x), std::cos(2 * x), x * x * x, std::exp(0.5 * x)}; },
      48, 0.0, 1.0);
  auto fd = [](int j, double x) {
    const double s2[4] = {std::sin(x), std::cos(x), -std::sin(x), -std::cos(x)};
    const double c2[4] = {std::cos(2 * x), -2 * std::sin(2 * x), -4 * std::cos(2 * x),
                          8 * std::sin(2 * x)};
    const double p3[5] = {x * x * x, 3 * x * x, 6 * x, 6, 0};
    const double e = std::pow(0.5, j) * std::exp(0.5 * x);
    return Vec4{j == 4 ? std::sin(x) : s2[j], j == 4 ? 16 * std::cos(2 * x) : c2[j], p3[j], e};
  };
  const Mat4 jt = transpose(StructureMatrixT::T());
  const auto img = operator_image(f, ph);
  const int binom[5] = {1, 4, 6, 4, 1};
  for (int j = 0; j <= 4; ++j) {
    Mat4 jp = identity_mat4();
    for (int m = 0; m < 4 - j; ++m) jp = jp * jt;
    for (double x : {0.1, 0.5, 0.9}) {
      const Vec4 expect = (c * binom[j] * std::pow(s1, 4 - j)) * (jp * fd(j, x));
      EXPECT_LE(norm_inf(eval(img.full[j], x) - expect), 1e-6 * std::max(1.0, norm_inf(expect)))
          << j;
    }
  }
}

TEST(recursion, first_right_hand_side_symbolic) {
  // omega1 = omega2 = 0, k = 1: w1 = -T^3/(4 c S'^3) O_2 f0 = -(3 / (2 S')) T f0''
  const double c = 2.0, w0 = 1.875, s1 = w0 * std::pow(c, -0.25);
  WkbExpansion st;
  st.params = TransportParams{w0, 0.0, 0.0, PhaseFn(w0, constant_coefficient(c, {0.0, 1.0}), 1.0)};
  st.omegas = {w0, 0.0};
  st.fs = {interpolate_vec([](double x) { return Vec4{std::sin(x), x * x, std::cos(x), 1.0}; }, 48,
                           0.0, 1.0)};
  const auto imgs = images_of(st, 1);
  const auto w = wk_rhs(1, st, imgs, 0.0);
  const Mat4 t = StructureMatrixT::T();
  for (double x : {0.2, 0.7}) {
    const Vec4 f2{-std::sin(x), 2.0, -std::cos(x), 0.0};
    EXPECT_LE(norm_inf(w(x) - (-1.5 / s1) * (t * f2)), 1e-8);
  }
}

TEST(recursion, right_hand_side_is_linear_in_f) {
  const auto& st = canonical(1.0);
  WkbExpansion twice = st;
  for (auto& f : twice.fs) f = 2.0 * f;
  const auto a = images_of(st, 2), b = images_of(twice, 2);
  const auto wa = wk_rhs(2, st, a, st.omegas[3]), wb = wk_rhs(2, twice, b, st.omegas[3]);
  for (double x : {0.0, 0.3, 0.8, 1.0}) EXPECT_LE(norm_inf(wb(x) - 2.0 * wa(x)), 1e-9 * norm_inf(wa(x)) + 1e-12);
}

TEST(recursion, closed_form_omega1_and_fredholm_agree) {
  for (double d : {0.0, 1.0}) {
    const auto& st = canonical(d);
    EXPECT_NEAR(st.omegas[1], -(1.0 + std::tan(d)), 1e-8);
    EXPECT_NEAR(st.omega1_fredholm, st.omega1_closed, 1e-6);
    EXPECT_NEAR(st.omega0(), oracle::clamped_free_root(1), 1e-8);
  }
}

TEST(recursion, omega2_matches_exact_spectrum) {
  // Richardson in eps on (lambda - lambda0 - eps lambda1) / eps^2 from exact eigenvalues
  // omega0 from the transcendental root, omega1 = -v0(0)^2 / 4 = -1: the 1/eps^2
  // division amplifies any error in these
  const auto& st = canonical(0.0);
  const double w0 = oracle::clamped_free_root(1), w1 = -1.0;
  const double l0 = std::pow(w0, 4), l1 = 4 * w0 * w0 * w0 * w1;
  auto est = [&](int p) {
    const double e = w0 / (2 * pi * p + 1);
    const double l = exact_near(e, l0 + e * l1);
    return std::pair{e, (l - l0 - e * l1) / (e * e)};
  };
  const auto [e1, a] = est(40);
  const auto [e2, b] = est(80);
  const double l2 = (b * e1 - a * e2) / (e1 - e2);
  const double w2 = (l2 - 6 * w0 * w0 * w1 * w1) / (4 * w0 * w0 * w0);
  EXPECT_NEAR(st.omegas[2], w2, 2e-5);
}

TEST(recursion, higher_orders_approach_exact_eigenvalues) {
  const auto& st = canonical(0.0);
  const auto seq = st.sequence(6);
  for (int p = 3; p <= 6; ++p) {
    const double e = seq.eps(p);
    const double exact = exact_near(e, compose_high(st, e, 3).lambda);
    double prev = 1e300;
    for (int n = 0; n <= 3; ++n) {
      const double err = std::abs(compose_high(st, e, n).lambda - exact);
      EXPECT_LT(err, prev) << "p " << p << " n " << n;
      prev = err;
    }
    EXPECT_LT(prev, 10 * std::pow(e, 4));
  }
}

TEST(recursion, delta_one_omegas) {
  const auto& st = canonical(1.0);
  EXPECT_NEAR(st.omegas[1], -2.5574077, 1e-6);
  EXPECT_TRUE(std::isfinite(st.omegas[2]));
  EXPECT_TRUE(std::isfinite(st.omegas[3]));
  EXPECT_TRUE(std::isfinite(st.omegas[4]));
}

TEST(recursion, compatibility_and_orthogonality) {
  for (double d : {0.0, 1.0}) {
    const auto& st = canonical(d);
    for (double c : st.compatibility) EXPECT_LE(std::abs(c), 1e-5);
    for (std::size_t k = 1; k < st.vs.size(); ++k) EXPECT_LE(std::abs(st.vs[k].inner(st.vs[0])), 1e-9);
  }
}

TEST(recursion, transport_residual_of_each_profile) {
  const auto& st = canonical(1.0);
  for (int k = 1; k <= st.order; ++k) {
    const auto imgs = images_of(st, k);
    const auto w = wk_rhs(k, st, imgs, st.omegas[k + 1]);
    const ChebVec d = derivative(st.fs[k]);
    double scale = 1.0;
    for (int i = 0; i <= 40; ++i) scale = std::max(scale, norm_inf(eval(st.fs[k], i / 40.0)));
    for (int i = 0; i <= 40; ++i) {
      const double x = i / 40.0;
      const Vec4 r = eval(d, x) - transport_A(st.params, x) * eval(st.fs[k], x) - w(x);
      EXPECT_LE(norm_inf(r), 1e-7 * scale) << "k " << k << " x " << x;
    }
  }
}

TEST(composition, orders_zero_and_one) {
  const auto& st = canonical(0.0);
  const double e = st.sequence(3).eps(3);
  const auto c0 = compose_high(st, e, 0), c1 = compose_high(st, e, 1);
  EXPECT_NEAR(c0.lambda, std::pow(st.omega0(), 4), 1e-12);
  EXPECT_NEAR(c1.lambda - c0.lambda, e * 4 * std::pow(st.omega0(), 3) * st.omegas[1], 1e-12);
  EXPECT_NEAR(c1.u(-0.5), st.vs[0](-0.5) + e * st.vs[1](-0.5), 1e-14);
  // interface value jump is exponentially small
  for (const auto& c : {c0, c1})
    EXPECT_LE(std::abs(c.u(-1e-300) - c.u(0.0)), 20 * std::exp(-st.phase().S_b() / e));
  EXPECT_THROW(compose_high(st, e, 4), std::invalid_argument);
}
