#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stiffwkb/eigensolver.hpp"
#include "stiffwkb/fem.hpp"

using namespace stiffwkb;

namespace {

std::size_t soft_elements(const Mesh& m) { return m.elements() - m.interface_node; }

}  // namespace

TEST(mesh, wavelength_rule) {
  const auto p = canonical_problem();
  const double w0 = oracle::clamped_free_root(1);
  const auto m = build_mesh(p, 0.2, w0, {12, 200000, 64, 1});
  // ceil(S(b) * 12 / (2 pi eps)) with S(b) = w0
  EXPECT_GE(soft_elements(m), 18u);
  EXPECT_EQ(m.nodes[m.interface_node], 0.0);
  EXPECT_GE(m.interface_node, 64u);
  const auto m1 = build_mesh(p, 0.5, 20.0, {12, 200000, 64, 1});
  const auto m2 = build_mesh(p, 0.25, 20.0, {12, 200000, 64, 1});
  EXPECT_GE(soft_elements(m2), 2 * soft_elements(m1) - 1);
}

TEST(mesh, dof_cap) {
  try {
    build_mesh(canonical_problem(), 1e-6, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::mesh_too_large);
  }
  EXPECT_THROW(build_mesh(canonical_problem(), 0.2, 2.0, {4, 200000, 64, 64}), ConfigError);
}

TEST(assembly, beam_element_stiffness) {
  const auto d = single_interval(constant_coefficient(1.0, {0.0, 1.0}), {0.0, 1.0});
  const auto fm = assemble_full(d);
  // int (N1'')^2 with N1'' = -6 + 12 x
  EXPECT_NEAR(fm.K(0, 0), 12.0, 1e-13);
  EXPECT_NEAR(fm.K(1, 1), 4.0, 1e-13);
  EXPECT_NEAR(fm.K(0, 1), 6.0, 1e-13);
  EXPECT_NEAR(fm.M(0, 0), 156.0 / 420.0, 1e-14);
}

TEST(assembly, epsilon_scaling) {
  const auto p = canonical_problem();
  const auto mesh = build_mesh(p, 0.2, 2.0);
  const auto s1 = assemble(p, 0.2, mesh), s2 = assemble(p, 0.4, mesh);
  const std::size_t n = s1.size();
  // reduced DOFs 0..(2*interface-2) couple only stiff-side elements
  const std::size_t stiff_last = 2 * mesh.interface_node - 3;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i >= 3 ? i - 3 : 0; j <= i; ++j) {
      EXPECT_EQ(s1.M(i, j), s2.M(i, j));
      if (i <= stiff_last) EXPECT_DOUBLE_EQ(s1.K(i, j), s2.K(i, j));
      if (j > stiff_last + 2) EXPECT_NEAR(s2.K(i, j), 16.0 * s1.K(i, j), 1e-12 * std::abs(s2.K(i, j)));
    }
}

TEST(eigen, clamped_clamped_oracle) {
  const auto m = solve_limit_clamped(constant_coefficient(1.0, {0.0, 1.0}), 1.0, 1);
  const double mu = oracle::clamped_clamped_root(1);
  EXPECT_NEAR(m.lambda, std::pow(mu, 4), 1e-6 * std::pow(mu, 4));
  EXPECT_NEAR(m.lambda, 500.5639, 1e-3);
  const auto m2 = solve_limit_clamped(constant_coefficient(1.0, {0.0, 1.0}), 1.0, 2);
  EXPECT_NEAR(std::pow(m2.lambda, 0.25), 7.8532046241, 1e-6 * 7.85);
  EXPECT_EQ(m.v.value_at_node(0), 0.0);
  EXPECT_EQ(m.v.slope_at_node(0), 0.0);
  EXPECT_EQ(m.v.value_at_node(m.v.nodes().size() - 1), 0.0);
}

TEST(eigen, cantilever_oracle_and_mode_shape) {
  const auto k0 = constant_coefficient(1.0, {-1.0, 0.0});
  const auto m = solve_limit_cantilever(k0, -1.0, 1);
  EXPECT_NEAR(std::pow(m.lambda, 0.25), 1.8751040687, 1e-6 * 1.875);
  EXPECT_NEAR(m.v(0.0), 2.0, 1e-3);
  const oracle::CantileverMode shape(1);
  for (double x : {-0.8, -0.5, -0.2, 0.0}) EXPECT_NEAR(m.v(x), shape(x), 1e-6);
  // constant scaling of the coefficient scales the eigenvalue (x^t K x rounding ~ eps cond(K))
  const auto m3 = solve_limit_cantilever(constant_coefficient(3.0, {-1.0, 0.0}), -1.0, 1);
  EXPECT_NEAR(m3.lambda, 3.0 * m.lambda, 1e-8 * m3.lambda);
}

TEST(eigen, higher_modes_and_rayleigh) {
  const auto d = single_interval(constant_coefficient(1.0, {-1.0, 0.0}), uniform_nodes(-1, 0, 128));
  const auto mask = clamp_mask(d.dofs(), true, false);
  const auto s = constrain(d, mask);
  const auto spec = solve_eigs(s, EigenRequest::lowest(3));
  for (int m = 1; m <= 3; ++m) {
    const double w = oracle::clamped_free_root(m);
    EXPECT_NEAR(spec[m - 1].lambda, std::pow(w, 4), 1e-6 * std::pow(w, 4));
    const auto x = s.restrict_vec(spec[m - 1].u.dofs());
    EXPECT_NEAR(rayleigh_quotient(s, x), spec[m - 1].lambda, 1e-8 * spec[m - 1].lambda);
    EXPECT_NEAR(spec[m - 1].u.norm(), 1.0, 1e-10);
  }
}

TEST(eigen, mesh_convergence_order) {
  auto err = [](std::size_t n) {
    const auto d = single_interval(constant_coefficient(1.0, {0.0, 1.0}), uniform_nodes(0, 1, n));
    const auto s = constrain(d, clamp_mask(d.dofs(), true, true));
    return solve_eigs(s, EigenRequest::index_range(3, 3))[0].lambda -
           std::pow(oracle::clamped_clamped_root(3), 4);
  };
  EXPECT_GE(err(8) / err(16), 8.0);
}

TEST(eigen, window_with_guards) {
  const auto p = canonical_problem();
  const auto mesh = build_mesh(p, 0.1, 2.5);
  const auto s = assemble(p, 0.1, mesh);
  const auto spec = solve_eigs(s, EigenRequest::in_window(8.0, 13.0));
  ASSERT_GE(spec.size(), 3u);
  EXPECT_TRUE(spec.pairs.front().guard);
  EXPECT_TRUE(spec.pairs.back().guard);
  for (const auto* p : spec.interior()) {
    EXPECT_GE(p->lambda, 8.0);
    EXPECT_LE(p->lambda, 13.0);
  }
  EXPECT_LT(spec.pairs.front().lambda, 8.0);
  EXPECT_GT(spec.pairs.back().lambda, 13.0);
}

TEST(eigen, spectrum_is_simple_and_monotone_in_eps) {
  const auto p = canonical_problem();
  const auto mesh = build_mesh(p, 0.1, 3.0);
  const auto a = solve_eigs(assemble(p, 0.1, mesh), EigenRequest::lowest(12));
  const auto b = solve_eigs(assemble(p, 0.12, mesh), EigenRequest::lowest(12));
  for (std::size_t i = 1; i < a.size(); ++i)
    EXPECT_GT(a[i].lambda - a[i - 1].lambda, 1e-10 * std::max(1.0, a[i].lambda));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(a[i].lambda, b[i].lambda);
}

TEST(eigen, low_frequency_bound) {
  const auto p = canonical_problem();
  double cmax = 0.0, cmin = 1e300;
  for (double eps : {0.4, 0.2, 0.1, 0.05}) {
    const auto s = assemble(p, eps, build_mesh(p, eps, 2.0));
    const double c = solve_eigs(s, EigenRequest::lowest(1))[0].lambda / std::pow(eps, 4);
    cmax = std::max(cmax, c);
    cmin = std::min(cmin, c);
  }
  EXPECT_LT(cmax, 510.0);
  EXPECT_GT(cmin, 100.0);
}

TEST(eigen, interface_jumps_shrink_with_refinement) {
  const auto p = canonical_problem();
  auto jumps = [&](int stiff) {
    const auto n = static_cast<std::size_t>(stiff);
    const auto mesh = build_mesh(p, 0.2, 2.5, {12, 200000, n, n});
    const auto s = assemble(p, 0.2, mesh);
    const auto e = solve_eigs(s, EigenRequest::index_range(2, 2));
    return interface_jumps(s.disc, e[0].u, 0.0);
  };
  const auto coarse = jumps(64), fine = jumps(256);
  EXPECT_EQ(coarse.value, 0.0);
  EXPECT_EQ(coarse.slope, 0.0);
  EXPECT_LT(fine.moment, coarse.moment);
  EXPECT_LT(fine.shear, coarse.shear);
}

TEST(bvp, zero_data_gives_zero) {
  const auto k = constant_coefficient(1.0, {-1.0, 0.0});
  const auto y = solve_bvp(k, Interval{-1.0, 0.0}, [](double) { return 0.0; },
                           BoundaryCondition::clamped(), BoundaryCondition::natural())
                     .y;
  for (double v : y.dofs()) EXPECT_EQ(v, 0.0);
}

TEST(bvp, closed_form_cubic) {
  // (y'')'' = 0 on (-1, 0), y(-1) = y'(-1) = 0, y''(0) = m, y'''(0) = s:
  // y'' = m + s x, y = m (x+1)^2 / 2 + s ((x+1)^3 / 6 - (x+1)^2 / 2)
  const double m = 0.7, s = -1.9;
  const auto k = constant_coefficient(1.0, {-1.0, 0.0});
  const auto sol = solve_bvp(k, Interval{-1.0, 0.0}, [](double) { return 0.0; },
                             BoundaryCondition::clamped(), BoundaryCondition::natural(m, s), 0.0, 16);
  for (int i = 0; i <= 20; ++i) {
    const double x = -1.0 + i / 20.0, t = x + 1.0;
    const double exact = m * t * t / 2 + s * (t * t * t / 6 - t * t / 2);
    EXPECT_NEAR(sol.y(x), exact, 1e-9);
  }
  EXPECT_NEAR(sol.lo.moment, m - s, 1e-9);
  EXPECT_NEAR(sol.lo.shear, s, 1e-9);
}

TEST(bvp, resonant_shift) {
  const auto k = constant_coefficient(1.0, {0.0, 1.0});
  const auto lim = solve_limit_clamped(k, 1.0, 1);
  try {
    solve_bvp(k, lim.v.nodes(), [](double x) { return x; }, BoundaryCondition::clamped(),
              BoundaryCondition::clamped(), lim.lambda);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resonant_shift);
  }
}

TEST(bvp_orthogonal, violated_and_zero) {
  const auto k = constant_coefficient(1.0, {0.0, 1.0});
  const auto lim = solve_limit_clamped(k, 1.0, 1);
  const GridFunction v = lim.v;
  try {
    solve_bvp_orthogonal(k, [&v](double x) { return v(x); }, BoundaryCondition::clamped(),
                         BoundaryCondition::clamped(), lim.lambda, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::solvability_violated);
  }
  const auto z = solve_bvp_orthogonal(k, [](double) { return 0.0; }, BoundaryCondition::clamped(),
                                      BoundaryCondition::clamped(), lim.lambda, v);
  for (double d : z.y.dofs()) EXPECT_NEAR(d, 0.0, 1e-14);
}

TEST(bvp_orthogonal, compatible_rhs) {
  // rhs = mode 2 is orthogonal to mode 1; solution is mode2 / (lambda2 - lambda1)
  const auto k = constant_coefficient(1.0, {0.0, 1.0});
  const auto m1 = solve_limit_clamped(k, 1.0, 1), m2 = solve_limit_clamped(k, 1.0, 2);
  const GridFunction w = m2.v;
  const auto y = solve_bvp_orthogonal(k, [&w](double x) { return w(x); }, BoundaryCondition::clamped(),
                                      BoundaryCondition::clamped(), m1.lambda, m1.v);
  EXPECT_NEAR(y.y.inner(m1.v), 0.0, 1e-12);
  for (double x : {0.2, 0.5, 0.77})
    EXPECT_NEAR(y.y(x), w(x) / (m2.lambda - m1.lambda), 1e-8 / (m2.lambda - m1.lambda));
}

TEST(flux, recovered_end_flux_of_clamped_mode) {
  const oracle::ClampedMode mode(1);
  const auto lim = solve_limit_clamped(constant_coefficient(1.0, {0.0, 1.0}), 1.0, 1, 256);
  EXPECT_NEAR(lim.lo.moment, mode(0.0, 2), 1e-6 * std::abs(mode(0.0, 2)));
  EXPECT_NEAR(lim.lo.shear, mode(0.0, 3), 1e-6 * std::abs(mode(0.0, 3)));
}
