#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "oracles.hpp"
#include "stiffwkb/verify.hpp"

using namespace stiffwkb;

namespace {

const WkbExpansion& canonical() {
  static const WkbExpansion e = build_wkb(canonical_problem(), 0.0, {.order = 2});
  return e;
}

const ConvergenceReport& table() {
  static const ConvergenceReport r = [] {
    ConvergenceOptions opt;
    opt.mesh.oversample = 32;
    opt.threads = 4;
    return convergence_table(canonical(), {0, 1}, 1, 4, opt);
  }();
  return r;
}

Spectrum fake_spectrum(std::vector<double> lambdas) {
  Spectrum s;
  for (std::size_t i = 0; i < lambdas.size(); ++i) s.pairs.push_back({lambdas[i], i + 1, {}, 0.0, false});
  return s;
}

}  // namespace

TEST(parallel_map, ordered_results_and_rethrow) {
  const auto v = parallel_map<int>(50, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_map<int>(8, 3,
                                 [](std::size_t i) -> int {
                                   if (i == 5) throw std::runtime_error("x");
                                   return 0;
                                 }),
               std::runtime_error);
}

TEST(residual, zero_function) {
  const JetFn zero = [](double) { return Jet::constant(0.0, 4); };
  const auto r = residual(canonical_problem(), 0.2, 3.0, zero, zero);
  EXPECT_EQ(r.sup, 0.0);
  EXPECT_EQ(r.jumps.value, 0.0);
  EXPECT_EQ(r.jumps.shear, 0.0);
  EXPECT_EQ(r.mismatch_a, 0.0);
  EXPECT_EQ(r.mismatch_b, 0.0);
}

TEST(residual, polynomial_on_each_side) {
  // u = x^4 on both sides: (k u'')'' = 24 k, residual 24 k - lambda x^4
  const JetFn u = [](double x) {
    const Jet t = Jet::variable(x, 4);
    return t * t * t * t;
  };
  const double eps = 0.5, lam = 2.0;
  const auto r = residual(canonical_problem(), eps, lam, u, u, 400);
  EXPECT_NEAR(r.sup_left, std::max(24.0, std::abs(24.0 - lam)), 1e-12);
  EXPECT_NEAR(r.sup_right, std::max(24 * std::pow(eps, 4), std::abs(24 * std::pow(eps, 4) - lam)), 1e-12);
  EXPECT_NEAR(r.mismatch_a, 4.0, 1e-12);
  EXPECT_EQ(r.jumps.value, 0.0);
}

TEST(residual, wkb_residual_decreases_with_order) {
  const auto& st = canonical();
  const double e = st.sequence(4).eps(4);
  const double r0 = residual_high(st, e, 0).sup, r2 = residual_high(st, e, 2).sup;
  EXPECT_LT(r2, r0);
}

TEST(residual, discrete_residual_of_eigenpairs) {
  const auto p = canonical_problem();
  const auto sys = assemble(p, 0.2, build_mesh(p, 0.2, 2.0));
  const auto spec = solve_eigs(sys, EigenRequest::lowest(6));
  // converged to the tolerance or to the rounding floor of K x - lambda M x
  for (const auto& pair : spec.pairs) {
    EXPECT_NEAR(residual_discrete(sys, pair), pair.residual, 1e-6 * pair.residual);
    EXPECT_LE(pair.residual, 1e-8);
  }
}

TEST(matching, single_and_ambiguous) {
  const auto s = fake_spectrum({1.0, 2.0, 3.0});
  const auto m = match_eigenvalue(s, 2.1, 0.5);
  EXPECT_EQ(m.index, 2u);
  EXPECT_EQ(m.lambda, 2.0);
  EXPECT_NEAR(m.margin, 0.9, 1e-15);
  for (double lt : {2.5, 10.0}) {
    try {
      match_eigenvalue(s, lt, 0.6);
      FAIL() << lt;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ambiguous_match);
    }
  }
}

TEST(matching, bracket_encloses_prediction) {
  const auto& st = canonical();
  const double e = st.sequence(3).eps(3);
  const double lt = compose_high(st, e, 1).lambda;
  const auto sys = assemble(st.problem, e, build_mesh(st.problem, e, 2.0));
  const auto br = bracket_spectrum(sys, lt);
  ASSERT_EQ(br.spec.size(), 2u);
  EXPECT_LE(br.spec[0].lambda, lt);
  EXPECT_GT(br.spec[1].lambda, lt);
  EXPECT_EQ(br.spec[1].index, br.spec[0].index + 1);
}

TEST(convergence, matched_eigenvalues_are_exact_eigenvalues) {
  for (const auto& row : table().rows) {
    ASSERT_FALSE(row.ambiguous);
    const auto ex = oracle::canonical_eigs(row.epsilon, row.lambda_matched - 0.05,
                                           row.lambda_matched + 0.05, 200);
    ASSERT_FALSE(ex.empty());
    double best = ex[0];
    for (double x : ex)
      if (std::abs(x - row.lambda_matched) < std::abs(best - row.lambda_matched)) best = x;
    EXPECT_NEAR(row.lambda_matched, best, 1e-6 * best) << "p " << row.p;
  }
}

TEST(convergence, higher_order_errors_are_smaller) {
  const auto r0 = table().order_rows(0), r1 = table().order_rows(1);
  ASSERT_EQ(r0.size(), r1.size());
  for (std::size_t i = 1; i < r0.size(); ++i) EXPECT_LT(r1[i]->abs_err, r0[i]->abs_err);
  EXPECT_GT(table().slopes.at(1), table().slopes.at(0));
}

TEST(convergence, index_grows_like_inverse_eps) {
  const auto [lo, hi] = index_scaling(table(), 1, 1, 4);
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi / lo, 1.3);
}

TEST(convergence, margin_against_weyl_spacing) {
  // eigenvalue spacing near lambda is about 4 c0 eps^4 k^3
  const double c0 = weyl_c0(constant_coefficient(1.0, {0.0, 1.0}), 1.0);
  for (const auto* row : table().order_rows(1)) {
    const double k = static_cast<double>(row->k_index);
    const double spacing = 4 * c0 * std::pow(row->epsilon, 4) * k * k * k;
    EXPECT_GT(row->margin, 0.05 * spacing) << row->p;
    EXPECT_LT(row->margin, 2.0 * spacing) << row->p;
  }
}

TEST(weyl, constant_oracle) {
  double num = 0.0, den = 0.0;
  for (int m = 5; m <= 15; ++m) {
    const double mu = std::pow(oracle::clamped_clamped_root(m), 4), m4 = std::pow(m, 4);
    num += mu * m4;
    den += m4 * m4;
  }
  const double c0 = weyl_c0(constant_coefficient(1.0, {0.0, 1.0}), 1.0);
  EXPECT_NEAR(c0, num / den, 5e-6 * c0);
}

TEST(weak_convergence, bump_and_zero_test_function) {
  const auto k1 = make_coefficient(CoefficientKind::affine, 1.0, 0.5, {0.0, 1.0});
  const auto phi = quartic_bump(k1, 1.0);
  EXPECT_EQ(phi(0.0), 0.0);
  EXPECT_NEAR(phi(1.0), 0.0, 1e-15);
  const double semi = oracle::simpson(
      [&](double x) {
        const double h = 1e-3;
        const double d2 = (phi(x + h) - 2 * phi(x) + phi(x - h)) / (h * h);
        return k1(x) * d2 * d2;
      },
      0.0, 1.0, 2000);
  EXPECT_NEAR(semi, 1.0, 1e-4);
  const auto rep = weak_convergence_test(canonical(), 1, 2, nullptr);
  for (const auto& r : rep.rows) EXPECT_EQ(r.pairing, 0.0);
}

TEST(density, continuous_and_monotone_on_fine_grid) {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.30 - 0.001 * i);
  const auto ds = density_sweep(canonical_problem(), grid, 6, 12.36, {}, 4);
  EXPECT_EQ(ds.rows.size(), 66u);
  EXPECT_EQ(ds.monotonicity_violations, 0u);
  for (std::size_t g = 1; g < grid.size(); ++g)
    for (std::size_t i = 0; i < 6; ++i) {
      const double a = ds.rows[(g - 1) * 6 + i].lambda, b = ds.rows[g * 6 + i].lambda;
      EXPECT_LT(std::abs(a - b), 0.1 * a);
    }
}

TEST(density, lowest_spectrum_grows_bound) {
  const auto spec = lowest_spectrum(canonical_problem(), 0.2, 30, {}, {}, 0.5);
  ASSERT_EQ(spec.size(), 30u);
  for (std::size_t i = 1; i < spec.size(); ++i) EXPECT_GT(spec[i].lambda, spec[i - 1].lambda);
}

TEST(limit_estimate, removes_expansion_terms) {
  const auto& st = canonical();
  const double e = 0.1;
  const double l = compose_high(st, e, 2).lambda;
  EXPECT_NEAR(limit_estimate(st, e, l, 2), std::pow(st.omega0(), 4), 1e-12);
}

TEST(density, min_gaps_match_exact_spectrum) {
  const double target = std::pow(oracle::clamped_free_root(1), 4);
  const std::vector<double> grid{0.4, 0.3, 0.25, 0.2, 0.15};
  const auto ds = density_sweep(canonical_problem(), grid, 10, target, {}, 4);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto ex = oracle::canonical_eigs(grid[g], 1e-3, 60.0, 60000);
    double best = 1e300;
    for (double x : ex) best = std::min(best, std::abs(x - target));
    EXPECT_NEAR(ds.min_gap[g], best, 1e-4) << grid[g];
  }
}
