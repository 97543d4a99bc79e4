#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "eigensolver.hpp"
#include "error.hpp"
#include "fem.hpp"

namespace stiffwkb {

/// Two-term low-frequency expansion
///   lambda ~ eps^4 (lambda0 + eps^4 lambda1),
///   u ~ eps^4 (u0 + eps^4 u1) on (a, 0),  v0 + eps^4 v1 on (0, b).
struct LowFreqExpansion {
  std::size_t mode = 1;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double lambda1_compat = 0.0;  // same quantity from the v1 compatibility functional
  GridFunction v0, v1;          // on (0, b)
  GridFunction u0, u1;          // on (a, 0)
  EndFlux v0_flux;              // k1 v0'', (k1 v0'')' at 0+
  EndFlux v1_flux;              // k1 v1'', (k1 v1'')' at 0+
};

/// lambda1 = ((k1 v0'')' u0 - k1 v0'' u0')|_0 with |v0| = 1.
inline double lambda1(const EndFlux& v0_flux_at_0, const GridFunction& u0) {
  const double x0 = u0.hi();
  return v0_flux_at_0.shear * u0.eval(x0, 0, -1) - v0_flux_at_0.moment * u0.eval(x0, 1, -1);
}

struct LowFreqOptions {
  std::size_t soft_elements = 256;
  std::size_t stiff_elements = 256;
};

inline LowFreqExpansion expand_low(const StiffProblem& problem, std::size_t mode,
                                   const LowFreqOptions& opt = {}) {
  problem.validate();
  if (mode < 1) throw ConfigError("mode", "must be >= 1");
  LowFreqExpansion e;
  e.mode = mode;

  // limit clamped-clamped problem on the soft side
  const auto lim = solve_limit_clamped(problem.k1, problem.b, mode, opt.soft_elements);
  e.lambda0 = lim.lambda;
  e.v0 = lim.v;
  e.v0_flux = lim.lo;

  // stiff-side statics: (k0 u0'')'' = 0, clamped at a, moment/shear of v0 at 0
  const auto stiff_nodes = uniform_nodes(problem.a, 0.0, opt.stiff_elements);
  const ScalarFn zero = [](double) { return 0.0; };
  e.u0 = solve_bvp(problem.k0, stiff_nodes, zero, BoundaryCondition::clamped(),
                   BoundaryCondition::natural(e.v0_flux.moment, e.v0_flux.shear))
             .y;

  e.lambda1 = lambda1(e.v0_flux, e.u0);

  // v1: (k1 v1'')'' - lambda0 v1 = lambda1 v0, v1(0) = u0(0), v1'(0) = u0'(0), clamped at b
  const double u0_0 = e.u0.eval(0.0, 0, -1);
  const double u0p_0 = e.u0.eval(0.0, 1, -1);
  {
    // independent evaluation: the lambda1 that makes the compatibility functional vanish
    auto d = single_interval(problem.k1, e.v0.nodes());
    const std::size_t n = d.dofs();
    auto sys = constrain(d, clamp_mask(n, true, true));
    std::vector<double> lift(n, 0.0);
    lift[0] = u0_0;
    lift[1] = u0p_0;
    const auto kl = sys.full.K.multiply(lift);
    const auto ml = sys.full.M.multiply(lift);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = -(kl[i] - e.lambda0 * ml[i]);
    const auto rest = sys.restrict_vec(g);
    const auto v = sys.restrict_vec(e.v0.dofs());
    e.lambda1_compat = -dot(v, rest) / dot(v, sys.M.multiply(v));
  }
  if (std::abs(e.lambda1 - e.lambda1_compat) > 1e-6 * std::max(1.0, std::abs(e.lambda1)))
    throw Error(ErrorKind::solvability_violated,
                "lambda1 formula " + std::to_string(e.lambda1) +
                    " disagrees with the compatibility functional " +
                    std::to_string(e.lambda1_compat));

  const GridFunction v0 = e.v0;
  const double l1 = e.lambda1;
  const ScalarFn rhs1 = [v0, l1](double x) { return l1 * v0(x); };
  auto v1 = solve_bvp_orthogonal(problem.k1, rhs1, BoundaryCondition::clamped(u0_0, u0p_0),
                                 BoundaryCondition::clamped(), e.lambda0, e.v0);
  e.v1 = v1.y;
  e.v1_flux = v1.lo;

  // u1: (k0 u1'')'' = lambda0 u0, clamped at a, moment/shear of v1 at 0
  const GridFunction u0 = e.u0;
  const double l0 = e.lambda0;
  const ScalarFn rhs_u1 = [u0, l0](double x) { return l0 * u0(x); };
  e.u1 = solve_bvp(problem.k0, stiff_nodes, rhs_u1, BoundaryCondition::clamped(),
                   BoundaryCondition::natural(e.v1_flux.moment, e.v1_flux.shear))
             .y;
  return e;
}

/// Composed low-frequency approximation at a given eps.
struct LowFreqComposition {
  double lambda = 0.0;
  std::function<double(double)> u;  // piecewise evaluator on (a, b)
};

inline LowFreqComposition compose_low(const LowFreqExpansion& e, double epsilon, int order) {
  if (order != 0 && order != 1) throw ConfigError("orders", "low-frequency order must be 0 or 1");
  const double e4 = std::pow(epsilon, 4);
  LowFreqComposition c;
  c.lambda = e4 * e.lambda0 + (order == 1 ? e4 * e4 * e.lambda1 : 0.0);
  const GridFunction u0 = e.u0, u1 = e.u1, v0 = e.v0, v1 = e.v1;
  c.u = [=](double x) {
    if (x < 0.0) return e4 * u0(x) + (order == 1 ? e4 * e4 * u1(x) : 0.0);
    return v0(x) + (order == 1 ? e4 * v1(x) : 0.0);
  };
  return c;
}

}  // namespace stiffwkb
