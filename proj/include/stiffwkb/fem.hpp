#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "banded.hpp"
#include "coeffs.hpp"
#include "error.hpp"
#include "quadrature.hpp"

namespace stiffwkb {

// ============================================================================
// Problem instance and mesh
// ============================================================================

struct StiffProblem {
  double a = -1.0;
  double b = 1.0;
  CoefficientFn k0{CoefficientKind::constant, 1.0, 0.0, {-1.0, 0.0}};
  CoefficientFn k1{CoefficientKind::constant, 1.0, 0.0, {0.0, 1.0}};

  void validate() const {
    if (!(a < 0.0)) throw ConfigError("a", "must be negative (a < 0 < b)");
    if (!(b > 0.0)) throw ConfigError("b", "must be positive (a < 0 < b)");
    if (!(k0.min_value() > 0.0)) throw Error(ErrorKind::non_positive_coefficient, "k0");
    if (!(k1.min_value() > 0.0)) throw Error(ErrorKind::non_positive_coefficient, "k1");
  }
};

/// Canonical instance: a = -1, b = 1, k0 = k1 = 1.
inline StiffProblem canonical_problem() {
  StiffProblem p;
  p.k0 = constant_coefficient(1.0, {-1.0, 0.0});
  p.k1 = constant_coefficient(1.0, {0.0, 1.0});
  return p;
}

struct Mesh {
  std::vector<double> nodes;
  std::size_t interface_node = 0;  // index of x = 0

  std::size_t elements() const { return nodes.size() - 1; }
  std::size_t dofs() const { return 2 * nodes.size(); }
};

struct MeshOptions {
  int oversample = 12;
  std::size_t dof_cap = 200000;
  std::size_t stiff_elements = 64;  // uniform elements on (a, 0)
  std::size_t min_soft_elements = 64;
};

inline std::vector<double> uniform_nodes(double lo, double hi, std::size_t n) {
  std::vector<double> x(n + 1);
  for (std::size_t i = 0; i <= n; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / n;
  x.front() = lo;
  x.back() = hi;
  return x;
}

/// Number of uniform soft-side elements demanded by h <= 2 pi eps / (S' oversample).
inline double soft_elements_required(const StiffProblem& problem, double epsilon,
                                     double omega_bound, int oversample) {
  const double dS_max =
      omega_bound * std::pow(std::min(problem.k1(0.0), problem.k1(problem.b)), -0.25);
  return std::ceil(problem.b * dS_max * oversample / (2.0 * std::numbers::pi * epsilon));
}

inline Mesh build_mesh(const StiffProblem& problem, double epsilon, double omega_bound,
                       const MeshOptions& opt = {}) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (opt.oversample < 8) throw ConfigError("oversample", "must be at least 8");
  const double need = soft_elements_required(problem, epsilon, omega_bound, opt.oversample);
  const std::size_t stiff = std::max<std::size_t>(opt.stiff_elements, 64);
  const double soft_d = std::max(need, static_cast<double>(opt.min_soft_elements));
  const double dofs = 2.0 * (static_cast<double>(stiff) + soft_d + 1.0);
  if (!(dofs <= static_cast<double>(opt.dof_cap)))
    throw Error(ErrorKind::mesh_too_large, "mesh rule demands " + std::to_string(dofs) +
                                               " degrees of freedom (cap " +
                                               std::to_string(opt.dof_cap) + ")");
  const auto soft = static_cast<std::size_t>(soft_d);
  Mesh m;
  m.nodes = uniform_nodes(problem.a, 0.0, stiff);
  auto right = uniform_nodes(0.0, problem.b, soft);
  m.interface_node = m.nodes.size() - 1;
  m.nodes.insert(m.nodes.end(), right.begin() + 1, right.end());
  return m;
}

// ============================================================================
// Hermite cubic element
// ============================================================================

namespace hermite {

/// Shape functions and derivatives at xi in [0, 1] for an element of length h.
/// Order of local DOFs: u(x0), u'(x0), u(x1), u'(x1).
inline std::array<double, 4> shape(double xi, double h, int deriv) {
  const double x2 = xi * xi, x3 = x2 * xi;
  switch (deriv) {
    case 0: return {1 - 3 * x2 + 2 * x3, h * (xi - 2 * x2 + x3), 3 * x2 - 2 * x3, h * (x3 - x2)};
    case 1:
      return {(-6 * xi + 6 * x2) / h, 1 - 4 * xi + 3 * x2, (6 * xi - 6 * x2) / h, 3 * x2 - 2 * xi};
    case 2:
      return {(-6 + 12 * xi) / (h * h), (-4 + 6 * xi) / h, (6 - 12 * xi) / (h * h),
              (-2 + 6 * xi) / h};
    case 3: return {12 / (h * h * h), 6 / (h * h), -12 / (h * h * h), 6 / (h * h)};
    default: return {0, 0, 0, 0};
  }
}

inline const QuadratureRule& rule() {
  static const QuadratureRule r = gauss_legendre(6);
  return r;
}

}  // namespace hermite

// ============================================================================
// Piecewise-coefficient beam discretization
// ============================================================================

struct BeamPiece {
  CoefficientFn k;
  double scale = 1.0;
};

/// Nodes plus the stiffness k(x) = scale * k_piece(x) on every element.
struct Discretization {
  std::vector<double> nodes;
  std::vector<BeamPiece> pieces;
  std::vector<std::size_t> piece_of_element;

  std::size_t elements() const { return nodes.size() - 1; }
  std::size_t dofs() const { return 2 * nodes.size(); }
  double h(std::size_t e) const { return nodes[e + 1] - nodes[e]; }

  double k(std::size_t e, double x, int deriv = 0) const {
    const auto& p = pieces[piece_of_element[e]];
    return p.scale * p.k.derivative(x, deriv);
  }

  /// Element containing x; at a node, side < 0 picks the element to its left.
  std::size_t element_of(double x, int side = 1) const {
    if (x <= nodes.front()) return 0;
    if (x >= nodes.back()) return elements() - 1;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t e = static_cast<std::size_t>(it - nodes.begin()) - 1;
    if (side < 0 && x == nodes[e] && e > 0) --e;
    return std::min(e, elements() - 1);
  }
};

inline Discretization single_interval(const CoefficientFn& k, std::vector<double> nodes,
                                      double scale = 1.0) {
  Discretization d;
  d.nodes = std::move(nodes);
  d.pieces = {BeamPiece{k, scale}};
  d.piece_of_element.assign(d.nodes.size() - 1, 0);
  return d;
}

inline Discretization stiff_discretization(const StiffProblem& p, double epsilon, const Mesh& m) {
  Discretization d;
  d.nodes = m.nodes;
  d.pieces = {BeamPiece{p.k0, 1.0}, BeamPiece{p.k1, std::pow(epsilon, 4)}};
  d.piece_of_element.resize(m.elements());
  for (std::size_t e = 0; e < m.elements(); ++e)
    d.piece_of_element[e] = e < m.interface_node ? 0 : 1;
  return d;
}

/// Finite-element function: nodal values and slopes.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(std::vector<double> nodes, std::vector<double> dofs)
      : nodes_(std::move(nodes)), dofs_(std::move(dofs)) {}

  static GridFunction zero(const std::vector<double>& nodes) {
    return GridFunction(nodes, std::vector<double>(2 * nodes.size(), 0.0));
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& dofs() const { return dofs_; }
  std::vector<double>& dofs() { return dofs_; }
  bool empty() const { return nodes_.empty(); }
  double lo() const { return nodes_.front(); }
  double hi() const { return nodes_.back(); }

  double value_at_node(std::size_t i) const { return dofs_[2 * i]; }
  double slope_at_node(std::size_t i) const { return dofs_[2 * i + 1]; }

  std::size_t element_of(double x, int side = 1) const {
    const std::size_t ne = nodes_.size() - 1;
    if (x <= nodes_.front()) return 0;
    if (x >= nodes_.back()) return ne - 1;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    std::size_t e = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    if (side < 0 && x == nodes_[e] && e > 0) --e;
    return std::min(e, ne - 1);
  }

  /// deriv-th derivative of the element polynomial; side selects the element at a node.
  double eval(double x, int deriv = 0, int side = 1) const {
    const std::size_t e = element_of(x, side);
    const double h = nodes_[e + 1] - nodes_[e];
    const auto n = hermite::shape((x - nodes_[e]) / h, h, deriv);
    return n[0] * dofs_[2 * e] + n[1] * dofs_[2 * e + 1] + n[2] * dofs_[2 * e + 2] +
           n[3] * dofs_[2 * e + 3];
  }
  double operator()(double x) const { return eval(x, 0); }

  /// Integral of y(x) g(x) (Gauss 6 per element).
  template <class G>
  double inner(const G& g) const {
    const auto& r = hermite::rule();
    double s = 0.0;
    for (std::size_t e = 0; e + 1 < nodes_.size(); ++e) {
      const double h = nodes_[e + 1] - nodes_[e];
      for (std::size_t q = 0; q < r.nodes.size(); ++q) {
        const double xi = 0.5 * (r.nodes[q] + 1.0);
        const double x = nodes_[e] + h * xi;
        const auto n = hermite::shape(xi, h, 0);
        const double y = n[0] * dofs_[2 * e] + n[1] * dofs_[2 * e + 1] + n[2] * dofs_[2 * e + 2] +
                         n[3] * dofs_[2 * e + 3];
        s += 0.5 * h * r.weights[q] * y * g(x);
      }
    }
    return s;
  }

  double inner(const GridFunction& o) const {
    return inner([&o](double x) { return o(x); });
  }
  double norm() const { return std::sqrt(inner(*this)); }

  /// Restriction to the node range [i0, i1].
  GridFunction restrict_nodes(std::size_t i0, std::size_t i1) const {
    std::vector<double> n(nodes_.begin() + i0, nodes_.begin() + i1 + 1);
    std::vector<double> d(dofs_.begin() + 2 * i0, dofs_.begin() + 2 * i1 + 2);
    return GridFunction(std::move(n), std::move(d));
  }

  GridFunction& operator*=(double s) {
    for (auto& v : dofs_) v *= s;
    return *this;
  }
  friend GridFunction operator*(double s, GridFunction g) { return g *= s; }
  GridFunction& axpy(double s, const GridFunction& o) {
    for (std::size_t i = 0; i < dofs_.size(); ++i) dofs_[i] += s * o.dofs_[i];
    return *this;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> dofs_;
};

/// Full (unconstrained) stiffness and mass over all 2 * nodes DOFs.
struct FullMatrices {
  SymBandMatrix K;
  SymBandMatrix M;
};

inline FullMatrices assemble_full(const Discretization& d) {
  const std::size_t n = d.dofs();
  FullMatrices fm{SymBandMatrix(n, 3), SymBandMatrix(n, 3)};
  const auto& r = hermite::rule();
  for (std::size_t e = 0; e < d.elements(); ++e) {
    const double h = d.h(e);
    double ke[4][4] = {}, me[4][4] = {};
    for (std::size_t q = 0; q < r.nodes.size(); ++q) {
      const double xi = 0.5 * (r.nodes[q] + 1.0);
      const double x = d.nodes[e] + h * xi;
      const double w = 0.5 * h * r.weights[q];
      const double kx = d.k(e, x);
      const auto n0 = hermite::shape(xi, h, 0);
      const auto n2 = hermite::shape(xi, h, 2);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          ke[i][j] += w * kx * n2[i] * n2[j];
          me[i][j] += w * n0[i] * n0[j];
        }
    }
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j <= i; ++j) {
        fm.K.add(2 * e + i, 2 * e + j, ke[i][j]);
        fm.M.add(2 * e + i, 2 * e + j, me[i][j]);
      }
  }
  return fm;
}

/// Consistent load (rhs, phi_i) for all DOFs.
template <class F>
std::vector<double> load_vector(const Discretization& d, const F& rhs) {
  std::vector<double> f(d.dofs(), 0.0);
  const auto& r = hermite::rule();
  for (std::size_t e = 0; e < d.elements(); ++e) {
    const double h = d.h(e);
    for (std::size_t q = 0; q < r.nodes.size(); ++q) {
      const double xi = 0.5 * (r.nodes[q] + 1.0);
      const double w = 0.5 * h * r.weights[q] * rhs(d.nodes[e] + h * xi);
      const auto n0 = hermite::shape(xi, h, 0);
      for (int i = 0; i < 4; ++i) f[2 * e + i] += w * n0[i];
    }
  }
  return f;
}

// ============================================================================
// Constrained system
// ============================================================================

/// Stiffness and mass with essential DOFs eliminated.
struct AssembledSystem {
  Discretization disc;
  FullMatrices full;
  SymBandMatrix K;
  SymBandMatrix M;
  std::vector<std::size_t> free_dofs;  // reduced -> global
  std::vector<long> reduced_of;        // global -> reduced or -1

  std::size_t size() const { return free_dofs.size(); }

  std::vector<double> expand(const std::vector<double>& reduced,
                             const std::vector<double>* fixed_values = nullptr) const {
    std::vector<double> g = fixed_values ? *fixed_values : std::vector<double>(disc.dofs(), 0.0);
    for (std::size_t i = 0; i < free_dofs.size(); ++i) g[free_dofs[i]] = reduced[i];
    return g;
  }

  std::vector<double> restrict_vec(const std::vector<double>& global) const {
    std::vector<double> r(free_dofs.size());
    for (std::size_t i = 0; i < free_dofs.size(); ++i) r[i] = global[free_dofs[i]];
    return r;
  }

  GridFunction grid(const std::vector<double>& reduced) const {
    return GridFunction(disc.nodes, expand(reduced));
  }
};

/// fixed[g] true eliminates global DOF g.
inline AssembledSystem constrain(Discretization d, const std::vector<bool>& fixed) {
  AssembledSystem s;
  s.full = assemble_full(d);
  s.disc = std::move(d);
  const std::size_t n = s.disc.dofs();
  s.reduced_of.assign(n, -1);
  for (std::size_t g = 0; g < n; ++g)
    if (!fixed[g]) {
      s.reduced_of[g] = static_cast<long>(s.free_dofs.size());
      s.free_dofs.push_back(g);
    }
  const std::size_t m = s.free_dofs.size();
  s.K = SymBandMatrix(m, 3);
  s.M = SymBandMatrix(m, 3);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i >= 3 ? i - 3 : 0; j <= i; ++j) {
      s.K.add(i, j, s.full.K(s.free_dofs[i], s.free_dofs[j]));
      s.M.add(i, j, s.full.M(s.free_dofs[i], s.free_dofs[j]));
    }
  return s;
}

inline std::vector<bool> clamp_mask(std::size_t dofs, bool clamp_lo, bool clamp_hi) {
  std::vector<bool> fixed(dofs, false);
  if (clamp_lo) fixed[0] = fixed[1] = true;
  if (clamp_hi) fixed[dofs - 2] = fixed[dofs - 1] = true;
  return fixed;
}

/// The stiff problem on (a, b) at a given epsilon, clamped at both ends.
inline AssembledSystem assemble(const StiffProblem& problem, double epsilon, const Mesh& mesh) {
  auto d = stiff_discretization(problem, epsilon, mesh);
  const auto mask = clamp_mask(d.dofs(), true, true);
  return constrain(std::move(d), mask);
}

// ============================================================================
// End fluxes and interface recovery
// ============================================================================

/// Moment k y'' and shear (k y'')' at the ends of a one-interval solution.
struct EndFlux {
  double moment = 0.0;
  double shear = 0.0;
};

/// Variationally consistent flux recovery from the weak-form residual
/// r = K y - s M y - F evaluated at the end DOFs:
/// left end  r(u) = shear, r(u') = -moment; right end r(u) = -shear, r(u') = moment.
inline std::pair<EndFlux, EndFlux> recover_end_flux(const FullMatrices& fm,
                                                    const std::vector<double>& y, double shift,
                                                    const std::vector<double>& rhs_load) {
  auto ky = fm.K.multiply(y);
  auto my = fm.M.multiply(y);
  const std::size_t n = y.size();
  auto r = [&](std::size_t g) { return ky[g] - shift * my[g] - rhs_load[g]; };
  return {EndFlux{-r(1), r(0)}, EndFlux{r(n - 1), -r(n - 2)}};
}

/// Element-polynomial moment and shear k y'', (k y'')' on one side of x.
inline EndFlux element_flux(const Discretization& d, const GridFunction& y, double x, int side) {
  const std::size_t e = d.element_of(x, side);
  const double h = d.h(e);
  const double xi = (x - d.nodes[e]) / h;
  const auto n2 = hermite::shape(xi, h, 2);
  const auto n3 = hermite::shape(xi, h, 3);
  const auto& u = y.dofs();
  double y2 = 0.0, y3 = 0.0;
  for (int i = 0; i < 4; ++i) {
    y2 += n2[i] * u[2 * e + i];
    y3 += n3[i] * u[2 * e + i];
  }
  return {d.k(e, x) * y2, d.k(e, x, 1) * y2 + d.k(e, x) * y3};
}

struct InterfaceJumps {
  double value = 0.0;   // [u]_0 (zero by conformity)
  double slope = 0.0;   // [u']_0 (zero by conformity)
  double moment = 0.0;  // [k u'']_0
  double shear = 0.0;   // [(k u'')']_0
};

inline InterfaceJumps interface_jumps(const Discretization& d, const GridFunction& y, double x0) {
  const auto l = element_flux(d, y, x0, -1);
  const auto r = element_flux(d, y, x0, +1);
  return {std::abs(y.eval(x0, 0, +1) - y.eval(x0, 0, -1)),
          std::abs(y.eval(x0, 1, +1) - y.eval(x0, 1, -1)), std::abs(r.moment - l.moment),
          std::abs(r.shear - l.shear)};
}

// ============================================================================
// Boundary value problems (k y'')'' - shift y = rhs on one interval
// ============================================================================

struct BoundaryCondition {
  enum class Type { essential, natural };
  Type type = Type::essential;
  double first = 0.0;   // value (essential) or moment k y'' (natural)
  double second = 0.0;  // slope (essential) or shear (k y'')' (natural)

  static BoundaryCondition clamped(double value = 0.0, double slope = 0.0) {
    return {Type::essential, value, slope};
  }
  static BoundaryCondition natural(double moment = 0.0, double shear = 0.0) {
    return {Type::natural, moment, shear};
  }
  bool is_essential() const { return type == Type::essential; }
};

struct BvpSolution {
  GridFunction y;
  EndFlux lo;  // recovered (essential end) or prescribed (natural end)
  EndFlux hi;
  double compatibility = 0.0;  // kernel^t F for the orthogonal solve
};

using ScalarFn = std::function<double(double)>;

namespace detail {

struct BvpSetup {
  AssembledSystem sys;
  std::vector<double> fixed_values;  // global, lifting of essential data
  std::vector<double> rhs_load;      // (rhs, phi) over all DOFs
  std::vector<double> F;             // reduced right-hand side
};

inline BvpSetup bvp_setup(const CoefficientFn& k, const std::vector<double>& nodes,
                          const ScalarFn& rhs, const BoundaryCondition& lo,
                          const BoundaryCondition& hi, double shift) {
  auto d = single_interval(k, nodes);
  const std::size_t n = d.dofs();
  BvpSetup s;
  s.rhs_load = load_vector(d, rhs);
  s.sys = constrain(std::move(d), clamp_mask(n, lo.is_essential(), hi.is_essential()));
  s.fixed_values.assign(n, 0.0);
  std::vector<double> g = s.rhs_load;
  if (lo.is_essential()) {
    s.fixed_values[0] = lo.first;
    s.fixed_values[1] = lo.second;
  } else {
    g[0] += lo.second;  // + shear(L) phi(L)
    g[1] -= lo.first;   // - moment(L) phi'(L)
  }
  if (hi.is_essential()) {
    s.fixed_values[n - 2] = hi.first;
    s.fixed_values[n - 1] = hi.second;
  } else {
    g[n - 2] -= hi.second;  // - shear(R) phi(R)
    g[n - 1] += hi.first;   // + moment(R) phi'(R)
  }
  const auto kl = s.sys.full.K.multiply(s.fixed_values);
  const auto ml = s.sys.full.M.multiply(s.fixed_values);
  for (std::size_t i = 0; i < n; ++i) g[i] -= kl[i] - shift * ml[i];
  s.F = s.sys.restrict_vec(g);
  return s;
}

inline BvpSolution finish(const BvpSetup& s, const std::vector<double>& y_red, double shift,
                          const BoundaryCondition& lo, const BoundaryCondition& hi) {
  auto y = s.sys.expand(y_red, &s.fixed_values);
  auto [flo, fhi] = recover_end_flux(s.sys.full, y, shift, s.rhs_load);
  if (!lo.is_essential()) flo = {lo.first, lo.second};
  if (!hi.is_essential()) fhi = {hi.first, hi.second};
  return {GridFunction(s.sys.disc.nodes, std::move(y)), flo, fhi, 0.0};
}

/// Distance from shift to the nearest eigenvalue of (K, M), estimated by a
/// few steps of inverse iteration with the already factored K - shift M.
inline double nearest_eigen_distance(const BandLdlt& f, const SymBandMatrix& M) {
  std::vector<double> x(M.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 + 0.37 * std::sin(1.3 * i + 0.2);
  double est = 0.0;
  for (int it = 0; it < 6; ++it) {
    auto mx = M.multiply(x);
    auto y = f.solve(mx);
    const double xmx = dot(x, mx);
    const double ymx = dot(y, mx);
    est = std::abs(xmx / ymx);  // Rayleigh quotient of (A^{-1} M)^{-1}
    const double nrm = std::sqrt(std::abs(dot(y, M.multiply(y))));
    if (!(nrm > 0.0) || !std::isfinite(nrm)) return 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] / nrm;
  }
  return est;
}

}  // namespace detail

/// Default mesh for one-interval problems.
inline constexpr std::size_t kDefaultIntervalElements = 128;

/// Solves (k y'')'' - shift y = rhs with essential or natural data at each end.
inline BvpSolution solve_bvp(const CoefficientFn& k, const std::vector<double>& nodes,
                             const ScalarFn& rhs, const BoundaryCondition& lo,
                             const BoundaryCondition& hi, double shift = 0.0) {
  auto s = detail::bvp_setup(k, nodes, rhs, lo, hi, shift);
  BandLdlt f(s.sys.K.axpy(-shift, s.sys.M));
  const double dist = f.singular() ? 0.0 : detail::nearest_eigen_distance(f, s.sys.M);
  if (dist <= 1e-8 * std::max(1.0, std::abs(shift)))
    throw Error(ErrorKind::resonant_shift, "shift " + std::to_string(shift) +
                                               " is an eigenvalue to tolerance (distance " +
                                               std::to_string(dist) + ")");
  return detail::finish(s, f.solve(s.F), shift, lo, hi);
}

inline BvpSolution solve_bvp(const CoefficientFn& k, Interval iv, const ScalarFn& rhs,
                             const BoundaryCondition& lo, const BoundaryCondition& hi,
                             double shift = 0.0,
                             std::size_t elements = kDefaultIntervalElements) {
  return solve_bvp(k, uniform_nodes(iv.lo, iv.hi, elements), rhs, lo, hi, shift);
}

/// Resonant solve: shift is a simple eigenvalue with eigenfunction `kernel`
/// (homogeneous version of the same boundary conditions). Returns the
/// solution L2-orthogonal to the kernel, on the kernel's mesh.
inline BvpSolution solve_bvp_orthogonal(const CoefficientFn& k, const ScalarFn& rhs,
                                        const BoundaryCondition& lo, const BoundaryCondition& hi,
                                        double shift, const GridFunction& kernel,
                                        double tol = 1e-7) {
  auto s = detail::bvp_setup(k, kernel.nodes(), rhs, lo, hi, shift);
  const auto v = s.sys.restrict_vec(kernel.dofs());
  const auto Mv = s.sys.M.multiply(v);
  const double vMv = dot(v, Mv);
  const double vF = dot(v, s.F);
  const double scale = norm2(s.F) * norm2(v);
  if (std::abs(vF) > tol * std::max(scale, 1e-300))
    throw Error(ErrorKind::solvability_violated,
                "compatibility functional " + std::to_string(vF) + " exceeds " +
                    std::to_string(tol) + " * |F||v| = " + std::to_string(tol * scale));
  std::vector<double> Fc = s.F;
  const double mu = vF / vMv;
  for (std::size_t i = 0; i < Fc.size(); ++i) Fc[i] -= mu * Mv[i];

  auto project = [&](std::vector<double>& y) {
    const double c = dot(y, Mv) / vMv;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= c * v[i];
  };
  // (K - sM + tau M) y = Fc + tau M y, iterated on the complement of the kernel.
  double tau = 1e-4 * std::max(1.0, std::abs(shift));
  for (int attempt = 0; attempt < 4; ++attempt, tau *= 0.1) {
    BandLdlt f(s.sys.K.axpy(tau - shift, s.sys.M));
    std::vector<double> y(v.size(), 0.0);
    double change = 0.0;
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      auto My = s.sys.M.multiply(y);
      std::vector<double> r = Fc;
      for (std::size_t i = 0; i < r.size(); ++i) r[i] += tau * My[i];
      auto yn = f.solve(r);
      project(yn);
      change = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) change = std::max(change, std::abs(yn[i] - y[i]));
      y = std::move(yn);
      double ymax = 0.0;
      for (double t : y) ymax = std::max(ymax, std::abs(t));
      if (!std::isfinite(change)) break;
      if (change <= 1e-14 * std::max(ymax, 1e-300)) {
        ok = true;
        break;
      }
    }
    if (!ok) continue;
    auto sol = detail::finish(s, y, shift, lo, hi);
    // Remove the kernel component introduced by the boundary lifting.
    const double c = sol.y.inner(kernel) / kernel.inner(kernel);
    if (lo.is_essential() || hi.is_essential()) {
      // kernel vanishes on essential DOFs, so subtracting it keeps the data
      sol.y.axpy(-c, kernel);
      auto [flo, fhi] = recover_end_flux(s.sys.full, sol.y.dofs(), shift, s.rhs_load);
      if (lo.is_essential()) sol.lo = flo;
      if (hi.is_essential()) sol.hi = fhi;
    }
    sol.compatibility = vF;
    return sol;
  }
  throw NoConvergence("solve_bvp_orthogonal fixed-point iteration", tau);
}

}  // namespace stiffwkb
