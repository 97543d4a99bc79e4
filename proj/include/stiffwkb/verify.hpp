#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "eigensolver.hpp"
#include "error.hpp"
#include "fem.hpp"
#include "jet.hpp"
#include "linalg.hpp"
#include "wkb.hpp"

namespace stiffwkb {

// ============================================================================
// Deterministic parallel map
// ============================================================================

/// Runs f(i) for i in [0, n) on up to `threads` workers; results are stored by
/// index so the outcome does not depend on scheduling.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, unsigned threads, const F& f) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errors(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n ? n : 1)));
  auto work = [&](unsigned t) {
    for (std::size_t i = t; i < n; i += threads) {
      try {
        out[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ============================================================================
// Strong-form residuals
// ============================================================================

struct ResidualReport {
  double sup_left = 0.0;   // sup |(k0 u'')'' - lambda u| on (a, 0)
  double sup_right = 0.0;  // sup |eps^4 (k1 u'')'' - lambda u| on (0, b)
  double sup = 0.0;
  InterfaceJumps jumps;    // [u], [u'], [k_eps u''], [(k_eps u'')'] at 0
  double mismatch_a = 0.0;  // max(|u(a)|, |u'(a)|)
  double mismatch_b = 0.0;  // max(|u(b)|, |u'(b)|)
};

using JetFn = std::function<Jet(double)>;

/// Residual of (k_eps u'')'' = lambda u for a piecewise function given by
/// derivative jets (order >= 4) on each side. `left_strong`, when given,
/// supplies (k0 u'')'' - lambda u on (a, 0) directly.
inline ResidualReport residual(const StiffProblem& problem, double epsilon, double lambda,
                               const JetFn& left, const JetFn& right, int samples = 400,
                               const std::function<double(double)>& left_strong = nullptr) {
  ResidualReport r;
  const double e4 = std::pow(epsilon, 4);
  auto strong = [&](const Jet& u, const Jet& k, double scale) {
    const Jet m = k * u.derivative(2);
    return scale * m.derivative(2)[0] - lambda * u[0];
  };
  for (int i = 0; i <= samples; ++i) {
    const double x = problem.a + (0.0 - problem.a) * i / samples;
    const double f = left_strong ? left_strong(x) : strong(left(x), problem.k0.jet(x, 4), 1.0);
    r.sup_left = std::max(r.sup_left, std::abs(f));
  }
  for (int i = 0; i <= samples; ++i) {
    const double x = problem.b * i / samples;
    r.sup_right = std::max(r.sup_right, std::abs(strong(right(x), problem.k1.jet(x, 4), e4)));
  }
  r.sup = std::max(r.sup_left, r.sup_right);
  const Jet ul = left(0.0), ur = right(0.0);
  const Jet ml = problem.k0.jet(0.0, 4) * ul.derivative(2);
  const Jet mr = e4 * (problem.k1.jet(0.0, 4) * ur.derivative(2));
  r.jumps = {std::abs(ur[0] - ul[0]), std::abs(ur[1] - ul[1]), std::abs(mr[0] - ml[0]),
             std::abs(mr[1] - ml[1])};
  const Jet ua = left(problem.a), ub = right(problem.b);
  r.mismatch_a = std::max(std::abs(ua[0]), std::abs(ua[1]));
  r.mismatch_b = std::max(std::abs(ub[0]), std::abs(ub[1]));
  return r;
}

/// Jet evaluator of the composed WKB approximation of order n at eps.
class WkbJets {
 public:
  WkbJets(const WkbExpansion& st, double epsilon, int n) : st_(&st), eps_(epsilon), n_(n) {
    for (int k = 0; k <= n; ++k) {
      std::array<std::array<Cheb, 5>, 4> d;
      for (int i = 0; i < 4; ++i) {
        d[i][0] = st.fs[k][i];
        for (int j = 1; j <= 4; ++j) d[i][j] = d[i][j - 1].derivative();
      }
      df_.push_back(d);
    }
    for (int s = 0; s <= n; ++s) lambda_ += std::pow(epsilon, s) * st.lambda_coeff(s);
  }

  double lambda() const { return lambda_; }

  /// u on (0, b) = sum_k eps^k <f_k, N(1/eps, .)>.
  Jet right(double x) const {
    const auto& ph = st_->phase();
    const auto nj = basis_N_jet(1.0 / eps_, ph.jet(x, 4), ph.S_b());
    Jet u = Jet::constant(0.0, 4);
    double e = 1.0;
    for (int k = 0; k <= n_; ++k, e *= eps_)
      for (int i = 0; i < 4; ++i) {
        Jet f = Jet::constant(0.0, 4);
        for (int j = 0; j <= 4; ++j) f[j] = df_[k][i][j](x);
        u += e * (f * nj[i]);
      }
    return u;
  }

  /// u on (a, 0) = sum_k eps^k v_k (element polynomials; third derivative at most).
  Jet left(double x) const {
    Jet u = Jet::constant(0.0, 4);
    double e = 1.0;
    for (int k = 0; k <= n_; ++k, e *= eps_)
      for (int j = 0; j <= 3; ++j) u[j] += e * st_->vs[k].eval(x, j, -1);
    return u;
  }

  /// (k0 u'')'' - lambda u on (a, 0) with each (k0 v_k'')'' replaced by its
  /// defining equation omega0^4 v_k + sum_{l=1}^k lambda_l v_{k-l}.
  double left_strong(double x) const {
    std::vector<double> lam(n_ + 1), v(n_ + 1);
    for (int s = 0; s <= n_; ++s) lam[s] = st_->lambda_coeff(s);
    for (int k = 0; k <= n_; ++k) v[k] = st_->vs[k](x);
    double r = 0.0;
    for (int k = 0; k <= n_; ++k) {
      double img = 0.0;
      for (int l = 0; l <= k; ++l) img += lam[l] * v[k - l];
      r += std::pow(eps_, k) * img;
    }
    for (int s = 0; s <= n_; ++s)
      for (int k = 0; k <= n_; ++k) r -= std::pow(eps_, s + k) * lam[s] * v[k];
    return r;
  }

 private:
  const WkbExpansion* st_;
  double eps_;
  int n_;
  double lambda_ = 0.0;
  std::vector<std::array<std::array<Cheb, 5>, 4>> df_;
};

inline ResidualReport residual_high(const WkbExpansion& st, double epsilon, int n,
                                    int samples = 400) {
  const WkbJets j(st, epsilon, n);
  return residual(
      st.problem, epsilon, j.lambda(), [&j](double x) { return j.left(x); },
      [&j](double x) { return j.right(x); }, samples,
      [&j](double x) { return j.left_strong(x); });
}

/// Relative generalized residual of a discrete eigenpair.
inline double residual_discrete(const AssembledSystem& s, const Eigenpair& p) {
  const auto x = s.restrict_vec(p.u.dofs());
  const auto kx = s.K.multiply(x), mx = s.M.multiply(x);
  double r2 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    r2 += (kx[i] - p.lambda * mx[i]) * (kx[i] - p.lambda * mx[i]);
    m2 += mx[i] * mx[i];
  }
  return std::sqrt(r2) / (std::abs(p.lambda) * std::sqrt(m2));
}

// ============================================================================
// Matching
// ============================================================================

struct Match {
  double lambda = 0.0;
  std::size_t index = 0;
  double margin = 0.0;  // distance from lambda_tilde to the nearest other eigenvalue
};

inline Match match_eigenvalue(const Spectrum& spec, double lambda_tilde, double halfwidth) {
  std::vector<const Eigenpair*> inside;
  for (const auto& p : spec.pairs)
    if (std::abs(p.lambda - lambda_tilde) <= halfwidth) inside.push_back(&p);
  if (inside.size() != 1)
    throw Error(ErrorKind::ambiguous_match,
                std::to_string(inside.size()) + " eigenvalues within " +
                    std::to_string(halfwidth) + " of " + std::to_string(lambda_tilde));
  Match m{inside[0]->lambda, inside[0]->index, std::numeric_limits<double>::infinity()};
  for (const auto& p : spec.pairs)
    if (&p != inside[0]) m.margin = std::min(m.margin, std::abs(p.lambda - lambda_tilde));
  return m;
}

/// Direct eigenpairs bracketing lambda_tilde: lambda_k <= lambda_tilde < lambda_{k+1}.
struct Bracket {
  Spectrum spec;  // indices k, k+1 (and k+2 when k = 0)
  double gap = 0.0;
};

inline Bracket bracket_spectrum(const AssembledSystem& sys, double lambda_tilde,
                                const EigenOptions& eig = {}) {
  const std::size_t c = detail::count_below(sys, lambda_tilde);
  const std::size_t first = std::max<std::size_t>(c, 1);
  Bracket br;
  br.spec = solve_eigs(sys, EigenRequest::index_range(first, first + 1), eig);
  br.gap = br.spec.pairs[1].lambda - br.spec.pairs[0].lambda;
  return br;
}

// ============================================================================
// Convergence table along eps_p
// ============================================================================

struct ConvergenceRow {
  int order = 0;
  int p = 0;
  double epsilon = 0.0;
  double lambda_pred = 0.0;
  double lambda_matched = std::numeric_limits<double>::quiet_NaN();
  double abs_err = std::numeric_limits<double>::quiet_NaN();
  std::size_t k_index = 0;
  double residual_sup = 0.0;
  double gap = 0.0;
  double margin = 0.0;
  bool ambiguous = false;
};

struct ConvergenceReport {
  double delta = 0.0;
  std::vector<ConvergenceRow> rows;
  std::map<int, double> slopes;  // per order, fitted over unambiguous rows

  std::vector<const ConvergenceRow*> order_rows(int n) const {
    std::vector<const ConvergenceRow*> r;
    for (const auto& row : rows)
      if (row.order == n) r.push_back(&row);
    return r;
  }
};

struct ConvergenceOptions {
  MeshOptions mesh;
  EigenOptions eigen;
  unsigned threads = 1;
  int residual_samples = 400;
};

inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return loglog_slope(x, y);
}

/// Matches every (order, p) prediction against the direct spectrum at eps_p.
inline ConvergenceReport convergence_table(const WkbExpansion& st, const std::vector<int>& orders,
                                           int p_min, int p_max,
                                           const ConvergenceOptions& opt = {}) {
  const auto seq = st.sequence(p_max, p_min);
  struct Cell {
    int order, p;
  };
  std::vector<Cell> cells;
  for (int n : orders)
    for (int p = seq.p_first; p <= seq.p_last(); ++p) cells.push_back({n, p});
  const double w0 = st.omega0();
  auto rows = parallel_map<ConvergenceRow>(cells.size(), opt.threads, [&](std::size_t i) {
    const auto [n, p] = cells[i];
    ConvergenceRow row;
    row.order = n;
    row.p = p;
    row.epsilon = seq.eps(p);
    const WkbJets jets(st, row.epsilon, n);
    row.lambda_pred = jets.lambda();
    row.residual_sup = residual_high(st, row.epsilon, n, opt.residual_samples).sup;
    const double bound = std::pow(std::max(row.lambda_pred, 0.0) + w0 * w0 * w0 * w0, 0.25);
    const auto mesh = build_mesh(st.problem, row.epsilon, bound, opt.mesh);
    const auto sys = assemble(st.problem, row.epsilon, mesh);
    if (row.lambda_pred <= 0.0) {
      row.ambiguous = true;
      return row;
    }
    const auto br = bracket_spectrum(sys, row.lambda_pred, opt.eigen);
    row.gap = br.gap;
    try {
      const auto m = match_eigenvalue(br.spec, row.lambda_pred, 0.5 * br.gap);
      row.lambda_matched = m.lambda;
      row.k_index = m.index;
      row.margin = m.margin;
      row.abs_err = std::abs(row.lambda_pred - m.lambda);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ambiguous_match) throw;
      row.ambiguous = true;
    }
    return row;
  });
  ConvergenceReport rep;
  rep.delta = st.delta;
  rep.rows = std::move(rows);
  for (int n : orders) {
    std::vector<double> xs, ys;
    for (const auto* r : rep.order_rows(n))
      if (!r->ambiguous && r->abs_err > 0.0) {
        xs.push_back(r->epsilon);
        ys.push_back(r->abs_err);
      }
    rep.slopes[n] = fit_slope(xs, ys);
  }
  return rep;
}

/// Fitted slope of residual sup-norms for one order.
inline double residual_slope(const ConvergenceReport& rep, int n) {
  std::vector<double> xs, ys;
  for (const auto* r : rep.order_rows(n)) {
    xs.push_back(r->epsilon);
    ys.push_back(r->residual_sup);
  }
  return fit_slope(xs, ys);
}

// ============================================================================
// Index scaling and gap law
// ============================================================================

/// min and max of k(eps_p) eps_p over rows of the given order with p in [p_lo, p_hi].
inline std::pair<double, double> index_scaling(const ConvergenceReport& rep, int order, int p_lo,
                                               int p_hi) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  int count = 0;
  for (const auto* r : rep.order_rows(order)) {
    if (r->ambiguous || r->p < p_lo || r->p > p_hi) continue;
    const double v = static_cast<double>(r->k_index) * r->epsilon;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++count;
  }
  if (count < 3) throw std::invalid_argument("index_scaling: needs at least 3 matched indices");
  return {lo, hi};
}

/// Fitted slope of the measured local gap near the prediction against eps.
inline double gap_slope(const ConvergenceReport& rep, int order) {
  std::vector<double> xs, ys;
  for (const auto* r : rep.order_rows(order))
    if (r->gap > 0.0) {
      xs.push_back(r->epsilon);
      ys.push_back(r->gap);
    }
  return fit_slope(xs, ys);
}

/// c0 in mu_m ~ c0 m^4 by least squares over modes [m_lo, m_hi] of the
/// clamped-clamped soft-side limit problem.
inline double weyl_c0(const CoefficientFn& k1, double b, std::size_t m_lo = 5,
                      std::size_t m_hi = 15, std::size_t elements = 256) {
  auto d = single_interval(k1, uniform_nodes(0.0, b, elements));
  const auto mask = clamp_mask(d.dofs(), true, true);
  const auto sys = constrain(std::move(d), mask);
  const auto spec = solve_eigs(sys, EigenRequest::index_range(m_lo, m_hi));
  double num = 0.0, den = 0.0;
  for (const auto& p : spec.pairs) {
    const double m4 = std::pow(static_cast<double>(p.index), 4);
    num += p.lambda * m4;
    den += m4 * m4;
  }
  return num / den;
}

// ============================================================================
// Weak convergence on the soft side
// ============================================================================

struct WeakConvergenceRow {
  int p = 0;
  double epsilon = 0.0;
  std::size_t k_index = 0;
  double lambda = 0.0;
  double pairing = 0.0;          // |(u, phi)_{L2(0,b)}|, |u|_{L2(a,b)} = 1
  double stiff_distance = 0.0;   // |u|_(a,0) / |u|_(a,0)| -+ v0|
};

struct WeakConvergenceReport {
  std::vector<WeakConvergenceRow> rows;
  double pairing_slope = 0.0;
  double stiff_slope = 0.0;
};

/// (x (b - x))^2 scaled so that int k1 phi''^2 = 1.
inline std::function<double(double)> quartic_bump(const CoefficientFn& k1, double b) {
  auto d2 = [b](double x) { return 2.0 * b * b - 12.0 * b * x + 12.0 * x * x; };
  const double semi = integrate([&](double x) { return k1(x) * d2(x) * d2(x); }, 0.0, b);
  const double s = 1.0 / std::sqrt(semi);
  return [b, s](double x) { return s * x * x * (b - x) * (b - x); };
}

inline WeakConvergenceReport weak_convergence_test(const WkbExpansion& st, int p_min, int p_max,
                                                   const std::function<double(double)>& phi,
                                                   int order = 1,
                                                   const ConvergenceOptions& opt = {}) {
  const auto seq = st.sequence(p_max, p_min);
  std::vector<int> ps;
  for (int p = seq.p_first; p <= seq.p_last(); ++p) ps.push_back(p);
  const double w0 = st.omega0();
  const auto& v0 = st.vs[0];
  auto rows = parallel_map<WeakConvergenceRow>(ps.size(), opt.threads, [&](std::size_t i) {
    WeakConvergenceRow row;
    row.p = ps[i];
    row.epsilon = seq.eps(row.p);
    const double lt = compose_high(st, row.epsilon, order).lambda;
    const auto mesh = build_mesh(st.problem, row.epsilon, std::pow(2.0, 0.25) * w0, opt.mesh);
    const auto sys = assemble(st.problem, row.epsilon, mesh);
    const auto br = bracket_spectrum(sys, lt, opt.eigen);
    const auto m = match_eigenvalue(br.spec, lt, 0.5 * br.gap);
    const auto& pair = br.spec.pairs[m.index == br.spec.pairs[0].index ? 0 : 1];
    row.k_index = m.index;
    row.lambda = m.lambda;
    const auto& u = pair.u;
    const std::size_t i0 = mesh.interface_node;
    const auto soft = u.restrict_nodes(i0, u.nodes().size() - 1);
    const auto stiff = u.restrict_nodes(0, i0);
    row.pairing = phi ? std::abs(soft.inner(phi)) : 0.0;
    const double ns = stiff.norm();
    auto dist = [&](double sign) {
      return std::sqrt(std::max(0.0, integrate(
                                         [&](double x) {
                                           const double d = stiff(x) / ns - sign * v0(x);
                                           return d * d;
                                         },
                                         st.problem.a, 0.0, 1e-10)));
    };
    row.stiff_distance = std::min(dist(1.0), dist(-1.0));
    return row;
  });
  WeakConvergenceReport rep;
  rep.rows = std::move(rows);
  std::vector<double> xs, ys, zs;
  for (const auto& r : rep.rows) {
    xs.push_back(r.epsilon);
    ys.push_back(std::max(r.pairing, 1e-300));
    zs.push_back(std::max(r.stiff_distance, 1e-300));
  }
  rep.pairing_slope = fit_slope(xs, ys);
  rep.stiff_slope = fit_slope(xs, zs);
  return rep;
}

// ============================================================================
// Spectral density sweep
// ============================================================================

/// Lowest n eigenpairs at eps on a mesh resolving the n-th mode: the frequency
/// bound starts at `bound` and grows until it covers lambda_n^{1/4}.
inline Spectrum lowest_spectrum(const StiffProblem& problem, double epsilon, std::size_t n,
                                const MeshOptions& mesh_opt = {}, const EigenOptions& eig = {},
                                double bound = 2.0) {
  Spectrum spec;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const auto mesh = build_mesh(problem, epsilon, bound, mesh_opt);
    const auto sys = assemble(problem, epsilon, mesh);
    spec = solve_eigs(sys, EigenRequest::lowest(n), eig);
    const double top = std::pow(spec.pairs.back().lambda, 0.25);
    if (top <= bound) break;
    bound = 1.25 * top;
  }
  return spec;
}

struct DensityRow {
  double epsilon = 0.0;
  std::size_t index = 0;
  double lambda = 0.0;
};

struct DensitySweep {
  std::vector<double> eps_grid;
  std::vector<DensityRow> rows;       // grid order, then index
  std::vector<double> min_gap;        // min_i |lambda_i - target| per grid point
  double target = 0.0;
  std::size_t monotonicity_violations = 0;  // lambda_i(eps) increasing in eps per index
};

inline DensitySweep density_sweep(const StiffProblem& problem, const std::vector<double>& eps_grid,
                                  std::size_t num_modes, double target,
                                  const MeshOptions& mesh_opt = {}, unsigned threads = 1,
                                  const EigenOptions& eig = {}) {
  DensitySweep ds;
  ds.eps_grid = eps_grid;
  ds.target = target;
  auto spectra = parallel_map<std::vector<double>>(eps_grid.size(), threads, [&](std::size_t i) {
    const auto spec =
        lowest_spectrum(problem, eps_grid[i], num_modes, mesh_opt, eig, std::pow(target, 0.25));
    std::vector<double> lam;
    for (const auto& p : spec.pairs) lam.push_back(p.lambda);
    return lam;
  });
  for (std::size_t g = 0; g < eps_grid.size(); ++g) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spectra[g].size(); ++i) {
      ds.rows.push_back({eps_grid[g], i + 1, spectra[g][i]});
      best = std::min(best, std::abs(spectra[g][i] - target));
    }
    ds.min_gap.push_back(best);
  }
  // index tracking: eigenvalues are simple, so the i-th curve is continuous;
  // the guard counts grid neighbours where lambda_i fails to grow with eps.
  std::vector<std::size_t> order(eps_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return eps_grid[x] < eps_grid[y]; });
  for (std::size_t g = 1; g < order.size(); ++g) {
    const auto& lo = spectra[order[g - 1]];
    const auto& hi = spectra[order[g]];
    for (std::size_t i = 0; i < std::min(lo.size(), hi.size()); ++i)
      if (hi[i] < lo[i] * (1.0 - 1e-9)) ++ds.monotonicity_violations;
  }
  return ds;
}

/// True if min-gap is nonincreasing as eps decreases (grid in any order), within slack.
inline bool min_gap_monotone(const DensitySweep& ds, double slack = 1e-6) {
  std::vector<std::size_t> order(ds.eps_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](auto x, auto y) { return ds.eps_grid[x] > ds.eps_grid[y]; });
  for (std::size_t g = 1; g < order.size(); ++g)
    if (ds.min_gap[order[g]] > ds.min_gap[order[g - 1]] + slack) return false;
  return true;
}

// ============================================================================
// Limit estimate along eps_p (for comparing different delta families)
// ============================================================================

/// lambda^{eps_p} - sum_{s=1}^{s_max} eps_p^s lambda_s.
inline double limit_estimate(const WkbExpansion& st, double epsilon, double lambda_matched,
                             int s_max) {
  double v = lambda_matched;
  for (int s = 1; s <= s_max; ++s) v -= std::pow(epsilon, s) * st.lambda_coeff(s);
  return v;
}

}  // namespace stiffwkb
