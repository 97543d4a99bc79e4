#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "eigensolver.hpp"
#include "fem.hpp"
#include "lowfreq.hpp"
#include "verify.hpp"
#include "wkb.hpp"

#ifndef STIFFWKB_VERSION
#define STIFFWKB_VERSION "0.0.0"
#endif

namespace stiffwkb::cli {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Files of one run, kept in memory and written at the end.
class OutputSet {
 public:
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  const std::map<std::string, std::string>& files() const { return files_; }
  bool has(const std::string& name) const { return files_.count(name) > 0; }
  const std::string& at(const std::string& name) const { return files_.at(name); }

  /// Each file goes to a temporary name first and is renamed into place.
  void commit(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files_) {
      const auto target = dir / name;
      const auto tmp = dir / (name + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
      }
      std::filesystem::rename(tmp, target);
    }
  }

 private:
  std::map<std::string, std::string> files_;
};

struct RunContext {
  RunConfig config;
  unsigned threads = 1;

  EigenOptions eigen() const {
    EigenOptions e;
    e.tolerance = config.tol_eigen;
    return e;
  }
  ConvergenceOptions convergence() const {
    ConvergenceOptions o;
    o.mesh = config.mesh();
    o.eigen = eigen();
    o.threads = threads;
    return o;
  }
};

// ============================================================================
// direct
// ============================================================================

inline std::string spectrum_csv(const RunContext& ctx) {
  const auto spec = lowest_spectrum(ctx.config.problem(), ctx.config.epsilon,
                                    ctx.config.num_modes, ctx.config.mesh(), ctx.eigen());
  std::string s = "epsilon,index,lambda,rayleigh_residual\n";
  for (const auto& p : spec.pairs)
    s += fmt(ctx.config.epsilon) + "," + std::to_string(p.index) + "," + fmt(p.lambda) + "," +
         fmt(p.residual) + "\n";
  return s;
}

inline void cmd_direct(const RunContext& ctx, OutputSet& out) {
  out.add("spectrum.csv", spectrum_csv(ctx));
}

// ============================================================================
// lowfreq
// ============================================================================

inline nlohmann::json samples(const GridFunction& g, int n = 64) {
  nlohmann::json xs = nlohmann::json::array(), ys = nlohmann::json::array();
  for (int i = 0; i <= n; ++i) {
    const double x = g.lo() + (g.hi() - g.lo()) * i / n;
    xs.push_back(x);
    ys.push_back(g(x));
  }
  return {{"x", xs}, {"y", ys}};
}

inline void cmd_lowfreq(const RunContext& ctx, OutputSet& out) {
  const auto& c = ctx.config;
  const auto problem = c.problem();
  const auto e = expand_low(problem, c.mode);
  const auto rows = parallel_map<std::vector<std::string>>(
      c.epsilon_grid.size(), ctx.threads, [&](std::size_t i) {
        const double eps = c.epsilon_grid[i];
        const auto spec = lowest_spectrum(problem, eps, c.mode, c.mesh(), ctx.eigen());
        const double direct = spec.pairs.back().lambda;
        std::vector<std::string> r;
        for (int order : {0, 1}) {
          const double pred = compose_low(e, eps, order).lambda;
          r.push_back(fmt(eps) + "," + std::to_string(order) + "," + fmt(pred) + "," +
                      fmt(direct) + "," + fmt(std::abs(pred - direct) / direct) + "\n");
        }
        return r;
      });
  std::string s = "epsilon,order,lambda_pred,lambda_direct,rel_err\n";
  for (const auto& r : rows)
    for (const auto& line : r) s += line;
  out.add("lowfreq.csv", s);
  nlohmann::json j = {{"mode", e.mode},
                      {"lambda0", e.lambda0},
                      {"lambda1", e.lambda1},
                      {"lambda1_compat", e.lambda1_compat},
                      {"v0", samples(e.v0)},
                      {"v1", samples(e.v1)},
                      {"u0", samples(e.u0)},
                      {"u1", samples(e.u1)}};
  out.add("lowfreq.json", j.dump(2) + "\n");
}

// ============================================================================
// highfreq
// ============================================================================

inline WkbExpansion build_expansion(const RunContext& ctx) {
  WkbOptions o;
  o.order = std::max(1, ctx.config.max_order());
  o.mode = ctx.config.mode;
  o.quadrature_tol = ctx.config.tol_quadrature;
  return build_wkb(ctx.config.problem(), ctx.config.delta, o);
}

inline std::string convergence_csv(const ConvergenceReport& rep) {
  std::string s = "order,p,epsilon,lambda_pred,lambda_matched,abs_err,k_index,residual_sup\n";
  for (const auto& r : rep.rows)
    s += std::to_string(r.order) + "," + std::to_string(r.p) + "," + fmt(r.epsilon) + "," +
         fmt(r.lambda_pred) + "," + fmt(r.lambda_matched) + "," + fmt(r.abs_err) + "," +
         (r.ambiguous ? std::string("ambiguous") : std::to_string(r.k_index)) + "," +
         fmt(r.residual_sup) + "\n";
  // summary rows: p = "slope", abs_err holds the error slope, residual_sup the residual slope
  for (const auto& [n, slope] : rep.slopes)
    s += std::to_string(n) + ",slope,,,," + fmt(slope) + ",," + fmt(residual_slope(rep, n)) + "\n";
  return s;
}

inline std::string expansion_json(const WkbExpansion& st, const EpsilonSequence& seq) {
  nlohmann::json fs = nlohmann::json::array();
  const double b = st.problem.b;
  for (const auto& f : st.fs) {
    nlohmann::json xs = nlohmann::json::array(), comps = nlohmann::json::array();
    for (int i = 0; i <= 64; ++i) xs.push_back(b * i / 64);
    for (int c = 0; c < 4; ++c) {
      nlohmann::json ys = nlohmann::json::array();
      for (int i = 0; i <= 64; ++i) ys.push_back(f[c](b * i / 64));
      comps.push_back(ys);
    }
    fs.push_back({{"x", xs}, {"components", comps}});
  }
  nlohmann::json vs = nlohmann::json::array();
  for (const auto& v : st.vs) vs.push_back(samples(v));
  nlohmann::json j = {{"delta", st.delta},
                      {"omegas", st.omegas},
                      {"lambdas", lambda_by_power(st.omegas, st.omegas.size() - 1)},
                      {"S_b", st.phase().S_b()},
                      {"p_first", seq.p_first},
                      {"epsilon_p", seq.values},
                      {"v", vs},
                      {"f", fs}};
  return j.dump(2) + "\n";
}

inline ConvergenceReport cmd_highfreq(const RunContext& ctx, OutputSet& out) {
  const auto st = build_expansion(ctx);
  auto rep = convergence_table(st, ctx.config.orders, ctx.config.p_min, ctx.config.p_max,
                               ctx.convergence());
  out.add("convergence.csv", convergence_csv(rep));
  out.add("expansion.json", expansion_json(st, st.sequence(ctx.config.p_max, ctx.config.p_min)));
  return rep;
}

// ============================================================================
// sweep
// ============================================================================

inline std::string fan_svg(const DensitySweep& ds) {
  const double W = 720, H = 480, L = 70, R = 20, T = 30, B = 50;
  double xmin = *std::min_element(ds.eps_grid.begin(), ds.eps_grid.end());
  double xmax = *std::max_element(ds.eps_grid.begin(), ds.eps_grid.end());
  if (xmax == xmin) xmax = xmin + 1.0;
  const double ymin = 0.0, ymax = 2.0 * ds.target;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
       "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
  s += "<defs><clipPath id=\"plot\"><rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" +
       num(W - L - R) + "\" height=\"" + num(H - T - B) + "\"/></clipPath></defs>\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes and ticks
  s += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" +
       num(H - B) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" +
       num(H - B) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + (xmax - xmin) * i / 4, y = ymin + (ymax - ymin) * i / 4;
    s += "<text x=\"" + num(px(x)) + "\" y=\"" + num(H - B + 18) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + num(x) + "</text>\n";
    s += "<text x=\"" + num(L - 6) + "\" y=\"" + num(py(y) + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">" + num(y) + "</text>\n";
  }
  s += "<text x=\"" + num(0.5 * (L + W - R)) + "\" y=\"" + num(H - 10) +
       "\" font-size=\"13\" text-anchor=\"middle\">epsilon</text>\n";
  s += "<text x=\"16\" y=\"" + num(0.5 * (T + H - B)) +
       "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(0.5 * (T + H - B)) + ")\">lambda</text>\n";
  // one polyline per tracked index, points in increasing eps
  std::vector<std::size_t> order(ds.eps_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return ds.eps_grid[a] < ds.eps_grid[b]; });
  std::map<std::size_t, std::vector<std::pair<double, double>>> curves;
  for (const auto& r : ds.rows) curves[r.index];
  for (std::size_t g : order)
    for (const auto& r : ds.rows)
      if (r.epsilon == ds.eps_grid[g]) curves[r.index].push_back({r.epsilon, r.lambda});
  s += "<g clip-path=\"url(#plot)\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1\">\n";
  for (const auto& [idx, pts] : curves) {
    s += "<polyline data-index=\"" + std::to_string(idx) + "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      s += (i ? " " : "") + num(px(pts[i].first)) + "," + num(py(pts[i].second));
    s += "\"/>\n";
  }
  s += "</g>\n";
  s += "<line x1=\"" + num(L) + "\" y1=\"" + num(py(ds.target)) + "\" x2=\"" + num(W - R) +
       "\" y2=\"" + num(py(ds.target)) +
       "\" stroke=\"firebrick\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n";
  s += "<text x=\"" + num(W - R - 4) + "\" y=\"" + num(py(ds.target) - 6) +
       "\" font-size=\"12\" text-anchor=\"end\" fill=\"firebrick\">omega0^4 = " +
       num(ds.target) + "</text>\n";
  s += "</svg>\n";
  return s;
}

inline DensitySweep cmd_sweep(const RunContext& ctx, OutputSet& out) {
  const auto& c = ctx.config;
  const auto problem = c.problem();
  const auto lim = solve_limit_cantilever(problem.k0, problem.a, c.mode);
  const auto ds = density_sweep(problem, c.epsilon_grid, c.num_modes, lim.lambda, c.mesh(),
                                ctx.threads, ctx.eigen());
  std::string d = "epsilon,index,lambda\n";
  for (const auto& r : ds.rows)
    d += fmt(r.epsilon) + "," + std::to_string(r.index) + "," + fmt(r.lambda) + "\n";
  out.add("density.csv", d);
  std::string m = "epsilon,min_gap\n";
  for (std::size_t g = 0; g < ds.eps_grid.size(); ++g)
    m += fmt(ds.eps_grid[g]) + "," + fmt(ds.min_gap[g]) + "\n";
  out.add("density_min_gap.csv", m);
  out.add("fan.svg", fan_svg(ds));
  return ds;
}

// ============================================================================
// verify-all
// ============================================================================

inline void cmd_verify_all(const RunContext& ctx, OutputSet& out) {
  cmd_direct(ctx, out);
  cmd_lowfreq(ctx, out);
  const auto rep = cmd_highfreq(ctx, out);
  const auto ds = cmd_sweep(ctx, out);
  const auto st = build_expansion(ctx);
  const auto& c = ctx.config;
  const auto weak = weak_convergence_test(st, c.p_min, c.p_max, quartic_bump(st.problem.k1, c.b),
                                          1, ctx.convergence());
  std::string w = "p,epsilon,k_index,lambda,pairing,stiff_distance\n";
  for (const auto& r : weak.rows)
    w += std::to_string(r.p) + "," + fmt(r.epsilon) + "," + std::to_string(r.k_index) + "," +
         fmt(r.lambda) + "," + fmt(r.pairing) + "," + fmt(r.stiff_distance) + "\n";
  out.add("weak.csv", w);

  std::string s = "quantity,value\n";
  auto put = [&s](const std::string& k, double v) { s += k + "," + fmt(v) + "\n"; };
  for (const auto& [n, slope] : rep.slopes) {
    put("error_slope_order_" + std::to_string(n), slope);
    put("residual_slope_order_" + std::to_string(n), residual_slope(rep, n));
  }
  const int n_idx = rep.slopes.count(1) ? 1 : rep.slopes.begin()->first;
  try {
    const auto [lo, hi] = index_scaling(rep, n_idx, std::max(2, c.p_min), c.p_max);
    put("index_scaling_min", lo);
    put("index_scaling_max", hi);
  } catch (const std::invalid_argument&) {
  }
  put("gap_slope", gap_slope(rep, rep.slopes.begin()->first));
  put("weyl_c0", weyl_c0(st.problem.k1, c.b));
  put("weak_pairing_slope", weak.pairing_slope);
  put("stiff_distance_last", weak.rows.back().stiff_distance);
  put("min_gap_monotone", min_gap_monotone(ds) ? 1.0 : 0.0);
  put("density_monotonicity_violations", static_cast<double>(ds.monotonicity_violations));
  out.add("summary.csv", s);
}

// ============================================================================
// Dispatch
// ============================================================================

inline std::string manifest(const std::string& command, const RunConfig& c, const OutputSet& out) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, _] : out.files()) files.push_back(name);
  nlohmann::json j = {{"command", command},
                      {"version", STIFFWKB_VERSION},
                      {"config", c.to_json()},
                      {"files", files}};
  return j.dump(2) + "\n";
}

/// Runs one subcommand and writes its files plus manifest.json into `dir`.
inline OutputSet run_command(const std::string& command, const RunContext& ctx,
                             const std::filesystem::path& dir) {
  OutputSet out;
  if (command == "direct")
    cmd_direct(ctx, out);
  else if (command == "lowfreq")
    cmd_lowfreq(ctx, out);
  else if (command == "highfreq")
    cmd_highfreq(ctx, out);
  else if (command == "sweep")
    cmd_sweep(ctx, out);
  else if (command == "verify-all")
    cmd_verify_all(ctx, out);
  else
    throw ConfigError("command", "unknown subcommand '" + command + "'");
  out.add("manifest.json", manifest(command, ctx.config, out));
  out.commit(dir);
  return out;
}

}  // namespace stiffwkb::cli
