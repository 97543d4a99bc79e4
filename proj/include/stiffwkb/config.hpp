#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coeffs.hpp"
#include "error.hpp"
#include "fem.hpp"
#include "wkb.hpp"

namespace stiffwkb {

struct CoefficientSpec {
  CoefficientKind kind = CoefficientKind::constant;
  double c = 1.0;
  double d = 0.0;
};

/// Resolved run configuration. Every key is optional in the file; unknown keys are errors.
struct RunConfig {
  double a = -1.0;
  double b = 1.0;
  CoefficientSpec k0, k1;
  std::size_t mode = 1;
  std::vector<int> orders{0, 1};
  double delta = 0.0;
  int p_min = 1;
  int p_max = 6;
  double epsilon = 0.2;
  std::vector<double> epsilon_grid{0.4, 0.3, 0.25, 0.2, 0.15};
  std::size_t num_modes = 10;
  int oversample = 12;
  std::size_t dof_cap = 200000;
  std::size_t stiff_elements = 64;
  double tol_eigen = 1e-10;
  double tol_quadrature = 1e-12;
  std::string output_dir = "out";

  StiffProblem problem() const {
    StiffProblem p;
    p.a = a;
    p.b = b;
    p.k0 = make_coefficient(k0.kind, k0.c, k0.d, {a, 0.0});
    p.k1 = make_coefficient(k1.kind, k1.c, k1.d, {0.0, b});
    return p;
  }

  MeshOptions mesh() const { return {oversample, dof_cap, stiff_elements, 64}; }

  int max_order() const { return orders.empty() ? 0 : *std::max_element(orders.begin(), orders.end()); }

  void validate() const;
  nlohmann::json to_json() const;
};

namespace detail {

inline const char* kind_names[] = {"constant", "affine", "exponential"};

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& prefix) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "config" : prefix, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(prefix + it.key(), "unknown key");
}

template <class T>
T get_field(const nlohmann::json& j, const std::string& key, const std::string& name, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(name, std::string("wrong type (") + e.what() + ")");
  }
}

inline CoefficientSpec parse_coefficient(const nlohmann::json& j, const std::string& name) {
  reject_unknown(j, {"kind", "c", "d"}, name + ".");
  CoefficientSpec s;
  const auto kind = get_field<std::string>(j, "kind", name + ".kind", "constant");
  if (kind == "constant")
    s.kind = CoefficientKind::constant;
  else if (kind == "affine")
    s.kind = CoefficientKind::affine;
  else if (kind == "exponential")
    s.kind = CoefficientKind::exponential;
  else
    throw ConfigError(name + ".kind", "expected constant, affine or exponential, got '" + kind + "'");
  s.c = get_field<double>(j, "c", name + ".c", 1.0);
  s.d = get_field<double>(j, "d", name + ".d", 0.0);
  return s;
}

inline nlohmann::json coefficient_json(const CoefficientSpec& s) {
  return {{"kind", kind_names[static_cast<int>(s.kind)]}, {"c", s.c}, {"d", s.d}};
}

}  // namespace detail

inline void RunConfig::validate() const {
  if (!std::isfinite(a) || !(a < 0.0)) throw ConfigError("a", "must satisfy a < 0 < b");
  if (!std::isfinite(b) || !(b > 0.0)) throw ConfigError("b", "must satisfy a < 0 < b");
  try {
    (void)make_coefficient(k0.kind, k0.c, k0.d, {a, 0.0});
  } catch (const Error& e) {
    throw ConfigError("problem.k0", e.what());
  }
  try {
    (void)make_coefficient(k1.kind, k1.c, k1.d, {0.0, b});
  } catch (const Error& e) {
    throw ConfigError("problem.k1", e.what());
  }
  try {
    check_delta(delta);
  } catch (const Error& e) {
    throw ConfigError("delta", e.what());
  }
  if (mode < 1) throw ConfigError("mode", "must be >= 1");
  if (orders.empty()) throw ConfigError("orders", "must not be empty");
  for (int n : orders)
    if (n < 0 || n > 4) throw ConfigError("orders", "each order must lie in 0..4");
  if (p_min < 1 || p_max < p_min) throw ConfigError("p_range", "must be [p_min, p_max] with 1 <= p_min <= p_max");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (epsilon_grid.empty()) throw ConfigError("epsilon_grid", "must not be empty");
  for (double e : epsilon_grid)
    if (!(e > 0.0)) throw ConfigError("epsilon_grid", "entries must be positive");
  if (num_modes < 1) throw ConfigError("num_modes", "must be >= 1");
  if (oversample < 8) throw ConfigError("oversample", "must be at least 8");
  if (dof_cap < 16) throw ConfigError("dof_cap", "must be at least 16");
  if (!(tol_eigen > 0.0)) throw ConfigError("tolerances.eigen", "must be positive");
  if (!(tol_quadrature > 0.0)) throw ConfigError("tolerances.quadrature", "must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

inline nlohmann::json RunConfig::to_json() const {
  return {{"problem",
           {{"a", a}, {"b", b}, {"k0", detail::coefficient_json(k0)},
            {"k1", detail::coefficient_json(k1)}}},
          {"mode", mode},
          {"orders", orders},
          {"delta", delta},
          {"p_range", {p_min, p_max}},
          {"epsilon", epsilon},
          {"epsilon_grid", epsilon_grid},
          {"num_modes", num_modes},
          {"oversample", oversample},
          {"dof_cap", dof_cap},
          {"stiff_elements", stiff_elements},
          {"tolerances", {{"eigen", tol_eigen}, {"quadrature", tol_quadrature}}},
          {"output_dir", output_dir}};
}

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::get_field;
  detail::reject_unknown(j,
                         {"problem", "mode", "orders", "delta", "p_range", "epsilon",
                          "epsilon_grid", "num_modes", "oversample", "dof_cap", "stiff_elements",
                          "tolerances", "output_dir"},
                         "");
  RunConfig c;
  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    detail::reject_unknown(p, {"a", "b", "k0", "k1"}, "problem.");
    c.a = get_field<double>(p, "a", "a", c.a);
    c.b = get_field<double>(p, "b", "b", c.b);
    if (p.contains("k0")) c.k0 = detail::parse_coefficient(p.at("k0"), "problem.k0");
    if (p.contains("k1")) c.k1 = detail::parse_coefficient(p.at("k1"), "problem.k1");
  }
  const long mode = get_field<long>(j, "mode", "mode", 1);
  if (mode < 1) throw ConfigError("mode", "must be >= 1");
  c.mode = static_cast<std::size_t>(mode);
  c.orders = get_field<std::vector<int>>(j, "orders", "orders", c.orders);
  c.delta = get_field<double>(j, "delta", "delta", c.delta);
  if (j.contains("p_range")) {
    const auto r = get_field<std::vector<int>>(j, "p_range", "p_range", {});
    if (r.size() != 2) throw ConfigError("p_range", "must be a two-element array [p_min, p_max]");
    c.p_min = r[0];
    c.p_max = r[1];
  }
  c.epsilon = get_field<double>(j, "epsilon", "epsilon", c.epsilon);
  c.epsilon_grid = get_field<std::vector<double>>(j, "epsilon_grid", "epsilon_grid", c.epsilon_grid);
  const long modes = get_field<long>(j, "num_modes", "num_modes", 10);
  if (modes < 1) throw ConfigError("num_modes", "must be >= 1");
  c.num_modes = static_cast<std::size_t>(modes);
  c.oversample = get_field<int>(j, "oversample", "oversample", c.oversample);
  const long cap = get_field<long>(j, "dof_cap", "dof_cap", 200000);
  if (cap < 16) throw ConfigError("dof_cap", "must be at least 16");
  c.dof_cap = static_cast<std::size_t>(cap);
  const long stiff = get_field<long>(j, "stiff_elements", "stiff_elements", 64);
  if (stiff < 64) throw ConfigError("stiff_elements", "must be at least 64");
  c.stiff_elements = static_cast<std::size_t>(stiff);
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    detail::reject_unknown(t, {"eigen", "quadrature"}, "tolerances.");
    c.tol_eigen = get_field<double>(t, "eigen", "tolerances.eigen", c.tol_eigen);
    c.tol_quadrature = get_field<double>(t, "quadrature", "tolerances.quadrature", c.tol_quadrature);
  }
  c.output_dir = get_field<std::string>(j, "output_dir", "output_dir", c.output_dir);
  c.validate();
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace stiffwkb
