#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oy/dynamics.hpp"
#include "oy/experiments.hpp"

namespace oy {

// Schema violations carry the offending field for the exit-2 diagnostics.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(const std::string& field_, const std::string& what)
      : std::runtime_error(field_ + ": " + what), field(field_) {}
};

struct ResolvedConfig {
  std::vector<std::string> experiments;
  ExperimentConfig cfg;
  bool allow_quadratic = false;
  bool dump_trajectory = false;
  std::string dump_format = "csv";
  nlohmann::json resolved;  // fully materialized config echoed into the manifest
};

namespace detail {

inline PotentialSpec potential_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("variant"))
    throw ConfigError("potential", "expected an object with a 'variant' field");
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "exponential") {
    const double beta = j.value("beta", 1.0);
    if (!(beta > 0.0)) throw ConfigError("potential.beta", "must be positive");
    return PotentialSpec::exponential(beta);
  }
  if (variant == "laplace_measure") {
    if (!j.contains("atoms") || !j.at("atoms").is_array() || j.at("atoms").empty())
      throw ConfigError("potential.atoms", "expected a nonempty array of [s, w] pairs");
    std::vector<std::pair<double, double>> atoms;
    for (const auto& a : j.at("atoms")) {
      if (!a.is_array() || a.size() != 2)
        throw ConfigError("potential.atoms", "each atom must be a [s, w] pair");
      const double s = a[0].get<double>(), w = a[1].get<double>();
      if (!(s > 0.0) || !(w > 0.0))
        throw ConfigError("potential.atoms", "atoms need s > 0 and w > 0");
      atoms.emplace_back(s, w);
    }
    return PotentialSpec::laplace_measure(std::move(atoms));
  }
  if (variant == "quadratic") return PotentialSpec::quadratic();
  if (variant == "perturbed") {
    if (!j.contains("base")) throw ConfigError("potential.base", "missing base potential");
    auto base = potential_from_json(j.at("base"));
    BumpDescriptor bump;
    const auto& bj = j.value("bump", nlohmann::json::object());
    bump.center = bj.value("center", 0.0);
    bump.width = bj.value("width", 1.0);
    bump.amplitude = bj.value("amplitude", 1.0);
    if (!(bump.width > 0.0)) throw ConfigError("potential.bump.width", "must be positive");
    return PotentialSpec::perturbed(std::move(base), bump, j.value("epsilon", 0.0));
  }
  throw ConfigError("potential.variant", "unknown variant '" + variant + "'");
}

inline nlohmann::json potential_to_json(const PotentialSpec& spec) {
  nlohmann::json j;
  switch (spec.variant) {
    case PotentialSpec::Variant::exponential:
      j["variant"] = "exponential";
      j["beta"] = spec.beta;
      break;
    case PotentialSpec::Variant::laplace_measure: {
      j["variant"] = "laplace_measure";
      auto arr = nlohmann::json::array();
      for (const auto& [s, w] : spec.atoms) arr.push_back({s, w});
      j["atoms"] = arr;
      break;
    }
    case PotentialSpec::Variant::quadratic:
      j["variant"] = "quadratic";
      break;
    case PotentialSpec::Variant::perturbed:
      j["variant"] = "perturbed";
      j["base"] = potential_to_json(*spec.base);
      j["bump"] = {{"center", spec.bump.center},
                   {"width", spec.bump.width},
                   {"amplitude", spec.bump.amplitude}};
      j["epsilon"] = spec.epsilon;
      break;
  }
  return j;
}

inline TRule t_rule_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("t_rule", "expected an object with a 'kind' field");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "characteristic") return TRule::characteristic();
  if (kind == "fixed") {
    if (!j.contains("t")) throw ConfigError("t_rule.t", "fixed rule needs 't'");
    const double t = j.at("t").get<double>();
    if (!(t >= 0.0)) throw ConfigError("t_rule.t", "must be nonnegative");
    return TRule::fixed(t);
  }
  if (kind == "offset") {
    if (!j.contains("multiple")) throw ConfigError("t_rule.multiple", "offset rule needs 'multiple'");
    return TRule::offset(j.at("multiple").get<double>());
  }
  throw ConfigError("t_rule.kind", "unknown kind '" + kind + "'");
}

}  // namespace detail

inline const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> kKnown{
      "variance_direct",   "variance_representation", "bad_lower_check",
      "generating_function", "exponent_fit",          "offchar_normality",
      "tail_bound_audit",  "lower_bound_probe",       "psi2_check",
      "check_potential"};
  return kKnown;
}

inline ResolvedConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config", "top level must be an object");
  ResolvedConfig rc;

  if (j.contains("experiments")) {
    if (j.at("experiments").is_string())
      rc.experiments.push_back(j.at("experiments").get<std::string>());
    else if (j.at("experiments").is_array())
      for (const auto& e : j.at("experiments")) rc.experiments.push_back(e.get<std::string>());
    else
      throw ConfigError("experiments", "expected a string or array of strings");
  }
  if (rc.experiments.empty()) throw ConfigError("experiments", "at least one experiment required");
  for (const auto& e : rc.experiments) {
    const auto& known = known_experiments();
    if (std::find(known.begin(), known.end(), e) == known.end())
      throw ConfigError("experiments", "unknown experiment '" + e + "'");
  }

  if (!j.contains("potential")) throw ConfigError("potential", "missing");
  rc.cfg.potential = detail::potential_from_json(j.at("potential"));

  rc.cfg.theta = j.value("theta", 1.0);
  if (!(rc.cfg.theta > 0.0)) throw ConfigError("theta", "must be positive");
  rc.cfg.eta = j.value("eta", 0.0);

  if (!j.contains("N_list") || !j.at("N_list").is_array() || j.at("N_list").empty())
    throw ConfigError("N_list", "expected a nonempty array of integers");
  for (const auto& n : j.at("N_list")) {
    const std::int64_t v = n.get<std::int64_t>();
    if (v < 1) throw ConfigError("N_list", "entries must be >= 1");
    rc.cfg.N_list.push_back(v);
  }

  rc.cfg.t_rule = j.contains("t_rule") ? detail::t_rule_from_json(j.at("t_rule"))
                                       : TRule::characteristic();

  rc.cfg.replicas = j.value("replicas", 1000);
  if (rc.cfg.replicas < 2) throw ConfigError("replicas", "must be >= 2");
  rc.cfg.base_seed = j.value("base_seed", std::uint64_t(20240801));
  try {
    rc.cfg.scheme = scheme_from_name(j.value("scheme", std::string("tamed_euler")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scheme", e.what());
  }

  if (j.contains("dt")) {
    rc.cfg.dt = j.at("dt").get<double>();
    if (!(rc.cfg.dt > 0.0)) throw ConfigError("dt", "must be positive");
  } else {
    rc.cfg.dt = suggested_dt(build_equilibrium(rc.cfg.potential, rc.cfg.theta));
  }
  rc.cfg.couple_dt_to_N = j.value("couple_dt_to_N", false);
  rc.cfg.threads = j.value("threads", 0);
  rc.cfg.explosion_bound = j.value("explosion_bound", 1e3);
  if (!(rc.cfg.explosion_bound > 0.0)) throw ConfigError("explosion_bound", "must be positive");
  rc.cfg.max_failure_fraction = j.value("max_failure_fraction", 0.01);
  rc.cfg.c2 = j.value("c2", 0.1);
  rc.cfg.C0 = j.value("C0", 1.0);
  rc.cfg.Y = j.value("Y", 1.0);
  rc.cfg.min_probability = j.value("min_probability", 0.05);
  if (j.contains("w_grid"))
    for (const auto& w : j.at("w_grid")) rc.cfg.w_grid.push_back(w.get<double>());
  if (rc.cfg.w_grid.empty()) rc.cfg.w_grid = {0.0, 0.5, 1.0, 2.0, 4.0};

  rc.allow_quadratic = j.value("allow_quadratic", rc.cfg.potential.is_quadratic() ? false : true);
  rc.dump_trajectory = j.value("dump_trajectory", false);
  rc.dump_format = j.value("dump_format", std::string("csv"));
  if (rc.dump_format != "csv" && rc.dump_format != "binary")
    throw ConfigError("dump_format", "must be 'csv' or 'binary'");

  // Materialize every default so the manifest carries the full picture.
  nlohmann::json r;
  r["experiments"] = rc.experiments;
  r["potential"] = detail::potential_to_json(rc.cfg.potential);
  r["theta"] = rc.cfg.theta;
  r["eta"] = rc.cfg.eta;
  r["N_list"] = rc.cfg.N_list;
  switch (rc.cfg.t_rule.kind) {
    case TRule::Kind::characteristic: r["t_rule"] = {{"kind", "characteristic"}}; break;
    case TRule::Kind::fixed: r["t_rule"] = {{"kind", "fixed"}, {"t", rc.cfg.t_rule.value}}; break;
    case TRule::Kind::offset:
      r["t_rule"] = {{"kind", "offset"}, {"multiple", rc.cfg.t_rule.value}};
      break;
  }
  r["replicas"] = rc.cfg.replicas;
  r["base_seed"] = rc.cfg.base_seed;
  r["scheme"] = scheme_name(rc.cfg.scheme);
  r["dt"] = rc.cfg.dt;
  r["couple_dt_to_N"] = rc.cfg.couple_dt_to_N;
  r["threads"] = rc.cfg.threads;
  r["explosion_bound"] = rc.cfg.explosion_bound;
  r["max_failure_fraction"] = rc.cfg.max_failure_fraction;
  r["c2"] = rc.cfg.c2;
  r["C0"] = rc.cfg.C0;
  r["Y"] = rc.cfg.Y;
  r["min_probability"] = rc.cfg.min_probability;
  r["w_grid"] = rc.cfg.w_grid;
  r["allow_quadratic"] = rc.allow_quadratic;
  r["dump_trajectory"] = rc.dump_trajectory;
  r["dump_format"] = rc.dump_format;
  rc.resolved = std::move(r);
  return rc;
}

inline ResolvedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("JSON parse failure: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace oy
