#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oy/config.hpp"
#include "oy/version.hpp"

namespace oy {

// Exit-code contract: crashes and findings are different things.
enum class RunStatus : int {
  ok = 0,
  schema_error = 2,
  explosion_abort = 3,
  property_violation = 4,
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::string started_at, finished_at;
  std::vector<std::string> outputs;
  int failures = 0;    // excluded replicas
  int violations = 0;  // property-violation findings
  nlohmann::json resolved_config;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_rows_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "experiment,N,t,estimate,stderr,bound,verdict\n";
  for (const auto& r : rows)
    out << r.experiment << ',' << r.N << ',' << fmt_double(r.t) << ',' << fmt_double(r.estimate)
        << ',' << fmt_double(r.stderr_) << ',' << fmt_double(r.bound) << ',' << r.verdict
        << '\n';
}

inline nlohmann::json row_to_json(const ReportRow& r) {
  nlohmann::json j{{"experiment", r.experiment}, {"N", r.N},           {"t", r.t},
                   {"estimate", r.estimate},     {"stderr", r.stderr_}, {"bound", r.bound},
                   {"verdict", r.verdict}};
  for (const auto& [k, v] : r.extra) j[k] = v;
  return j;
}

}  // namespace detail

// Runs the configured experiments and writes report.csv, report.json and
// manifest.json under out_dir. Identical config + seed reproduce the report
// files byte for byte; wall-clock timestamps live only in the manifest.
inline RunManifest run(const std::string& config_path, const std::string& out_dir,
                       int threads = 0, std::optional<std::uint64_t> seed_override = {}) {
  ResolvedConfig rc = load_config(config_path);
  if (threads > 0) rc.cfg.threads = threads;
  if (seed_override) {
    rc.cfg.base_seed = *seed_override;
    rc.resolved["base_seed"] = *seed_override;
  }

  // Audit gate: the quadratic exception must be requested explicitly.
  auto audit = audit_oy_type(rc.cfg.potential);
  if (!audit.pass) {
    if (!(rc.cfg.potential.is_quadratic() && rc.allow_quadratic))
      throw ConfigError("potential",
                        "audit failed (" + audit.reason + ") and allow_quadratic is not set");
  }

  RunManifest manifest;
  manifest.version = kVersion;
  manifest.seed = rc.cfg.base_seed;
  manifest.config_hash = detail::hex64(detail::fnv1a64(rc.resolved.dump()));
  manifest.started_at = detail::iso_now();
  manifest.resolved_config = rc.resolved;

  std::filesystem::create_directories(out_dir);
  std::vector<ReportRow> rows;
  for (const auto& name : rc.experiments) {
    if (name == "variance_direct") {
      auto r = variance_direct(rc.cfg);
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (name == "variance_representation") {
      for (const auto& v : variance_via_representation(rc.cfg)) {
        const char* names[3] = {"variance_direct", "variance_rep_form1", "variance_rep_form2"};
        const EstimateReport* reps[3] = {&v.direct, &v.form1, &v.form2};
        for (int i = 0; i < 3; ++i) {
          ReportRow row{names[i], v.N, v.t, reps[i]->estimate, reps[i]->stderr_, 0.0,
                        v.max_pairwise_z <= 4.0 ? "pass" : "violation", {}};
          row.extra["max_pairwise_z"] = v.max_pairwise_z;
          rows.push_back(std::move(row));
        }
      }
    } else if (name == "bad_lower_check") {
      auto r = bad_lower_check(rc.cfg);
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (name == "generating_function") {
      if (!(rc.cfg.eta > 0.0))
        throw ConfigError("eta", "generating_function requires a positive eta");
      auto r = generating_function_check(rc.cfg, rc.cfg.eta);
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (name == "exponent_fit") {
      auto fit = exponent_fit(rc.cfg);
      rows.insert(rows.end(), fit.per_N.begin(), fit.per_N.end());
      ReportRow row{"exponent_fit_slope", 0, 0.0, fit.slope,
                    0.5 * (fit.ci_hi - fit.ci_lo) / 1.959963984540054, 0.0, "info", {}};
      row.extra["ci_lo"] = fit.ci_lo;
      row.extra["ci_hi"] = fit.ci_hi;
      rows.push_back(std::move(row));
    } else if (name == "offchar_normality") {
      auto r = offchar_normality(rc.cfg);
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (name == "tail_bound_audit") {
      auto r = tail_bound_audit(rc.cfg, rc.cfg.w_grid);
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (name == "lower_bound_probe") {
      auto r = lower_bound_probe(rc.cfg);
      rows.insert(rows.end(), r.begin(), r.end());
    } else if (name == "psi2_check") {
      std::vector<double> grid;
      for (int i = 0; i < 64; ++i) grid.push_back(0.25 + (4.0 - 0.25) * i / 63.0);
      for (const auto& p : psi2_grid_check(rc.cfg.potential, grid)) {
        ReportRow row{"psi2_check", 0, 0.0, p.psi2, 0.0, 1e-8,
                      p.psi2 <= 1e-8 ? "pass" : "violation", {}};
        row.extra["theta"] = p.theta;
        rows.push_back(std::move(row));
      }
    } else if (name == "check_potential") {
      ReportRow row{"check_potential", 0, 0.0, audit.certified_c0, 0.0, 0.0,
                    audit.pass ? "pass" : "violation", {}};
      row.extra["c_lower"] = audit.c_lower;
      row.extra["c_upper"] = audit.c_upper;
      row.extra["C_ind"] = audit.C_ind;
      row.extra["growth_coeff"] = audit.growth_coeff;
      rows.push_back(std::move(row));
    }
  }

  for (const auto& r : rows) {
    manifest.violations += (r.verdict == "violation");
    const auto it = r.extra.find("failures");
    if (it != r.extra.end()) manifest.failures += int(it->second);
  }

  const std::string csv_path = out_dir + "/report.csv";
  const std::string json_path = out_dir + "/report.json";
  detail::write_rows_csv(csv_path, rows);
  {
    nlohmann::json doc;
    doc["rows"] = nlohmann::json::array();
    for (const auto& r : rows) doc["rows"].push_back(detail::row_to_json(r));
    doc["config"] = rc.resolved;
    std::ofstream out(json_path, std::ios::binary);
    out << doc.dump(2) << '\n';
  }
  manifest.outputs = {csv_path, json_path};
  manifest.finished_at = detail::iso_now();
  {
    nlohmann::json j{{"config_hash", manifest.config_hash},
                     {"seed", manifest.seed},
                     {"version", manifest.version},
                     {"started_at", manifest.started_at},
                     {"finished_at", manifest.finished_at},
                     {"outputs", manifest.outputs},
                     {"failures", manifest.failures},
                     {"violations", manifest.violations},
                     {"resolved_config", manifest.resolved_config}};
    std::ofstream out(out_dir + "/manifest.json", std::ios::binary);
    out << j.dump(2) << '\n';
  }
  return manifest;
}

inline RunStatus run_status(const RunManifest& m) {
  return m.violations > 0 ? RunStatus::property_violation : RunStatus::ok;
}

// Long-format trajectory dump, selected by CLI flag.
inline void dump_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << "site,time,u\n";
  for (std::int64_t m = 0; m <= traj.n_steps; ++m)
    for (int j = 0; j < traj.N; ++j)
      out << (j + 1) << ',' << detail::fmt_double(traj.time(m)) << ','
          << detail::fmt_double(traj.u_at(m, j)) << '\n';
}

inline void dump_trajectory_binary(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  const std::uint64_t magic = 0x4f59464c4f573031ull;  // "OYFLOW01"
  const std::uint64_t n = std::uint64_t(traj.N), steps = std::uint64_t(traj.n_steps);
  out.write(reinterpret_cast<const char*>(&magic), 8);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&steps), 8);
  out.write(reinterpret_cast<const char*>(&traj.dt), 8);
  out.write(reinterpret_cast<const char*>(traj.u.data()),
            std::streamsize(traj.u.size() * sizeof(double)));
}

}  // namespace oy
