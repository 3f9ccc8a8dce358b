// Command-line front end: config-driven runs plus thin subcommand bindings
// onto the library operations.

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>

#include "oy/oyflow.hpp"

namespace {

struct PotentialFlags {
  std::string variant = "exponential";
  double beta = 1.0;
  std::vector<double> atoms;  // flattened s,w pairs
  double epsilon = 0.0;
  double bump_center = 0.0, bump_width = 1.0, bump_amplitude = 1.0;

  void attach(CLI::App* app) {
    app->add_option("--variant", variant, "potential variant: exponential|laplace_measure|quadratic|perturbed");
    app->add_option("--beta", beta, "exponential rate");
    app->add_option("--atoms", atoms, "laplace atoms as s1,w1,s2,w2,...")->delimiter(',');
    app->add_option("--epsilon", epsilon, "perturbation size");
    app->add_option("--bump-center", bump_center);
    app->add_option("--bump-width", bump_width);
    app->add_option("--bump-amplitude", bump_amplitude);
  }

  oy::PotentialSpec build() const {
    if (variant == "exponential") return oy::PotentialSpec::exponential(beta);
    if (variant == "quadratic") return oy::PotentialSpec::quadratic();
    if (variant == "laplace_measure" || variant == "perturbed") {
      std::vector<std::pair<double, double>> pairs;
      if (atoms.size() % 2 != 0) throw oy::ConfigError("atoms", "need s,w pairs");
      for (std::size_t i = 0; i + 1 < atoms.size(); i += 2)
        pairs.emplace_back(atoms[i], atoms[i + 1]);
      auto base = pairs.empty() ? oy::PotentialSpec::exponential(beta)
                                : oy::PotentialSpec::laplace_measure(std::move(pairs));
      if (variant == "laplace_measure") return base;
      return oy::PotentialSpec::perturbed(std::move(base),
                                          {bump_center, bump_width, bump_amplitude}, epsilon);
    }
    throw oy::ConfigError("variant", "unknown potential variant '" + variant + "'");
  }
};

void print_rows(const std::vector<oy::ReportRow>& rows) {
  std::printf("%-22s %6s %12s %14s %12s %12s %s\n", "experiment", "N", "t", "estimate",
              "stderr", "bound", "verdict");
  for (const auto& r : rows)
    std::printf("%-22s %6lld %12.6g %14.8g %12.4g %12.6g %s\n", r.experiment.c_str(),
                static_cast<long long>(r.N), r.t, r.estimate, r.stderr_, r.bound,
                r.verdict.c_str());
}

int rows_status(const std::vector<oy::ReportRow>& rows) {
  for (const auto& r : rows)
    if (r.verdict == "violation") return int(oy::RunStatus::property_violation);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"equilibrium interacting-diffusion simulator and verifier"};
  app.require_subcommand(1);

  // ---- run <config> -------------------------------------------------------
  std::string config_path, out_dir = "out";
  int threads = 0;
  std::uint64_t seed_override = 0;
  bool have_seed_override = false;
  auto* cmd_run = app.add_subcommand("run", "execute experiments from a JSON config");
  cmd_run->add_option("config", config_path, "config file")->required();
  cmd_run->add_option("-o,--out", out_dir, "output directory");
  cmd_run->add_option("--threads", threads, "worker threads (default: OY_THREADS or cores)");
  cmd_run->add_option("--seed", seed_override, "override base_seed")
      ->each([&](const std::string&) { have_seed_override = true; });

  // ---- shared numeric flags ----------------------------------------------
  PotentialFlags pot;
  double theta = 1.0, dt = 0.0, t_end = -1.0, eta = 0.0;
  std::uint64_t seed = 20240801;
  int replicas = 1000;
  std::vector<std::int64_t> n_list{8};
  std::string scheme = "tamed_euler";
  std::string t_rule = "characteristic";
  double t_fixed = 0.0, t_offset = 0.0;

  const auto attach_common = [&](CLI::App* cmd, bool with_mc) {
    pot.attach(cmd);
    cmd->add_option("--theta", theta, "drive/equilibrium parameter");
    cmd->add_option("--dt", dt, "time step (0: suggested default)");
    cmd->add_option("--seed", seed, "base seed");
    cmd->add_option("--scheme", scheme, "tamed_euler|semi_implicit|exact_gaussian");
    cmd->add_option("--threads", threads, "worker threads");
    if (with_mc) {
      cmd->add_option("--N", n_list, "site counts")->delimiter(',');
      cmd->add_option("--replicas", replicas, "Monte Carlo replicas");
      cmd->add_option("--t-rule", t_rule, "characteristic|fixed|offset");
      cmd->add_option("--t", t_fixed, "fixed horizon (t-rule fixed)");
      cmd->add_option("--offset-multiple", t_offset, "offset rule multiple of N^{2/3}");
    }
  };

  const auto make_cfg = [&]() {
    oy::ExperimentConfig cfg;
    cfg.potential = pot.build();
    cfg.theta = theta;
    cfg.N_list = n_list;
    cfg.replicas = replicas;
    cfg.base_seed = seed;
    cfg.scheme = oy::scheme_from_name(scheme);
    cfg.threads = threads;
    if (t_rule == "characteristic") cfg.t_rule = oy::TRule::characteristic();
    else if (t_rule == "fixed") cfg.t_rule = oy::TRule::fixed(t_fixed);
    else if (t_rule == "offset") cfg.t_rule = oy::TRule::offset(t_offset);
    else throw oy::ConfigError("t-rule", "unknown rule '" + t_rule + "'");
    cfg.dt = dt > 0.0 ? dt : oy::suggested_dt(oy::build_equilibrium(cfg.potential, cfg.theta));
    return cfg;
  };

  // ---- check-potential ----------------------------------------------------
  double grid_lo = -30.0, grid_hi = 30.0;
  int grid_n = 4096;
  auto* cmd_check = app.add_subcommand("check-potential", "audit the potential class conditions");
  pot.attach(cmd_check);
  cmd_check->add_option("--grid-lo", grid_lo);
  cmd_check->add_option("--grid-hi", grid_hi);
  cmd_check->add_option("--grid-n", grid_n);

  // ---- simulate -----------------------------------------------------------
  std::string dump_path;
  bool dump_binary = false;
  int sim_n = 8;
  std::uint64_t sim_replica = 0;
  auto* cmd_sim = app.add_subcommand("simulate", "run one trajectory and optionally dump it");
  attach_common(cmd_sim, false);
  cmd_sim->add_option("--N", sim_n, "site count");
  cmd_sim->add_option("--t", t_end, "horizon")->required();
  cmd_sim->add_option("--replica", sim_replica, "replica index");
  cmd_sim->add_option("--dump", dump_path, "trajectory dump path");
  cmd_sim->add_flag("--binary", dump_binary, "dump in binary instead of CSV");

  // ---- variance -----------------------------------------------------------
  auto* cmd_var = app.add_subcommand("variance", "direct and representation variance estimates");
  attach_common(cmd_var, true);

  // ---- gf-check -----------------------------------------------------------
  auto* cmd_gf = app.add_subcommand("gf-check", "exponential-moment identity check");
  attach_common(cmd_gf, true);
  cmd_gf->add_option("--eta", eta, "initial-data parameter")->required();

  // ---- exponent -----------------------------------------------------------
  auto* cmd_exp = app.add_subcommand("exponent", "log-log variance slope across N");
  attach_common(cmd_exp, true);

  // ---- psg ----------------------------------------------------------------
  std::string query = "total-mass";
  double query_t0 = 0.0;
  bool with_oracle = false;
  auto* cmd_psg = app.add_subcommand("psg", "pseudo-Gibbs functional on a frozen path");
  attach_common(cmd_psg, false);
  int psg_n = 2;
  cmd_psg->add_option("--N", psg_n, "site count (oracle needs <= 3)");
  cmd_psg->add_option("--t", t_end, "horizon (default 0.5)");
  cmd_psg->add_option("--query", query, "total-mass|first-jump-mean|tail|positive-part");
  cmd_psg->add_option("--t0", query_t0, "threshold for tail/positive-part");
  cmd_psg->add_option("--replica", sim_replica, "replica index");
  cmd_psg->add_flag("--oracle", with_oracle, "also evaluate the nested-quadrature oracle");

  // ---- tails --------------------------------------------------------------
  std::vector<double> w_grid{0.0, 0.5, 1.0, 2.0, 4.0};
  double c0_const = 1.0;
  auto* cmd_tails = app.add_subcommand("tails", "first-jump upper-tail audit");
  attach_common(cmd_tails, true);
  cmd_tails->add_option("--w", w_grid, "offsets in units of N^{2/3}")->delimiter(',');
  cmd_tails->add_option("--C0", c0_const, "quartic bound constant");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_run) {
      auto manifest = oy::run(config_path, out_dir, threads,
                              have_seed_override ? std::optional<std::uint64_t>(seed_override)
                                                 : std::nullopt);
      std::printf("wrote %s (%d findings, %d excluded replicas)\n",
                  (out_dir + "/manifest.json").c_str(), manifest.violations, manifest.failures);
      return int(oy::run_status(manifest));
    }
    if (*cmd_check) {
      auto audit = oy::audit_oy_type(pot.build(), grid_lo, grid_hi, grid_n);
      std::printf("pass=%s c0=%.12g c_lower=%.12g c_upper=%.12g C=%.6g growth=%.6g%s%s\n",
                  audit.pass ? "true" : "false", audit.certified_c0, audit.c_lower,
                  audit.c_upper, audit.C_ind, audit.growth_coeff,
                  audit.reason.empty() ? "" : " reason=", audit.reason.c_str());
      return audit.pass ? 0 : int(oy::RunStatus::property_violation);
    }
    if (*cmd_sim) {
      auto spec = pot.build();
      auto m = oy::build_equilibrium(spec, theta);
      const double use_dt = dt > 0.0 ? dt : oy::suggested_dt(m);
      oy::NoiseBlock noise(seed, std::uint32_t(sim_replica), use_dt,
                           llround(t_end / use_dt) + 1, sim_n + 1);
      auto traj = oy::simulate(spec, m, oy::Drive{theta}, sim_n, t_end, noise,
                               oy::scheme_from_name(scheme));
      auto h = oy::height(traj, traj.time(traj.n_steps));
      std::printf("W=%.12g sum_u=%.12g B0=%.12g drift=%.12g steps=%" PRId64 "\n", h.W, h.sum_u,
                  h.b0, h.drift_integral, traj.n_steps);
      if (!dump_path.empty()) {
        if (dump_binary) oy::dump_trajectory_binary(traj, dump_path);
        else oy::dump_trajectory_csv(traj, dump_path);
        std::printf("dumped %s\n", dump_path.c_str());
      }
      return 0;
    }
    if (*cmd_var) {
      auto cfg = make_cfg();
      std::vector<oy::ReportRow> rows;
      for (const auto& v : oy::variance_via_representation(cfg)) {
        rows.push_back({"variance_direct", v.N, v.t, v.direct.estimate, v.direct.stderr_, 0.0,
                        v.max_pairwise_z <= 4.0 ? "pass" : "violation", {}});
        rows.push_back({"variance_rep_form1", v.N, v.t, v.form1.estimate, v.form1.stderr_, 0.0,
                        "info", {}});
        rows.push_back({"variance_rep_form2", v.N, v.t, v.form2.estimate, v.form2.stderr_, 0.0,
                        "info", {}});
      }
      print_rows(rows);
      return rows_status(rows);
    }
    if (*cmd_gf) {
      auto rows = oy::generating_function_check(make_cfg(), eta);
      print_rows(rows);
      return rows_status(rows);
    }
    if (*cmd_exp) {
      auto cfg = make_cfg();
      cfg.couple_dt_to_N = true;
      auto fit = oy::exponent_fit(cfg);
      print_rows(fit.per_N);
      std::printf("slope=%.4f ci=[%.4f, %.4f]\n", fit.slope, fit.ci_lo, fit.ci_hi);
      return 0;
    }
    if (*cmd_psg) {
      auto spec = pot.build();
      auto m = oy::build_equilibrium(spec, theta);
      const double use_dt = dt > 0.0 ? dt : 1e-6;
      const double horizon = t_end > 0.0 ? t_end : 0.5;
      oy::NoiseBlock noise(seed, std::uint32_t(sim_replica), use_dt,
                           llround(horizon / use_dt) + 1, psg_n + 1);
      auto traj = oy::simulate(spec, m, oy::Drive{theta}, psg_n, horizon, noise,
                               oy::scheme_from_name(scheme));
      oy::PsgQuery q = oy::PsgQuery::total_mass();
      if (query == "first-jump-mean") q = oy::PsgQuery::integral_of(oy::Forcing::ones());
      else if (query == "tail") q = oy::PsgQuery::tail_indicator(query_t0);
      else if (query == "positive-part") q = oy::PsgQuery::positive_part(query_t0);
      else if (query != "total-mass") throw oy::ConfigError("query", "unknown query " + query);
      const auto ode = oy::evaluate_ode(traj, q);
      std::printf("ode=%.12g", ode.value);
      if (with_oracle) {
        const auto quad = oy::evaluate_quadrature(traj, q);
        std::printf(" quadrature=%.12g diff=%.3e", quad.value, std::fabs(quad.value - ode.value));
      }
      std::printf("\n");
      return 0;
    }
    if (*cmd_tails) {
      auto cfg = make_cfg();
      cfg.C0 = c0_const;
      auto rows = oy::tail_bound_audit(cfg, w_grid);
      print_rows(rows);
      return rows_status(rows);
    }
  } catch (const oy::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return int(oy::RunStatus::schema_error);
  } catch (const oy::ExplosionError& e) {
    std::fprintf(stderr, "aborted: %s\n", e.what());
    return int(oy::RunStatus::explosion_abort);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return int(oy::RunStatus::schema_error);
  }
  return 0;
}
