#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oy/parallel.hpp"
#include "oy/pseudo_gibbs.hpp"
#include "oy/sensitivity.hpp"
#include "oy/stats.hpp"

namespace oy {

struct TRule {
  enum class Kind { characteristic, fixed, offset };
  Kind kind = Kind::characteristic;
  double value = 0.0;  // fixed t, or the offset multiple of N^{2/3}

  static TRule characteristic() { return {}; }
  static TRule fixed(double t) { return {Kind::fixed, t}; }
  static TRule offset(double multiple) { return {Kind::offset, multiple}; }
};

struct ExperimentConfig {
  PotentialSpec potential = PotentialSpec::exponential(1.0);
  double theta = 1.0;
  std::vector<std::int64_t> N_list{8};
  TRule t_rule;
  int replicas = 1000;
  std::uint64_t base_seed = 20240801;
  Scheme scheme = Scheme::tamed_euler;
  double dt = 1e-2;
  bool couple_dt_to_N = false;  // dt(N) = dt (N_min/N)^{1/3}
  int threads = 0;
  double explosion_bound = 1e3;
  double max_failure_fraction = 0.01;

  double eta = 0.0;            // generating-function counter-parameter
  double c2 = 0.1;             // lower-bound deviation coefficient
  double C0 = 1.0;             // tail-audit quartic constant
  double Y = 1.0;              // positive-part multiple of N^{2/3}
  std::vector<double> w_grid;  // tail-audit offsets, in units of N^{2/3}
  double min_probability = 0.05;

  void validate() const {
    if (replicas < 2) throw std::invalid_argument("replicas >= 2 required");
    if (N_list.empty()) throw std::invalid_argument("N_list must be nonempty");
    for (auto n : N_list)
      if (n < 1) throw std::invalid_argument("N values must be positive");
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  }

  double dt_for(std::int64_t N) const {
    if (!couple_dt_to_N) return dt;
    std::int64_t n_min = N_list.front();
    for (auto n : N_list) n_min = std::min(n_min, n);
    return dt * std::cbrt(double(n_min) / double(N));
  }
};

struct ReportRow {
  std::string experiment;
  std::int64_t N = 0;
  double t = 0.0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double bound = 0.0;
  std::string verdict;  // "pass" | "violation" | "info"
  std::map<std::string, double> extra;
};

namespace detail {

inline double resolve_t(const TRule& rule, std::int64_t N, double psi1) {
  switch (rule.kind) {
    case TRule::Kind::characteristic: return double(N) * psi1;
    case TRule::Kind::fixed: return rule.value;
    case TRule::Kind::offset:
      return double(N) * psi1 + rule.value * std::pow(double(N), 2.0 / 3.0);
  }
  return 0.0;
}

struct EnsembleResult {
  std::vector<double> W;
  std::vector<double> dW_dtheta, dW_deta;  // filled when tangents requested
  int failures = 0;
  double t = 0.0;
  double dt = 0.0;
  std::int64_t n_steps = 0;
};

// Streaming first-order tangent lanes sharing the tangent-module kernels.
struct StreamingTangents {
  std::vector<double> S, K;
  tangent::StepCoeffs coeffs;

  void init(const std::vector<double>& k0) {
    const int N = int(k0.size());
    S.assign(N, 0.0);
    K.resize(N);
    double acc = 0.0;
    for (int j = 0; j < N; ++j) K[j] = (acc += k0[j]);
  }
  void step(const PotentialSpec& spec, const double* u, int N, double bt, double t_now) {
    coeffs.compute(spec, u, N, bt, t_now);
    tangent::step_partials(coeffs, t_now, bt - coeffs.w[0], S);
    tangent::step_partials(coeffs, 0.0, 0.0, K);
  }
};

// Seeded replica ensemble of W_{N,t}(theta, theta) in the stationary
// coupling, with optional pathwise first-derivative partial sums.
inline EnsembleResult run_height_ensemble(const ExperimentConfig& cfg,
                                          const EquilibriumMeasure& measure, std::int64_t N,
                                          double t_target, bool tangents,
                                          std::uint64_t seed_offset = 0) {
  EnsembleResult res;
  res.dt = cfg.dt_for(N);
  res.n_steps = llround(t_target / res.dt);
  const int R = cfg.replicas;
  res.W.assign(R, std::numeric_limits<double>::quiet_NaN());
  if (tangents) {
    res.dW_dtheta.assign(R, std::numeric_limits<double>::quiet_NaN());
    res.dW_deta.assign(R, std::numeric_limits<double>::quiet_NaN());
  }
  std::vector<char> failed(R, 0);

  parallel_for(R, cfg.threads, [&](int r) {
    try {
      NoiseBlock noise(cfg.base_seed + seed_offset, std::uint32_t(r), res.dt, res.n_steps + 1,
                       int(N) + 1);
      std::vector<double> q;
      auto u0 = equilibrium_initial_state(measure, noise, int(N), &q);
      StreamingTangents tan;
      if (tangents) tan.init(eta_tangent_initial(measure, q));
      PathSimulator sim(cfg.potential, Drive{cfg.theta}, int(N), noise, cfg.scheme,
                        std::move(u0), cfg.explosion_bound);
      for (std::int64_t m = 0; m < res.n_steps; ++m) {
        if (tangents)
          tan.step(cfg.potential, sim.state().data(), int(N), res.dt, sim.time());
        sim.step();
      }
      res.W[std::size_t(r)] = sim.height();
      if (tangents) {
        res.dW_dtheta[std::size_t(r)] = tan.S[std::size_t(N - 1)];
        res.dW_deta[std::size_t(r)] = tan.K[std::size_t(N - 1)];
      }
    } catch (const ExplosionError&) {
      failed[std::size_t(r)] = 1;
    }
  });

  // Deterministic compaction in replica order.
  const auto compact = [&](std::vector<double>& v) {
    if (v.empty()) return;
    std::vector<double> keep;
    keep.reserve(v.size());
    for (int r = 0; r < R; ++r)
      if (!failed[std::size_t(r)]) keep.push_back(v[std::size_t(r)]);
    v = std::move(keep);
  };
  for (int r = 0; r < R; ++r) res.failures += failed[std::size_t(r)];
  compact(res.W);
  compact(res.dW_dtheta);
  compact(res.dW_deta);
  res.t = double(res.n_steps) * res.dt;
  if (res.failures > cfg.max_failure_fraction * R)
    throw ExplosionError("replica failure rate exceeded the abort threshold", 0, t_target,
                         double(res.failures));
  return res;
}

}  // namespace detail

// Sample variance of W with jackknife error bars, one row per N.
inline std::vector<ReportRow> variance_direct(const ExperimentConfig& cfg) {
  cfg.validate();
  auto measure = build_equilibrium(cfg.potential, cfg.theta);
  std::vector<ReportRow> rows;
  for (auto N : cfg.N_list) {
    const double t = detail::resolve_t(cfg.t_rule, N, measure.psi(1));
    auto ens = detail::run_height_ensemble(cfg, measure, N, t, false);
    auto rep = EstimateReport::of_variance(ens.W);
    ReportRow row{"variance_direct", N, ens.t, rep.estimate, rep.stderr_, 0.0, "info", {}};
    row.extra["mean_W"] = rep.raw_mean;
    row.extra["failures"] = ens.failures;
    row.extra["dt"] = ens.dt;
    rows.push_back(std::move(row));
  }
  return rows;
}

// Both tangent-based variance representations next to the direct estimator:
//   Var = N psi1 - t + 2 E[dW/dtheta] = t - N psi1 - 2 E[dW/deta].
struct VarianceRepresentationRow {
  std::int64_t N = 0;
  double t = 0.0;
  EstimateReport direct, form1, form2;
  double max_pairwise_z = 0.0;
};

inline std::vector<VarianceRepresentationRow> variance_via_representation(
    const ExperimentConfig& cfg) {
  cfg.validate();
  auto measure = build_equilibrium(cfg.potential, cfg.theta);
  std::vector<VarianceRepresentationRow> rows;
  for (auto N : cfg.N_list) {
    const double t_target = detail::resolve_t(cfg.t_rule, N, measure.psi(1));
    auto ens = detail::run_height_ensemble(cfg, measure, N, t_target, true);
    VarianceRepresentationRow row;
    row.N = N;
    row.t = ens.t;
    row.direct = EstimateReport::of_variance(ens.W);
    const double npsi1 = double(N) * measure.psi(1);

    auto mean_dth = EstimateReport::of_mean(ens.dW_dtheta);
    row.form1 = mean_dth;
    row.form1.estimate = npsi1 - ens.t + 2.0 * mean_dth.estimate;
    row.form1.stderr_ = 2.0 * mean_dth.stderr_;

    auto mean_det = EstimateReport::of_mean(ens.dW_deta);
    row.form2 = mean_det;
    row.form2.estimate = ens.t - npsi1 - 2.0 * mean_det.estimate;
    row.form2.stderr_ = 2.0 * mean_det.stderr_;

    const auto z = [](const EstimateReport& x, const EstimateReport& y) {
      return std::fabs(x.estimate - y.estimate) /
             std::sqrt(x.stderr_ * x.stderr_ + y.stderr_ * y.stderr_);
    };
    row.max_pairwise_z = std::max({z(row.direct, row.form1), z(row.direct, row.form2),
                                   z(row.form1, row.form2)});
    rows.push_back(std::move(row));
  }
  return rows;
}

// Var >= |N psi1 - t| audit: the estimate may not undershoot by more than 4
// standard errors.
inline std::vector<ReportRow> bad_lower_check(const ExperimentConfig& cfg) {
  cfg.validate();
  auto rows = variance_direct(cfg);
  auto measure = build_equilibrium(cfg.potential, cfg.theta);
  for (auto& row : rows) {
    row.experiment = "bad_lower_check";
    row.bound = std::fabs(double(row.N) * measure.psi(1) - row.t);
    row.verdict = row.estimate >= row.bound - 4.0 * row.stderr_ ? "pass" : "violation";
  }
  return rows;
}

// Exponential-moment identity E[e^{(eta-theta) W(eta,theta)}] = e^{phi(theta)-phi(eta)}
// with phi(theta) = N psi_{-1}(theta) - theta^2 t / 2.
inline std::vector<ReportRow> generating_function_check(const ExperimentConfig& cfg, double eta) {
  cfg.validate();
  if (!(eta > 0.0)) throw std::invalid_argument("gf check: eta must be positive");
  auto m_theta = build_equilibrium(cfg.potential, cfg.theta);
  auto m_eta = build_equilibrium(cfg.potential, eta);
  const double lam = eta - cfg.theta;
  std::vector<ReportRow> rows;
  for (auto N : cfg.N_list) {
    const double t_target = detail::resolve_t(cfg.t_rule, N, m_theta.psi(1));
    const double dtN = cfg.dt_for(N);
    const std::int64_t steps = llround(t_target / dtN);
    const double t = double(steps) * dtN;

    std::vector<double> expw(cfg.replicas), w(cfg.replicas);
    parallel_for(cfg.replicas, cfg.threads, [&](int r) {
      NoiseBlock noise(cfg.base_seed, std::uint32_t(r), dtN, steps + 1, int(N) + 1);
      auto u0 = equilibrium_initial_state(m_eta, noise, int(N));
      PathSimulator sim(cfg.potential, Drive{cfg.theta}, int(N), noise, cfg.scheme,
                        std::move(u0), cfg.explosion_bound);
      sim.advance(steps);
      w[std::size_t(r)] = sim.height();
      expw[std::size_t(r)] = std::exp(lam * w[std::size_t(r)]);
    });

    const double var_w = sample_variance(w);
    if (std::fabs(lam) * std::sqrt(var_w) > 1.0)
      throw std::invalid_argument(
          "gf check refused: |eta - theta| sqrt(Var W) > 1; shrink |eta - theta|");
    auto rep = EstimateReport::of_mean(expw);
    if (!std::isfinite(rep.estimate) || !std::isfinite(rep.stderr_) ||
        rep.stderr_ > 0.5 * std::fabs(rep.estimate))
      throw std::invalid_argument("gf check refused: exponential-moment estimator variance too "
                                  "large; shrink |eta - theta|");
    const double rhs =
        std::exp(double(N) * (m_theta.psi(-1) - m_eta.psi(-1)) -
                 0.5 * (cfg.theta * cfg.theta - eta * eta) * t);
    ReportRow row{"generating_function", N, t, rep.estimate, rep.stderr_, rhs, "", {}};
    const double diff = std::fabs(rep.estimate - rhs);
    const double z = diff == 0.0 ? 0.0 : diff / rep.stderr_;
    row.verdict = z <= 4.0 ? "pass" : "violation";
    row.extra["z"] = z;
    row.extra["eta"] = eta;
    rows.push_back(std::move(row));
  }
  return rows;
}

struct ExponentFit {
  std::vector<ReportRow> per_N;
  double slope = 0.0, ci_lo = 0.0, ci_hi = 0.0;
};

// Log-log slope of Var(W) against N. The characteristic-direction fit
// requires psi2 < 0 (KPZ regime); the quadratic potential runs as the
// Gaussian control with its exactly-vanishing psi2.
inline ExponentFit exponent_fit(const ExperimentConfig& cfg) {
  cfg.validate();
  auto measure = build_equilibrium(cfg.potential, cfg.theta);
  if (!cfg.potential.is_quadratic() && !(measure.psi(2) < 0.0))
    throw std::invalid_argument("exponent fit requires psi2(theta) < 0");
  std::int64_t n_min = cfg.N_list.front(), n_max = cfg.N_list.front();
  for (auto n : cfg.N_list) {
    n_min = std::min(n_min, n);
    n_max = std::max(n_max, n);
  }
  if (double(n_max) / double(n_min) < 16.0)
    throw std::invalid_argument("exponent fit needs N_list spanning a factor >= 16");

  ExponentFit fit;
  std::vector<double> x, y, w;
  for (auto N : cfg.N_list) {
    const double t = detail::resolve_t(cfg.t_rule, N, measure.psi(1));
    auto ens = detail::run_height_ensemble(cfg, measure, N, t, false);
    auto rep = EstimateReport::of_variance(ens.W);
    ReportRow row{"exponent_fit", N, ens.t, rep.estimate, rep.stderr_, 0.0, "info", {}};
    row.extra["dt"] = ens.dt;
    fit.per_N.push_back(std::move(row));
    x.push_back(std::log(double(N)));
    y.push_back(std::log(rep.estimate));
    const double se_log = rep.stderr_ / rep.estimate;
    w.push_back(1.0 / (se_log * se_log));
  }
  auto wls = weighted_least_squares(x, y, w);
  fit.slope = wls.slope;
  fit.ci_lo = wls.ci_lo;
  fit.ci_hi = wls.ci_hi;
  return fit;
}

// Off-characteristic Gaussianity: standardize by |t - N psi1|^{1/2} and run
// the Anderson-Darling test at significance 1e-3.
inline std::vector<ReportRow> offchar_normality(const ExperimentConfig& cfg) {
  cfg.validate();
  auto measure = build_equilibrium(cfg.potential, cfg.theta);
  std::vector<ReportRow> rows;
  for (auto N : cfg.N_list) {
    const double t = detail::resolve_t(cfg.t_rule, N, measure.psi(1));
    const double gap = std::fabs(t - double(N) * measure.psi(1));
    if (gap < 10.0 * std::pow(double(N), 2.0 / 3.0))
      throw std::invalid_argument("offchar_normality refused: |t - N psi1| < 10 N^{2/3}");
    auto ens = detail::run_height_ensemble(cfg, measure, N, t, false);
    const double mean = mean_of(ens.W);
    const double scale = std::sqrt(std::fabs(ens.t - double(N) * measure.psi(1)));
    std::vector<double> z(ens.W.size());
    for (std::size_t i = 0; i < ens.W.size(); ++i) z[i] = (ens.W[i] - mean) / scale;
    auto ad = anderson_darling_normal(z);
    ReportRow row{"offchar_normality", N, ens.t, ad.a2, 0.0, 6.0, "", {}};
    row.verdict = ad.p_value >= 1e-3 ? "pass" : "violation";
    row.extra["p_value"] = ad.p_value;
    rows.push_back(std::move(row));
  }
  return rows;
}

// Upper tail of the first jump time under the annealed measure against the
// cubic-exponent bound shape.
inline std::vector<ReportRow> tail_bound_audit(const ExperimentConfig& cfg,
                                               const std::vector<double>& w_grid) {
  cfg.validate();
  auto measure = build_equilibrium(cfg.potential, cfg.theta);
  if (!(measure.psi(2) < 0.0))
    throw std::invalid_argument("tail audit requires psi2(theta) < 0");
  std::vector<ReportRow> rows;
  for (auto N : cfg.N_list) {
    const double n23 = std::pow(double(N), 2.0 / 3.0);
    const double t_target = detail::resolve_t(cfg.t_rule, N, measure.psi(1));
    const double dtN = cfg.dt_for(N);
    const std::int64_t steps = llround(t_target / dtN);
    const double t = double(steps) * dtN;
    const double e0 = t - double(N) * measure.psi(1);

    std::vector<std::vector<double>> vals(w_grid.size(),
                                          std::vector<double>(cfg.replicas, 0.0));
    parallel_for(cfg.replicas, cfg.threads, [&](int r) {
      NoiseBlock noise(cfg.base_seed, std::uint32_t(r), dtN, steps + 1, int(N) + 1);
      auto traj = simulate(cfg.potential, measure, Drive{cfg.theta}, int(N), t, noise,
                           cfg.scheme, cfg.explosion_bound);
      for (std::size_t k = 0; k < w_grid.size(); ++k) {
        const double threshold = e0 + w_grid[k] * n23;
        vals[k][std::size_t(r)] =
            threshold >= t ? 0.0
                           : evaluate_ode(traj, PsgQuery::tail_indicator(std::max(0.0, threshold)))
                                 .value;
      }
    });

    double prev_mean = 2.0, prev_se = 0.0;
    for (std::size_t k = 0; k < w_grid.size(); ++k) {
      const double wv = w_grid[k] * n23;
      auto rep = EstimateReport::of_mean(vals[k]);
      const double psi2 = measure.psi(2);
      const double log_bound = -std::pow(wv, 3) / (16.0 * double(N) * double(N) * psi2 * psi2) +
                               cfg.C0 * std::pow(wv, 4) / std::pow(double(N), 3);
      const double bound = std::exp(std::min(log_bound, 0.0));
      ReportRow row{"tail_bound_audit", N, t, rep.estimate, rep.stderr_, bound, "", {}};
      const bool respects = rep.estimate - 4.0 * rep.stderr_ <= bound;
      const bool monotone = rep.estimate <= prev_mean + 2.0 * (rep.stderr_ + prev_se);
      row.verdict = respects && monotone ? "pass" : "violation";
      row.extra["w"] = wv;
      row.extra["e"] = e0;
      rows.push_back(std::move(row));
      prev_mean = rep.estimate;
      prev_se = rep.stderr_;
    }
  }
  return rows;
}

// Desk-scale corroboration of the N^{1/3} deviation probability staying
// bounded away from zero along the characteristic direction.
inline std::vector<ReportRow> lower_bound_probe(const ExperimentConfig& cfg) {
  cfg.validate();
  auto measure = build_equilibrium(cfg.potential, cfg.theta);
  std::vector<ReportRow> rows;
  for (auto N : cfg.N_list) {
    const double t = double(N) * measure.psi(1);
    auto ens = detail::run_height_ensemble(cfg, measure, N, t, false);
    const double mean = mean_of(ens.W);
    const double dev = cfg.c2 * std::cbrt(double(N));
    double hits = 0.0;
    for (double wv : ens.W) hits += (wv - mean >= dev) ? 1.0 : 0.0;
    const double p = hits / double(ens.W.size());
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / double(ens.W.size()));
    ReportRow row{"lower_bound_probe", N, ens.t, p, se, cfg.min_probability, "", {}};
    row.verdict = p >= cfg.min_probability ? "pass" : "violation";
    row.extra["c2"] = cfg.c2;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace oy
