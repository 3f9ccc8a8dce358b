#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oy/pseudo_gibbs.hpp"

using namespace oy;
using Catch::Matchers::WithinAbs;

namespace {
const PotentialSpec kExp1 = PotentialSpec::exponential(1.0);
const PotentialSpec kQuad = PotentialSpec::quadratic();
const PotentialSpec kTwoAtom = PotentialSpec::laplace_measure({{1.0, 1.0}, {2.0, 0.5}});

Trajectory frozen_path(const PotentialSpec& spec, int N, double t_end, double dt,
                       std::uint32_t rep, Scheme scheme = Scheme::tamed_euler) {
  auto m = build_equilibrium(spec, 1.0);
  NoiseBlock noise(70707, rep, dt, llround(t_end / dt) + 1, N + 1);
  return simulate(spec, m, Drive{1.0}, N, t_end, noise, scheme);
}
}  // namespace

TEST_CASE("single site, constant V'': total mass is 1 - e^{-t}") {
  auto traj = frozen_path(kQuad, 1, 1.0, 1e-3, 0, Scheme::exact_gaussian);
  auto ev = evaluate_ode(traj, PsgQuery::total_mass());
  CHECK_THAT(ev.value, WithinAbs(1.0 - std::exp(-1.0), 1e-12));
  // quadrature oracle on the same frozen path
  auto eq = evaluate_quadrature(traj, PsgQuery::total_mass());
  CHECK_THAT(eq.value, WithinAbs(ev.value, 1e-9));
}

TEST_CASE("single site, constant V'': E[s0] = t - 1 + e^{-t}") {
  auto traj = frozen_path(kQuad, 1, 1.0, 1e-3, 1, Scheme::exact_gaussian);
  auto ev = evaluate_ode(traj, PsgQuery::integral_of(Forcing::ones()));
  CHECK_THAT(ev.value, WithinAbs(1.0 - 1.0 + std::exp(-1.0) - 0.0 - (1.0 - 1.0), 1e-12));
  CHECK_THAT(ev.value, WithinAbs(0.36787944117144233, 1e-12));
}

TEST_CASE("tail at the horizon is empty; zero query is zero") {
  auto traj = frozen_path(kExp1, 2, 1.0, 1e-3, 2);
  CHECK(evaluate_ode(traj, PsgQuery::tail_indicator(1.0)).value == 0.0);
  CHECK(evaluate_ode(traj, PsgQuery::integral_of(Forcing{})).value == 0.0);
  CHECK(evaluate_quadrature(traj, PsgQuery::integral_of(Forcing{})).value == 0.0);
}

TEST_CASE("two sites, constant V'': mass matches the cascade closed form") {
  // 1 - e^{-t} - t e^{-t} at t = 1; the scheme is first order in the cascade,
  // so assert at dt = 1e-5 with a 2e-5 window and check dt-halving improves.
  auto t1 = frozen_path(kQuad, 2, 1.0, 1e-5, 3, Scheme::exact_gaussian);
  const double closed = 1.0 - std::exp(-1.0) - std::exp(-1.0);
  const double v1 = evaluate_ode(t1, PsgQuery::total_mass()).value;
  CHECK_THAT(v1, WithinAbs(closed, 2e-5));
  CHECK_THAT(v1, WithinAbs(0.26424111765711533, 2e-5));

  auto t2 = frozen_path(kQuad, 2, 1.0, 2e-5, 3, Scheme::exact_gaussian);
  const double v2 = evaluate_ode(t2, PsgQuery::total_mass()).value;
  CHECK(std::fabs(v1 - closed) < 0.7 * std::fabs(v2 - closed));
}

TEST_CASE("ODE and nested quadrature agree and tighten as dt halves") {
  for (const auto& spec : {kExp1, kTwoAtom}) {
    for (int N : {1, 2, 3}) {
      double prev = -1.0;
      for (double dt : {4e-4, 1e-4}) {  // 4x apart: expect ~4x tighter agreement
        double worst = 0.0;
        for (std::uint32_t rep = 0; rep < 3; ++rep) {
          auto traj = frozen_path(spec, N, 0.5, dt, 100 + rep);
          for (const auto& q : {PsgQuery::total_mass(), PsgQuery::integral_of(Forcing::ones()),
                                PsgQuery::tail_indicator(0.25)}) {
            const double vo = evaluate_ode(traj, q).value;
            const double vq = evaluate_quadrature(traj, q).value;
            worst = std::max(worst, std::fabs(vo - vq));
          }
        }
        CHECK(worst < 2e-3 * dt / 1e-4);
        if (prev > 0.0) CHECK(worst < 0.45 * prev);
        prev = worst;
      }
    }
  }
}

TEST_CASE("total mass stays in [0, 1 + 1e-9] on every path") {
  for (const auto& spec : {kExp1, kTwoAtom, kQuad}) {
    for (std::uint32_t rep = 0; rep < 8; ++rep) {
      auto traj = frozen_path(spec, 5, 2.0, 1e-2, 300 + rep,
                              spec.is_quadratic() ? Scheme::exact_gaussian : Scheme::tamed_euler);
      const double mass = evaluate_ode(traj, PsgQuery::total_mass()).value;
      CHECK(mass >= 0.0);
      CHECK(mass <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("smoothed indicators converge to the impulse like 1/n") {
  auto traj = frozen_path(kExp1, 2, 1.0, 1e-4, 17);
  const double t0 = 0.3;
  const double exact = evaluate_ode(traj, PsgQuery::tail_indicator(t0)).value;
  double prev_err = -1.0;
  for (int n : {10, 100, 1000}) {
    // f_n = n on [t0, t0 + 1/n): the smoothed approximation of the jump.
    Forcing f;
    const std::int64_t from = llround(t0 / traj.dt);
    const std::int64_t width = std::max<std::int64_t>(1, llround(1.0 / (n * traj.dt)));
    f.boxes.push_back({from, from + width, double(n)});
    const double v = evaluate_ode(traj, PsgQuery::integral_of(f)).value;
    const double err = std::fabs(v - exact);
    if (prev_err > 0.0) CHECK(err < 0.35 * prev_err);  // ~O(1/n)
    prev_err = err;
  }
}

TEST_CASE("pseudo-Gibbs monotonicity on coupled paths") {
  auto audit = audit_oy_type(kExp1);
  const double c0 = audit.certified_c0, a = 0.5 * c0;
  const int N = 4;
  const double t_end = 1.5, dt = 1e-3;
  for (double delta : {1e-2, 1e-1}) {
    for (std::uint32_t rep = 0; rep < 4; ++rep) {
      NoiseBlock noise(91199, rep, dt, llround(t_end / dt) + 1, N + 1);
      std::vector<double> q(N);
      for (int j = 0; j < N; ++j) q[j] = noise.uniform(j);
      auto fam = coupled_family(kExp1, q, noise,
                                {{1.0, Drive{1.0}},
                                 {1.0, Drive{1.0 + delta}},
                                 {1.0 + delta, Drive{1.0}}},
                                N, t_end, Scheme::tamed_euler);
      const auto query = PsgQuery::tail_indicator(0.5);
      const double base = evaluate_ode(fam[0], query).value;
      const double drive_up = evaluate_ode(fam[1], query).value;
      CHECK(drive_up >= base - 1e-9);

      // eta direction carries the e^{a W} weight.
      const double w0 = height(fam[0], t_end).W;
      const double w1 = height(fam[2], t_end).W;
      const double eta_up = evaluate_ode(fam[2], query).value;
      CHECK(std::exp(a * w1) * eta_up >= std::exp(a * w0) * base - 1e-9);
    }
  }
}

TEST_CASE("stationarity shift check") {
  auto m = build_equilibrium(kExp1, 1.0);
  const double t = 2.0 * m.psi(1);

  // tau = 0: same law on independent ensembles.
  auto r0 = stationarity_shift_check(kExp1, m, 4, t, 0.0, 400, 515151, 1e-2,
                                     Scheme::tamed_euler);
  CHECK(r0.p_value > 1e-3);

  // tau = t: both sides identically zero.
  auto rt = stationarity_shift_check(kExp1, m, 4, t, t, 100, 515152, 1e-2,
                                     Scheme::tamed_euler);
  CHECK(rt.ks_statistic == 0.0);

  // interior tau at moderate replica count.
  auto ri = stationarity_shift_check(kExp1, m, 8, t, 0.5 * m.psi(1), 1500, 515153, 1e-3,
                                     Scheme::tamed_euler);
  CHECK(ri.p_value > 1e-3);
}

TEST_CASE("quadrature oracle rejects N > 3; thresholds validated") {
  auto traj = frozen_path(kExp1, 4, 0.5, 1e-2, 5);
  CHECK_THROWS_AS(evaluate_quadrature(traj, PsgQuery::total_mass()), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_ode(traj, PsgQuery::tail_indicator(-0.1)), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_ode(traj, PsgQuery::tail_indicator(0.7)), std::invalid_argument);
  Forcing neg;
  neg.constant = -1.0;
  CHECK_THROWS_AS(evaluate_ode(traj, PsgQuery::integral_of(neg)), std::invalid_argument);
}

TEST_CASE("snapping is reported for off-grid thresholds") {
  auto traj = frozen_path(kExp1, 2, 1.0, 1e-2, 6);
  CHECK(evaluate_ode(traj, PsgQuery::tail_indicator(0.503)).snapped);
  CHECK_FALSE(evaluate_ode(traj, PsgQuery::tail_indicator(0.5)).snapped);
}
