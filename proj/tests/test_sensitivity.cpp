#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oy/sensitivity.hpp"

using namespace oy;
using Catch::Matchers::WithinAbs;

namespace {
const PotentialSpec kExp1 = PotentialSpec::exponential(1.0);
const PotentialSpec kQuad = PotentialSpec::quadratic();

Trajectory make_path(const PotentialSpec& spec, const EquilibriumMeasure& m, int N,
                     double t_end, double dt, std::uint32_t rep, Scheme scheme) {
  NoiseBlock noise(808017, rep, dt, llround(t_end / dt) + 1, N + 1);
  return simulate(spec, m, Drive{m.theta}, N, t_end, noise, scheme);
}
}  // namespace

TEST_CASE("quadratic single site: h1(t) = -(1 - e^{-t}) exactly per step") {
  auto m = build_equilibrium(kQuad, 1.0);
  auto traj = make_path(kQuad, m, 1, 1.0, 1e-2, 3, Scheme::exact_gaussian);
  auto b = integrate_first_order(traj, eta_tangent_initial(m, traj.q));
  for (std::int64_t step = 0; step <= traj.n_steps; ++step) {
    const double t = traj.time(step);
    CHECK_THAT(b.h_at(step, 0), WithinAbs(-(1.0 - std::exp(-t)), 1e-10));
  }
  CHECK(b.dW_dtheta[0] == 0.0);
  // k1(0) = -1 for the Gaussian; k1(t) = -e^{-t}.
  CHECK_THAT(b.k_at(traj.n_steps, 0), WithinAbs(-std::exp(-1.0), 1e-10));
}

TEST_CASE("sign structure holds exactly at every step on sampled paths") {
  for (const auto& spec : {kExp1, PotentialSpec::laplace_measure({{1.0, 1.0}, {2.0, 0.5}})}) {
    auto m = build_equilibrium(spec, 1.0);
    auto audit = audit_oy_type(spec);
    REQUIRE(audit.pass);
    for (std::uint32_t rep = 0; rep < 4; ++rep) {
      auto traj = make_path(spec, m, 6, 2.0, 1e-2, rep, Scheme::tamed_euler);
      auto b = integrate_first_order(traj, eta_tangent_initial(m, traj.q));
      integrate_second_order(traj, b, eta_tangent_initial(m, traj.q, 2), audit.certified_c0);
      for (std::int64_t s = 0; s <= traj.n_steps; ++s) {
        const double t = traj.time(s);
        for (int j = 0; j < 6; ++j) {
          CHECK(b.h_at(s, j) <= 0.0);
          CHECK(b.k_at(s, j) <= 0.0);
          CHECK(-b.h_at(s, j) <= t * (1.0 + 1e-12) + 1e-12);
        }
        CHECK(b.dW_dtheta[s] >= 0.0);
        CHECK(b.dW_deta[s] <= 0.0);
        CHECK(b.d2W_dtheta2[s] >= 0.0);
        CHECK(b.d2W_dthetadeta[s] >= 0.0);
        CHECK(b.mixed_monitor[s] >= 0.0);
        CHECK(b.d2W_deta2[s] >= -b.X_eta * (1.0 + 1e-12) - 1e-12);
      }
    }
  }
}

TEST_CASE("|sum k(t)| never exceeds sum |k(0)|") {
  auto m = build_equilibrium(kExp1, 1.0);
  auto traj = make_path(kExp1, m, 5, 1.5, 1e-2, 11, Scheme::tamed_euler);
  auto k0 = eta_tangent_initial(m, traj.q);
  double cap = 0.0;
  for (double v : k0) cap += std::fabs(v);
  auto b = integrate_first_order(traj, k0);
  for (std::int64_t s = 0; s <= traj.n_steps; ++s)
    CHECK(std::fabs(b.dW_deta[s]) <= cap * (1.0 + 1e-12));
}

TEST_CASE("telescoped dW_dtheta matches sum h + t") {
  auto m = build_equilibrium(kExp1, 1.0);
  auto traj = make_path(kExp1, m, 4, 1.0, 1e-2, 5, Scheme::tamed_euler);
  auto b = integrate_first_order(traj, eta_tangent_initial(m, traj.q));
  for (std::int64_t s = 0; s <= traj.n_steps; s += 10) {
    double sum_h = 0.0;
    for (int j = 0; j < 4; ++j) sum_h += b.h_at(s, j);
    CHECK_THAT(b.dW_dtheta[s], WithinAbs(sum_h + traj.time(s), 1e-10 * (1.0 + traj.time(s))));
  }
}

TEST_CASE("second derivatives vanish identically for the quadratic potential") {
  auto m = build_equilibrium(kQuad, 1.0);
  auto traj = make_path(kQuad, m, 3, 1.0, 1e-2, 7, Scheme::exact_gaussian);
  auto b = integrate_first_order(traj, eta_tangent_initial(m, traj.q));
  integrate_second_order(traj, b, eta_tangent_initial(m, traj.q, 2), 0.0);
  CHECK(b.X_eta == 0.0);
  for (std::int64_t s = 0; s <= traj.n_steps; ++s) {
    CHECK(b.d2W_dtheta2[s] == 0.0);
    CHECK(b.d2W_dthetadeta[s] == 0.0);
    CHECK(b.d2W_deta2[s] == 0.0);
  }
}

TEST_CASE("initial data of the second-derivative lanes is zero") {
  auto m = build_equilibrium(kExp1, 1.0);
  auto traj = make_path(kExp1, m, 3, 0.5, 1e-2, 2, Scheme::tamed_euler);
  auto b = integrate_first_order(traj, eta_tangent_initial(m, traj.q));
  integrate_second_order(traj, b, eta_tangent_initial(m, traj.q, 2), 1.0);
  CHECK(b.d2W_dtheta2[0] == 0.0);
  CHECK(b.d2W_dthetadeta[0] == 0.0);
  CHECK(b.mixed_monitor[0] == 0.0);
}

TEST_CASE("finite differences of coupled runs converge to the tangents as (h, dt) halve") {
  auto run_err = [&](double hh, double dt) {
    double err_th = 0.0, err_eta = 0.0;
    const int N = 3;
    const double t_end = 1.0;
    for (std::uint32_t rep = 0; rep < 32; ++rep) {
      NoiseBlock noise(5643, rep, dt, llround(t_end / dt) + 1, N + 1);
      std::vector<double> q(N);
      for (int j = 0; j < N; ++j) q[j] = noise.uniform(j);
      auto fam = coupled_family(kExp1, q, noise,
                                {{1.0, Drive{1.0}}, {1.0, Drive{1.0 + hh}}, {1.0 + hh, Drive{1.0}}},
                                N, t_end, Scheme::tamed_euler);
      auto m = build_equilibrium(kExp1, 1.0);
      auto b = integrate_first_order(fam[0], eta_tangent_initial(m, q));
      const double w0 = height(fam[0], t_end).W;
      const double fd_th = (height(fam[1], t_end).W - w0) / hh;
      const double fd_eta = (height(fam[2], t_end).W - w0) / hh;
      err_th += std::fabs(fd_th - b.dW_dtheta.back());
      err_eta += std::fabs(fd_eta - b.dW_deta.back());
    }
    return std::pair{err_th / 32.0, err_eta / 32.0};
  };
  auto [e0_th, e0_eta] = run_err(2e-2, 2e-2);
  auto [e1_th, e1_eta] = run_err(1e-2, 1e-2);
  auto [e2_th, e2_eta] = run_err(5e-3, 5e-3);
  CHECK(e1_th < e0_th / 1.8);
  CHECK(e1_eta < e0_eta / 1.8);
  CHECK(e2_th < e1_th / 1.8);
  CHECK(e2_eta < e1_eta / 1.8);
}

TEST_CASE("forced tangent with f == 1 is bit-identical to the theta tangent") {
  auto m = build_equilibrium(kExp1, 1.0);
  auto traj = make_path(kExp1, m, 4, 1.0, 1e-2, 9, Scheme::tamed_euler);
  auto b = integrate_first_order(traj, eta_tangent_initial(m, traj.q));
  auto f = integrate_forced(traj, Forcing::ones());
  CHECK(f.hf == b.h);
  CHECK(f.sign_assertable);
}

TEST_CASE("forced tangent with f == 0 stays zero") {
  auto m = build_equilibrium(kExp1, 1.0);
  auto traj = make_path(kExp1, m, 3, 0.5, 1e-2, 1, Scheme::tamed_euler);
  auto f = integrate_forced(traj, Forcing{});
  for (double v : f.hf) CHECK(v == 0.0);
}

TEST_CASE("unit impulse at t=0, single site, constant V'': the mass relaxes as 1 - e^{-t}") {
  auto m = build_equilibrium(kQuad, 1.0);
  auto traj = make_path(kQuad, m, 1, 1.0, 1e-2, 14, Scheme::exact_gaussian);
  auto f = integrate_forced(traj, Forcing::impulse(0, 1.0));
  for (std::int64_t s = 0; s <= traj.n_steps; ++s) {
    const double mass = f.sum_hf[std::size_t(s)] + f.F[std::size_t(s)];
    CHECK_THAT(mass, WithinAbs(1.0 - std::exp(-traj.time(s)), 1e-12));
    CHECK(f.hf_at(s, 0) <= 0.0);
  }
}

TEST_CASE("nonnegative forcing keeps every h^f nonpositive; negative forcing flags itself") {
  auto m = build_equilibrium(kExp1, 1.0);
  auto traj = make_path(kExp1, m, 5, 1.0, 1e-2, 21, Scheme::tamed_euler);
  Forcing box = Forcing::after_step(30);
  auto f = integrate_forced(traj, box);
  CHECK(f.sign_assertable);
  for (double v : f.hf) CHECK(v <= 0.0);

  Forcing neg;
  neg.constant = -0.5;
  CHECK_FALSE(integrate_forced(traj, neg).sign_assertable);
}
