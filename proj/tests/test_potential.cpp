#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oy/potential.hpp"
#include "oy/rng.hpp"

using namespace oy;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("closed-form evaluations") {
  CHECK(eval(PotentialSpec::exponential(1.0), 0.0, 2) == 1.0);
  CHECK(eval(PotentialSpec::quadratic(), 2.0, 1) == 2.0);
  CHECK_THAT(eval(PotentialSpec::laplace_measure({{1.0, 1.0}}), 0.5, 0),
             WithinAbs(std::exp(-0.5), 1e-16));
  CHECK(eval(PotentialSpec::quadratic(), 5.0, 3) == 0.0);
  CHECK_THROWS_AS(eval(PotentialSpec::quadratic(), 1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(eval(PotentialSpec::quadratic(), std::nan(""), 0), std::invalid_argument);
}

TEST_CASE("single laplace atom equals exponential for all orders") {
  auto lap = PotentialSpec::laplace_measure({{1.7, 1.0}});
  auto expo = PotentialSpec::exponential(1.7);
  for (int k = 0; k <= 3; ++k)
    for (double x : {-3.0, -0.5, 0.0, 0.2, 4.0})
      CHECK_THAT(eval(lap, x, k), WithinRel(eval(expo, x, k), 1e-15));
}

static void check_fd_consistency(const PotentialSpec& spec, double x) {
  const double h = 1e-4;
  for (int k = 0; k <= 2; ++k) {
    const double fd = (eval(spec, x + h, k) - eval(spec, x - h, k)) / (2.0 * h);
    const double exact = eval(spec, x, k + 1);
    const double scale = std::max(1.0, std::fabs(exact));
    CHECK_THAT(fd, WithinAbs(exact, 1e-5 * scale));
  }
}

TEST_CASE("derivatives agree with central differences") {
  auto two_atom = PotentialSpec::laplace_measure({{1.0, 1.0}, {2.0, 0.5}});
  auto bumped = PotentialSpec::perturbed(PotentialSpec::exponential(1.0),
                                         {0.5, 1.5, 1.0}, 1e-2);
  for (double x : {-6.0, -1.3, 0.0, 0.7, 3.0, 12.0}) {
    check_fd_consistency(PotentialSpec::exponential(1.0), x);
    check_fd_consistency(PotentialSpec::quadratic(), x);
    check_fd_consistency(two_atom, x);
    check_fd_consistency(bumped, x);
  }
}

TEST_CASE("log channel matches direct evaluation where finite") {
  auto expo = PotentialSpec::exponential(2.0);
  for (int k = 0; k <= 3; ++k) {
    CHECK_THAT(log_abs_eval(expo, -3.0, k), WithinRel(std::log(std::fabs(eval(expo, -3.0, k))), 1e-12));
    // Past the overflow threshold the log stays finite.
    CHECK(std::isinf(eval(expo, -400.0, k)));
    CHECK_THAT(log_abs_eval(expo, -400.0, k), WithinRel(k * std::log(2.0) + 800.0, 1e-12));
  }
  auto lap = PotentialSpec::laplace_measure({{1.0, 1.0}, {3.0, 1.0}});
  CHECK_THAT(log_abs_eval(lap, -300.0, 0), WithinRel(std::log(std::exp(0.0) ) + 900.0, 1e-10));
}

TEST_CASE("audit: exponential passes with c0 = beta for beta = 1") {
  auto audit = audit_oy_type(PotentialSpec::exponential(1.0), -10.0, 10.0, 1024);
  CHECK(audit.pass);
  CHECK(audit.c_lower == 1.0);
  CHECK(audit.certified_c0 == 1.0);
  CHECK(audit.growth_ok);
}

TEST_CASE("audit: quadratic fails with the degenerate-third-derivative reason") {
  auto audit = audit_oy_type(PotentialSpec::quadratic(), -10.0, 10.0, 256);
  CHECK_FALSE(audit.pass);
  CHECK(audit.c_lower == 0.0);
  CHECK(audit.reason.find("V'''") != std::string::npos);
}

TEST_CASE("audit: two-atom laplace measure") {
  auto spec = PotentialSpec::laplace_measure({{1.0, 1.0}, {2.0, 0.5}});
  auto audit = audit_oy_type(spec, -10.0, 10.0, 1024);
  CHECK(audit.pass);
  CHECK(audit.c_lower >= 1.0);
  CHECK(audit.c_lower <= 2.0);

  // Oracle: independent grid minimisation of -V'''/V''.
  double ratio_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1024; ++i) {
    const double x = -10.0 + 20.0 * i / 1023.0;
    ratio_min = std::min(ratio_min, -eval(spec, x, 3) / eval(spec, x, 2));
  }
  CHECK_THAT(audit.c_lower, WithinRel(ratio_min, 1e-13));
}

TEST_CASE("audit invariants hold on every audited-pass spec") {
  for (auto spec : {PotentialSpec::exponential(1.0),
                    PotentialSpec::exponential(0.7),
                    PotentialSpec::laplace_measure({{1.0, 1.0}, {3.0, 1.0}}),
                    PotentialSpec::perturbed(PotentialSpec::exponential(1.0), {0.0, 2.0, 0.5}, 1e-3)}) {
    auto audit = audit_oy_type(spec, -30.0, 30.0, 2048);
    REQUIRE(audit.pass);
    for (double x : audit.grid) {
      const double v2 = eval(spec, x, 2);
      if (!std::isfinite(v2)) continue;
      CHECK(eval(spec, x, 0) >= 0.0);
      CHECK(eval(spec, x, 1) <= 0.0);
      CHECK(audit.c_lower * v2 <= -eval(spec, x, 3) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("audit precondition checks") {
  CHECK_THROWS_AS(audit_oy_type(PotentialSpec::quadratic(), 1.0, -1.0, 256), std::invalid_argument);
  CHECK_THROWS_AS(audit_oy_type(PotentialSpec::quadratic(), -1.0, 1.0, 8), std::invalid_argument);
}
