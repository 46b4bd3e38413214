#include <cmath>
#include <sstream>

#include "doctest.h"
#include "kem/curvature.hpp"
#include "kem/e2_flow.hpp"

using namespace kem;
using namespace kem::e2;

TEST_CASE("E2 right-hand side agrees with the general flow") {
  const ABCState s{0, 0.7, 1.3, 0.9};
  const auto f = e2_rhs(s);
  const auto g = abc_rhs(params(), s);
  for (int i = 0; i < 3; ++i) CHECK(f[i] == doctest::Approx(g[i]).epsilon(1e-15));
  CHECK(f[0] == doctest::Approx(0.35 * (0.81 - 0.49)));
}

TEST_CASE("Jacobian matches finite differences") {
  const ABCState s{0, 0.7, 1.3, 0.9};
  const auto J = e2_jacobian(s);
  const double h = 1e-6;
  for (int j = 0; j < 3; ++j) {
    ABCState up = s, dn = s;
    (j == 0 ? up.a : j == 1 ? up.b : up.c) += h;
    (j == 0 ? dn.a : j == 1 ? dn.b : dn.c) -= h;
    const auto fu = e2_rhs(up), fd = e2_rhs(dn);
    for (int i = 0; i < 3; ++i) CHECK(J[i][j] == doctest::Approx((fu[i] - fd[i]) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("linearization at (q,0,q)") {
  for (double q : {0.5, 1.0, 2.0}) {
    const auto lin = linearization(q, Equilibrium::qoq);
    CHECK(lin.eigenvalues[0] == doctest::Approx(q * q));
    CHECK(lin.eigenvalues[1] == doctest::Approx(0).epsilon(1e-12));
    CHECK(lin.eigenvalues[2] == doctest::Approx(-2 * q * q));
    REQUIRE(lin.unstable);
    CHECK(std::abs((*lin.unstable)[0]) < 1e-12);
    CHECK((*lin.unstable)[1] == doctest::Approx(1));
    CHECK(std::abs((*lin.unstable)[2]) < 1e-12);
  }
  const auto o = linearization(1.0, Equilibrium::oqo);
  CHECK_FALSE(o.unstable);
}

TEST_CASE("monotone quantities satisfy their derivative identities") {
  for (const ABCState& s : {ABCState{0, 0.7, 1.3, 0.9}, ABCState{0, 2, 0.01, 2.1}, ABCState{0, 0.1, 30, 0.2}}) {
    const auto r = derivative_identity_residuals(s);
    for (double v : r) CHECK(v < 1e-14);
  }
}

TEST_CASE("start regions") {
  CHECK(classify_start({0, 1.5, 0.1, 1.0}) == StartRegion::below);
  CHECK(classify_start({0, 1, 0.1, 1.5}) == StartRegion::above);
  CHECK(classify_start({0, 1, 1, 1.2}) == StartRegion::inside);
  CHECK(classify_start({0, 1, 0, 1}) == StartRegion::inside);
}

TEST_CASE("shooting arguments") {
  CHECK_THROWS_AS(shoot_unstable(0, 1e-5, {10.0, {}}, 1e-10), std::invalid_argument);
  CHECK_THROWS_AS(shoot_unstable(1, 2, {10.0, {}}, 1e-10), std::invalid_argument);
  CHECK_THROWS_AS(shoot_unstable(1, 1e-5, {}, 1e-10), std::invalid_argument);
  CHECK_THROWS_AS(shoot_unstable(1, 1e-5, {1e-6, {}}, 1e-10), std::invalid_argument);
}

TEST_CASE("unstable-curve trajectory keeps the invariant region and monotonicity") {
  const auto tr = shoot_unstable(1.0, 1e-5, {100.0, {}}, 1e-12);
  REQUIRE(tr.stop == StopReason::target);
  CHECK(std::abs(tr.back().b - 100) < 1e-6);
  const auto d = diagnose(tr);
  CHECK(d.region_ok);
  CHECK(d.monotone_ok());
  CHECK(d.nullcline_ok);
  CHECK(d.ratio_upper_ok);
  CHECK(d.ratio_monotone_ok);
  REQUIRE(d.kp_fit);
  CHECK(*d.kp_fit <= 50);
  REQUIRE(d.dist_to_minus_inf);
  CHECK(*d.dist_to_minus_inf > 0);
  REQUIRE(d.tail_cauchy_gap);
  CHECK(*d.tail_cauchy_gap < 1e-8);
  // distances keep growing like K log b
  REQUIRE(d.dist_growth_slope);
  CHECK(*d.dist_growth_slope > 0);
  REQUIRE(d.k2_stability);
  CHECK(*d.k2_stability < 0.05);
  const auto between = d.distance_between(10, 100);
  REQUIRE(between);
  CHECK(*between > 0);
}

TEST_CASE("starts outside the region blow up backward (negative control)") {
  for (const ABCState& s : {ABCState{0, 1.5, 0.1, 1.0}, ABCState{0, 1.0, 0.1, 1.5}}) {
    const auto back = integrate(params(), s, -50, 1e-10);
    CHECK(back.stop == StopReason::blow_up);
    const auto fwd = shoot_from(s, {50.0, {}}, 1e-10);
    const auto d = diagnose(fwd);
    CHECK(d.inconclusive);
  }
  // a start below the region never enters it and leaves the nullcline bound
  const auto fwd = shoot_from({0, 1.5, 0.1, 1.0}, {50.0, {}}, 1e-10);
  const auto d = diagnose(fwd);
  CHECK_FALSE(d.region_ok);
}

TEST_CASE("diagnose rejects an inconsistent reference orbit") {
  const auto tr = shoot_unstable(1.0, 1e-5, {100.0, {}}, 1e-12);
  DiagnoseOptions o;
  o.reference_b = 1e-9;
  CHECK_THROWS_AS(diagnose(tr, o), std::invalid_argument);
  o.reference_b = 1;
  o.b_top = 0.5;
  CHECK_THROWS_AS(diagnose(tr, o), std::invalid_argument);
}

TEST_CASE("scaling map relates q = 1 and q = 2") {
  const auto t1 = shoot_unstable(1.0, 1e-5, {10.0, {}}, 1e-12);
  const auto t2 = shoot_unstable(2.0, 1e-5, {10.0, {}}, 1e-12);
  const auto s = scaling_map(t1, 2.0);
  CHECK(s.back().t == doctest::Approx(t2.back().t).epsilon(1e-8));
  CHECK(s.back().a == doctest::Approx(t2.back().a).epsilon(1e-8));
  CHECK(s.back().c == doctest::Approx(t2.back().c).epsilon(1e-8));
  CHECK_THROWS_AS(scaling_map(t1, -1), std::invalid_argument);
}

TEST_CASE("bolt profile is smooth") {
  const auto tr = shoot_unstable(1.0, 1e-5, {100.0, {}}, 1e-12);
  const auto p = bolt_profile(tr);
  CHECK(p.r.front() == 0);
  CHECK(p.q == doctest::Approx(1));
  for (std::size_t i = 1; i < p.r.size(); ++i) CHECK(p.r[i] > p.r[i - 1]);
  const auto rep = bolt_smoothness(p);
  REQUIRE_FALSE(rep.inconclusive);
  CHECK_FALSE(rep.interpolated);
  CHECK(rep.db_dr_error < 1e-4);
  CHECK(rep.db_dr.change < 0.01);
  CHECK(rep.ratio_a2c2.value == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(rep.kahler_r3.value == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(rep.a0.value == doctest::Approx(1).epsilon(1e-8));

  std::stringstream ss;
  write_bolt_csv(ss, p);
  const auto back = read_bolt_csv(ss);
  REQUIRE(back.r.size() == p.r.size());
  CHECK(back.q == p.q);
  for (std::size_t i = 0; i < p.r.size(); ++i) CHECK(back.b[i] == p.b[i]);
  std::istringstream bad("r,a,b\n1,2,3\n");
  CHECK_THROWS_AS(read_bolt_csv(bad), std::runtime_error);
}

TEST_CASE("bolt profile needs a start near the equilibrium") {
  const auto tr = shoot_from({0, 1.0, 0.5, 1.1}, {10.0, {}}, 1e-10);
  CHECK_THROWS_AS(bolt_profile(tr), std::invalid_argument);
}

TEST_CASE("4-metric from the trajectory is Einstein with lambda = -1") {
  const auto tr = shoot_unstable(1.0, 1e-5, {100.0, {}}, 1e-12);
  std::vector<std::pair<double, double>> hv;
  for (double h : {2e-3, 4e-3, 8e-3}) {
    E2GridSpec spec;
    spec.h = spec.h_xy = h;
    const auto g = e2_metric_grid(tr, spec);
    hv.push_back({h, einstein_residual(g.metric, -1)});
  }
  CHECK(hv[0].second < 1e-3);
  const auto est = convergence_order(hv);
  REQUIRE(est.order);
  CHECK(*est.order > 1.8);
  CHECK(*est.order < 2.2);
  // the same metric is not Einstein for lambda = +1
  E2GridSpec spec;
  CHECK(einstein_residual(e2_metric_grid(tr, spec).metric, 1) > 0.1);
}
