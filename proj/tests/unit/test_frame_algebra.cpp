#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "kem/bianchi.hpp"
#include "kem/frame_algebra.hpp"
#include "kem/ode.hpp"

using namespace kem;

namespace {

PQRSState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-2, 2), pos(0.01, 2), ang(-std::numbers::pi, std::numbers::pi);
  PQRSState s;
  s.P = U(rng);
  s.Q = U(rng);
  s.R = pos(rng);
  s.S = ang(rng);
  s.L = U(rng);
  s.N = U(rng);
  return s;
}

}  // namespace

TEST_CASE("pqrs round trip") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_state(rng);
    const auto f = from_pqrs(s);
    CHECK(kahler_valid(f, 1e-13));
    const auto b = to_pqrs(f);
    REQUIRE(b.S.has_value());
    CHECK(std::abs(b.P - s.P) < 1e-13);
    CHECK(std::abs(b.Q - s.Q) < 1e-13);
    CHECK(std::abs(b.R - s.R) < 1e-13);
    CHECK(std::abs(std::remainder(*b.S - *s.S, 2 * std::numbers::pi)) < 1e-12);
    CHECK(b.L == s.L);
    CHECK(b.N == s.N);
  }
}

TEST_CASE("S lies in (-pi, pi]") {
  PQRSState s;
  s.R = 1;
  s.S = -std::numbers::pi;
  const auto b = to_pqrs(from_pqrs(s));
  CHECK(*b.S == doctest::Approx(std::numbers::pi));
  s.S = 0.5;
  CHECK(*to_pqrs(from_pqrs(s)).S == doctest::Approx(0.5));
}

TEST_CASE("shear-free locus has no S") {
  PQRSState s;
  s.P = 0.3;
  s.Q = -0.2;
  s.R = 0;
  const auto f = from_pqrs(s);
  CHECK(to_pqrs(f).shear_free());
  PQRSState bad;
  bad.R = 0.5;
  CHECK_THROWS_AS(from_pqrs(bad), std::invalid_argument);
  bad.R = -1;
  bad.S = 0;
  CHECK_THROWS_AS(from_pqrs(bad), std::invalid_argument);
}

TEST_CASE("kahler relations detect a broken frame") {
  FrameCoefficients f = from_pqrs({0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  CHECK(kahler_valid(f));
  f.A += 1e-6;
  CHECK_FALSE(kahler_valid(f, 1e-10));
  const auto r = integrability_residuals(f);
  CHECK(std::abs(r[0] - 1e-6) < 1e-15);
}

TEST_CASE("shear coefficients of simple operators") {
  // pure shear diag(1,-1)
  auto s = shear_coefficients(1, 0, 0, -1);
  CHECK(s.sigma1 == 1);
  CHECK(s.sigma2 == 0);
  // rotation generator and multiples of the identity are shear-free
  s = shear_coefficients(0, 1, -1, 0);
  CHECK(s.sigma1 == 0);
  CHECK(s.sigma2 == 0);
  s = shear_coefficients(3, 0, 0, 3);
  CHECK(s.sigma1 == 0);
  const auto m = shear_matrix({0.5, 0.25});
  CHECK(m[0][0] == -0.5);
  CHECK(m[1][1] == 0.5);
  CHECK(m[0][1] == 0.25);
  CHECK(m[1][0] == 0.25);
}

TEST_CASE("lambda constraint is a first integral of sys_rhs") {
  std::mt19937_64 rng(11);
  ode::Options o;
  o.rtol = o.atol = 1e-12;
  for (int i = 0; i < 20; ++i) {
    auto s = random_state(rng);
    s.L /= 4;
    s.N /= 4;
    s.R /= 4;
    const double l0 = lambda_constraint(s);
    const auto r = ode::integrate<6>([](double, const ode::Vec<6>& y) { return sys_rhs_vector(y); }, 0.0,
                                     to_sys_vector(s), 0.5, o);
    REQUIRE(r.status == ode::Termination::completed);
    CHECK(std::abs(lambda_constraint(from_sys_vector(r.y)) - l0) < 1e-9);
  }
}

TEST_CASE("sys_rhs at a hand-computed point") {
  PQRSState s;
  s.N = 1;
  s.L = 2;
  s.R = 2;
  s.P = 4;
  s.Q = 6;
  s.S = 0;
  const auto d = sys_rhs(s);
  CHECK(d[0] == doctest::Approx(1 - 2));
  CHECK(d[1] == doctest::Approx(4 - 1 + 1 + 1));
  CHECK(d[2] == doctest::Approx((2 + 2) * 2));
  CHECK(d[3] == doctest::Approx(8 + 4));
  CHECK(d[4] == doctest::Approx(-3));
  CHECK(lambda_constraint(s) == doctest::Approx(-1 * (8 + 2 - 4) / 2.0));
}

TEST_CASE("diagonal Bianchi frames satisfy the Kahler relations") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.2, 3), U(-1, 1);
  for (int i = 0; i < 200; ++i) {
    BianchiParams p;
    p.p1 = U(rng);
    p.p2 = U(rng);
    p.p3 = 0.5 + std::abs(U(rng));
    p.lambda = U(rng);
    const ABCState st{0, pos(rng), pos(rng), pos(rng)};
    const auto f = bianchi_frame_coefficients(p, st);
    CHECK(kahler_valid(f, 1e-10));
    CHECK(to_pqrs(f).R == doctest::Approx(frame_table_R(p, st)).epsilon(1e-12));
  }
}
