#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "kem/bianchi.hpp"
#include "kem/curvature.hpp"

using namespace kem;

namespace {

const ClosedFormCase kCases[] = {ClosedFormCase::poincare, ClosedFormCase::torus, ClosedFormCase::heisenberg,
                                 ClosedFormCase::euclidean};

ClosedFormConsts consts(ClosedFormCase c) {
  ClosedFormConsts k;
  k.k = 1.3;
  k.w3 = 0.8;
  k.alpha = 0.4;
  k.t0 = 0.25;
  if (c == ClosedFormCase::torus) {
    k.a0 = 0.7;
    k.b0 = 1.1;
    k.c0 = 0.9;
  }
  return k;
}

std::pair<double, double> run_interval(ClosedFormCase c, const ClosedFormConsts& k) {
  const auto [lo, hi] = closed_form_interval(c, k);
  if (std::isfinite(hi)) return {lo + 0.1 * (hi - lo), lo + 0.9 * (hi - lo)};
  if (std::isfinite(lo)) return {lo + 0.5, lo + 3};
  return {k.t0, k.t0 + 2};
}

}  // namespace

TEST_CASE("parameter constraints") {
  BianchiParams p;
  p.p3 = 0;
  p.lambda = 1;
  p.alpha0 = 0;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("lambda = 0"), std::invalid_argument);
  p.lambda = 0;
  p.alpha0.reset();
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.alpha0 = 2;
  CHECK_NOTHROW(p.validate());
  p.p3 = 1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.alpha0.reset();
  p.lambda = -1;
  CHECK_NOTHROW(p.validate());
  CHECK(p.alpha(2, 3) == doctest::Approx(36));
}

TEST_CASE("case names") {
  CHECK(closed_form_case_from_string("heisenberg-p3zero") == ClosedFormCase::heisenberg);
  CHECK(closed_form_case_from_string("poincare") == ClosedFormCase::poincare);
  CHECK(closed_form_case_from_string("abelian") == ClosedFormCase::torus);
  CHECK(closed_form_case_from_string("euclidean") == ClosedFormCase::euclidean);
  CHECK_FALSE(closed_form_case_from_string("bianchi9"));
}

TEST_CASE("closed forms solve the flow (complex-step derivatives)") {
  for (auto c : kCases) {
    CAPTURE(to_string(c));
    const auto k = consts(c);
    const auto p = closed_form_params(c, k);
    const auto [ta, tb] = run_interval(c, k);
    double worst = 0;
    for (int i = 1; i <= 200; ++i) {
      const double t = ta + (tb - ta) * i / 201.0, hc = 1e-30;
      const auto z = closed_form_abc<std::complex<double>>(c, k, {t, hc});
      const auto f = abc_rhs(p, {t, z[0].real(), z[1].real(), z[2].real()});
      for (int j = 0; j < 3; ++j)
        worst = std::max(worst, std::abs(f[j] - z[j].imag() / hc) / std::max(1.0, std::abs(f[j])));
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("a wrong alpha breaks the closed form (negative control)") {
  auto k = consts(ClosedFormCase::heisenberg);
  auto p = closed_form_params(ClosedFormCase::heisenberg, k);
  p.alpha0 = k.alpha + 0.1;
  const double t = 1.5, hc = 1e-30;
  const auto z = closed_form_abc<std::complex<double>>(ClosedFormCase::heisenberg, k, {t, hc});
  const auto f = abc_rhs(p, {t, z[0].real(), z[1].real(), z[2].real()});
  CHECK(std::abs(f[2] - z[2].imag() / hc) > 1e-3);
}

TEST_CASE("integration tracks the closed forms within 10 tol") {
  const double tol = 1e-10;
  for (auto c : kCases) {
    CAPTURE(to_string(c));
    const auto k = consts(c);
    const auto [ta, tb] = run_interval(c, k);
    const auto tr = integrate(closed_form_params(c, k), closed_form(c, k, ta), tb, tol);
    CHECK(tr.stop == StopReason::completed);
    double dev = 0;
    for (const auto& s : tr.samples) {
      const auto e = closed_form(c, k, s.t);
      dev = std::max({dev, std::abs(s.a - e.a) / std::max(1.0, e.a), std::abs(s.b - e.b) / std::max(1.0, e.b),
                      std::abs(s.c - e.c) / std::max(1.0, e.c)});
    }
    CHECK(dev < 10 * tol);
  }
}

TEST_CASE("singular endpoints") {
  const auto k = consts(ClosedFormCase::poincare);
  const auto [lo, hi] = closed_form_interval(ClosedFormCase::poincare, k);
  CHECK(hi - lo == doctest::Approx(std::numbers::pi / (2 * k.w3)));
  CHECK_THROWS_AS(closed_form(ClosedFormCase::poincare, k, lo), std::domain_error);
  CHECK_THROWS_AS(closed_form(ClosedFormCase::poincare, k, hi + 0.1), std::domain_error);
  CHECK_THROWS_AS(closed_form(ClosedFormCase::heisenberg, k, k.t0 - 1), std::domain_error);
  // the Poincare solution is not complete: integrating toward hi blows up
  const auto p = closed_form_params(ClosedFormCase::poincare, k);
  const auto tr = integrate(p, closed_form(ClosedFormCase::poincare, k, lo + 0.5 * (hi - lo)), hi + 1.0, 1e-10);
  CHECK(tr.stop == StopReason::blow_up);
  CHECK(tr.back().t < hi);
  CHECK(tr.back().t > hi - 1e-3);
}

TEST_CASE("integration options and ordering") {
  BianchiParams p;
  p.p1 = 1;
  p.alpha0 = 0.5;
  IntegrateOptions io;
  io.b_stop = 2.0;
  const auto tr = integrate(p, {0, 1, 1, 1}, 50, 1e-10, io);
  CHECK(tr.stop == StopReason::target);
  CHECK(tr.back().b == doctest::Approx(2.0).epsilon(1e-12));
  const auto back = integrate(p, {0, 1, 1, 1}, -0.5, 1e-10);
  CHECK(back.front().t == -0.5);
  CHECK(back.back().t == 0.0);
  for (std::size_t i = 1; i < back.samples.size(); ++i) CHECK(back.samples[i].t > back.samples[i - 1].t);
  CHECK_THROWS_AS(integrate(p, {0, -1, 1, 1}, 1, 1e-10), std::invalid_argument);
}

TEST_CASE("Heisenberg first integrals with p = (0,0,1), lambda = -1") {
  BianchiParams p;
  p.p3 = 1;
  p.lambda = -1;
  const ABCState s0{0, 0.5, 0.3, 0.5};
  const auto tr = integrate(p, s0, 5.0, 1e-10);
  REQUIRE(tr.stop == StopReason::completed);
  const auto I0 = heisenberg_invariants(s0);
  double drift = 0;
  for (const auto& s : tr.samples) {
    const auto I = heisenberg_invariants(s);
    drift = std::max({drift, std::abs(I[0] - I0[0]), std::abs(I[1] - I0[1])});
  }
  CHECK(drift < 1e-8);
  // a different flow does not conserve them
  BianchiParams q = p;
  q.p1 = 1;
  const auto tq = integrate(q, s0, 1.0, 1e-10);
  CHECK(std::abs(heisenberg_invariants(tq.back())[0] - I0[0]) > 1e-3);
}

TEST_CASE("left-invariant coframes satisfy d sigma_i = p_i sigma_j ^ sigma_k") {
  const std::array<std::array<double, 3>, 6> ps{{{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 0}, {1, -1, 0}}};
  const double h = 1e-5;
  const std::array<double, 3> u{0.3, -0.4, 0.7};
  for (const auto& pc : ps) {
    BianchiParams p;
    p.p1 = pc[0];
    p.p2 = pc[1];
    p.p3 = pc[2];
    CAPTURE(p.p1);
    CAPTURE(p.p2);
    CAPTURE(p.p3);
    REQUIRE(coframe_supported(p));
    const auto S = coframe_matrix(p, u);
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3, k = (i + 2) % 3;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          auto dS = [&](int row, int col, int dir) {
            auto up = u, dn = u;
            up[dir] += h;
            dn[dir] -= h;
            return (coframe_matrix(p, up)[row][col] - coframe_matrix(p, dn)[row][col]) / (2 * h);
          };
          const double dsig = dS(i, b, a) - dS(i, a, b);
          const double wedge = S[j][a] * S[k][b] - S[j][b] * S[k][a];
          CHECK(dsig == doctest::Approx(pc[i] * wedge).epsilon(1e-8));
        }
    }
  }
  BianchiParams bad;
  bad.p1 = 2;
  CHECK_FALSE(coframe_supported(bad));
  CHECK_THROWS_AS(coframe_matrix(bad, u), std::invalid_argument);
}

TEST_CASE("sampled flow matches the closed form") {
  const auto c = ClosedFormCase::euclidean;
  const auto k = consts(c);
  const auto p = closed_form_params(c, k);
  const Axis ax{"t", 1.5, 0.01, 11};
  const auto st = sample_flow(p, closed_form(c, k, 1.0), ax);
  for (const auto& s : st) {
    const auto e = closed_form(c, k, s.t);
    CHECK(std::abs(s.a - e.a) < 1e-11);
    CHECK(std::abs(s.c - e.c) < 1e-11);
  }
}

TEST_CASE("flat torus metric and a curved control") {
  ClosedFormConsts k;
  k.a0 = 0.5;
  k.b0 = 0.5;
  k.c0 = 1.0;
  k.alpha = 0.25;
  std::array<Axis, 3> ga{Axis{"x", 0.2, 0, 5}, Axis{"y", 0.2, 0, 5}, Axis{"z", 0.2, 0, 5}};
  auto riem = [&](ClosedFormCase c, double h) {
    const auto p = closed_form_params(c, k);
    const Axis ta{"t", 1.0 - 3 * h, h, 7};
    for (auto& a : ga) a.step = h;
    const auto g = bianchi_grid(p, ta, sample_flow(p, closed_form(c, k, 0.5), ta), ga);
    CHECK(exterior_derivative_closedness(g.kahler) < 1e-6);
    return max_riemann(g.metric);
  };
  std::vector<std::pair<double, double>> hv;
  for (double h : {1e-3, 2e-3, 4e-3}) hv.push_back({h, riem(ClosedFormCase::torus, h)});
  CHECK(hv[0].second < 1e-6);
  const auto est = convergence_order(hv);
  REQUIRE(est.order);
  CHECK(*est.order > 1.8);
  CHECK(*est.order < 2.2);
  // the cone factor is locally flat for every alpha; the Heisenberg family is not
  CHECK(riem(ClosedFormCase::heisenberg, 1e-3) > 1e-2);
}

TEST_CASE("metric and Kahler form components") {
  const ABCState s{0, 2, 3, 5};
  const auto m = metric_components(s);
  CHECK(m[0] == 900);
  CHECK(m[3] == 25);
  const auto w = kahler_form_components(s);
  CHECK(w[0] == 150);
  CHECK(w[1] == 6);
  BianchiParams p;
  p.p1 = 1;
  p.alpha0 = 0;
  CHECK_THROWS_AS(bianchi_frame_coefficients(p, {0, 0, 1, 1}), std::domain_error);
}
