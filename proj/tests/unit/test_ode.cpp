#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kem/ode.hpp"

using namespace kem::ode;

TEST_CASE("exponential decay matches exp(-t)") {
  Options o;
  o.rtol = o.atol = 1e-11;
  const auto r = integrate<1>([](double, const Vec<1>& y) { return Vec<1>{-y[0]}; }, 0.0, {1.0}, 2.0, o);
  CHECK(r.status == Termination::completed);
  CHECK(r.t == 2.0);
  CHECK(std::abs(r.y[0] - std::exp(-2.0)) < 1e-10);
}

TEST_CASE("backward integration") {
  Options o;
  o.rtol = o.atol = 1e-11;
  const auto r = integrate<1>([](double, const Vec<1>& y) { return Vec<1>{y[0]}; }, 1.0, {std::exp(1.0)}, 0.0, o);
  CHECK(std::abs(r.y[0] - 1.0) < 1e-10);
}

TEST_CASE("dense output of the oscillator stays close to sin/cos") {
  Options o;
  o.rtol = o.atol = 1e-10;
  double worst = 0;
  std::size_t steps = 0;
  auto obs = [&](const DenseStep<2>& ds) {
    ++steps;
    for (double th : {0.25, 0.5, 0.75}) {
      const double t = ds.t0 + th * (ds.t1 - ds.t0);
      const auto y = ds(t);
      worst = std::max({worst, std::abs(y[0] - std::sin(t)), std::abs(y[1] - std::cos(t))});
    }
  };
  integrate<2>([](double, const Vec<2>& y) { return Vec<2>{y[1], -y[0]}; }, 0.0, {0.0, 1.0}, 10.0, o, {}, obs);
  CHECK(steps > 10);
  CHECK(worst < 1e-8);
}

TEST_CASE("terminal event is located") {
  Options o;
  std::vector<Event<1>> ev{{[](double, const Vec<1>& y) { return y[0] - 0.5; }, true, 1}};
  const auto r = integrate<1>([](double, const Vec<1>&) { return Vec<1>{1.0}; }, 0.0, {0.0}, 3.0, o, ev);
  CHECK(r.status == Termination::event);
  CHECK(r.event_index == 0);
  CHECK(std::abs(r.t - 0.5) < 1e-12);
  CHECK(std::abs(r.y[0] - 0.5) < 1e-12);
}

TEST_CASE("event direction filters crossings") {
  Options o;
  o.rtol = o.atol = 1e-12;
  // sin t crosses zero falling at pi first
  std::vector<Event<2>> ev{{[](double, const Vec<2>& y) { return y[0]; }, true, -1}};
  const auto r = integrate<2>([](double, const Vec<2>& y) { return Vec<2>{y[1], -y[0]}; }, 0.1,
                              {std::sin(0.1), std::cos(0.1)}, 10.0, o, ev);
  CHECK(r.status == Termination::event);
  CHECK(std::abs(r.t - std::numbers::pi) < 1e-9);
}

TEST_CASE("landing times are hit exactly") {
  Options o;
  o.landing = {0.3, 0.7, 0.7, 1.1};
  std::vector<double> ends;
  integrate<1>([](double, const Vec<1>& y) { return Vec<1>{y[0]}; }, 0.0, {1.0}, 2.0, o, {},
               [&](const DenseStep<1>& ds) { ends.push_back(ds.t1); });
  for (double L : {0.3, 0.7, 1.1}) CHECK(std::find(ends.begin(), ends.end(), L) != ends.end());
  CHECK(ends.back() == 2.0);
}

TEST_CASE("finite-time blow-up is flagged") {
  Options o;
  // y' = y^2, y(0) = 1 blows up at t = 1
  const auto r = integrate<1>([](double, const Vec<1>& y) { return Vec<1>{y[0] * y[0]}; }, 0.0, {1.0}, 2.0, o);
  CHECK((r.status == Termination::step_underflow || r.status == Termination::threshold_exceeded));
  CHECK(r.t < 1.0);
  CHECK(r.t > 0.999);
}

TEST_CASE("validity predicate stops at the last valid state") {
  Options o;
  const auto r = integrate<1>([](double, const Vec<1>&) { return Vec<1>{-1.0}; }, 0.0, {1.0}, 5.0, o, {}, {},
                              [](const Vec<1>& y) { return y[0] > 0; });
  CHECK(r.status == Termination::invalid_state);
  CHECK(r.y[0] > 0);
}

TEST_CASE("rk4 is fourth order") {
  auto f = [](double, const Vec<1>& y) { return Vec<1>{-y[0]}; };
  const double e1 = std::abs(rk4<1>(f, 0.0, {1.0}, 0.1, 10)[0] - std::exp(-1.0));
  const double e2 = std::abs(rk4<1>(f, 0.0, {1.0}, 0.05, 20)[0] - std::exp(-1.0));
  CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("bad tolerances are rejected") {
  Options o;
  o.rtol = 0;
  CHECK_THROWS_AS(integrate<1>([](double, const Vec<1>& y) { return y; }, 0.0, {1.0}, 1.0, o), std::invalid_argument);
}
