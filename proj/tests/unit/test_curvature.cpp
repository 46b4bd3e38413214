#include <cmath>
#include <functional>

#include "doctest.h"
#include "kem/curvature.hpp"

using namespace kem;

namespace {

// diagonal 2D metric diag(e(x,y), f(x,y))
MetricGrid diag2(const Axis& X, const Axis& Y, const std::function<double(double, double)>& e,
                 const std::function<double(double, double)>& f) {
  Lattice l({X, Y});
  std::vector<double> c;
  for (std::size_t n = 0; n < l.size(); ++n) {
    const double x = l.position(n, 0), y = l.position(n, 1);
    c.insert(c.end(), {e(x, y), 0, 0, f(x, y)});
  }
  return MetricGrid(l, c);
}

MetricGrid sphere(double h) {
  return diag2({"theta", 1.0 - 10 * h, h, 21}, {"phi", 0, h, 21}, [](double, double) { return 1.0; },
               [](double t, double) { return std::sin(t) * std::sin(t); });
}

double max_err(const ScalarGrid& K, double exact) {
  double m = 0;
  for (double v : K.values)
    if (!std::isnan(v)) m = std::max(m, std::abs(v - exact));
  return m;
}

}  // namespace

TEST_CASE("unit sphere: K = 1, R_0101 = sin^2, second order") {
  std::vector<std::pair<double, double>> hv;
  for (double h : {0.02, 0.01, 0.005}) {
    const auto g = sphere(h);
    const std::size_t n = g.lattice().index({10, 10});
    // the lattice shrinks with h, so the order is read at the fixed center node
    hv.push_back({h, std::abs(gauss_curvature_2d(g)[n] - 1.0)});
    CHECK(max_err(gauss_curvature_2d(g), 1.0) < 1.5 * h * h);
    const auto R = riemann(g);
    REQUIRE(R.valid[n]);
    const double st = std::sin(g.lattice().position(n, 0));
    CHECK(R.at(n)[0 * 8 + 1 * 4 + 0 * 2 + 1] == doctest::Approx(st * st).epsilon(1e-3));
    CHECK(einstein_residual(g, 1.0) < 1e-3);
  }
  CHECK(hv.back().second < 5e-5);
  const auto est = convergence_order(hv);
  REQUIRE(est.order);
  CHECK(*est.order > 1.8);
  CHECK(*est.order < 2.2);
}

TEST_CASE("half-plane metric has K = -1") {
  const auto g = diag2({"x", 0, 0.01, 21}, {"y", 1, 0.01, 21}, [](double, double y) { return 1 / (y * y); },
                       [](double, double y) { return 1 / (y * y); });
  CHECK(max_err(gauss_curvature_2d(g), -1.0) < 5e-4);
  CHECK(einstein_residual(g, -1.0) < 5e-4);
  CHECK(max_err(gauss_curvature_2d(g), 1.0) > 1.9);
}

TEST_CASE("polar coordinates: Christoffel symbols and flatness") {
  const double h = 0.01;
  const auto g = diag2({"r", 1, h, 11}, {"theta", 0, h, 11}, [](double, double) { return 1.0; },
                       [](double r, double) { return r * r; });
  const auto G = christoffel(g);
  const std::size_t n = g.lattice().index({5, 5});
  const double r = g.lattice().position(n, 0);
  REQUIRE(G.valid[n]);
  // [k][i][j]
  CHECK(G.at(n)[0 * 4 + 1 * 2 + 1] == doctest::Approx(-r).epsilon(1e-5));
  CHECK(G.at(n)[1 * 4 + 0 * 2 + 1] == doctest::Approx(1 / r).epsilon(1e-5));
  CHECK(G.at(n)[1 * 4 + 1 * 2 + 0] == doctest::Approx(1 / r).epsilon(1e-5));
  CHECK(std::abs(G.at(n)[0]) < 1e-12);
  CHECK(max_riemann(g) < 1e-4);
  CHECK_FALSE(G.valid[g.lattice().index({0, 5})]);
}

TEST_CASE("product of two unit spheres is Einstein with lambda = 1") {
  const double h = 0.01;
  Lattice l({{"a", 1.0, h, 5}, {"b", 0, h, 5}, {"c", 0.8, h, 5}, {"d", 0, h, 5}});
  std::vector<double> c;
  for (std::size_t n = 0; n < l.size(); ++n) {
    const double s1 = std::sin(l.position(n, 0)), s2 = std::sin(l.position(n, 2));
    const double m[16] = {1, 0, 0, 0, 0, s1 * s1, 0, 0, 0, 0, 1, 0, 0, 0, 0, s2 * s2};
    c.insert(c.end(), m, m + 16);
  }
  const MetricGrid g(l, c);
  CHECK(einstein_residual(g, 1.0) < 5e-4);
  CHECK(einstein_residual(g, 0.0) > 0.5);
  CHECK(ricci_asymmetry(g) < 1e-10);
}

TEST_CASE("Laplace-Beltrami on flat and polar grids") {
  const auto flat = diag2({"x", 0, 0.1, 9}, {"y", 0, 0.1, 9}, [](double, double) { return 1.0; },
                          [](double, double) { return 1.0; });
  ScalarGrid u(flat.lattice());
  for (std::size_t n = 0; n < u.values.size(); ++n) {
    const double x = flat.lattice().position(n, 0), y = flat.lattice().position(n, 1);
    u[n] = x * x + 3 * y;
  }
  const auto L = laplace_beltrami(flat, u);
  CHECK(L[flat.lattice().index({4, 4})] == doctest::Approx(2.0));
  CHECK(std::isnan(L[0]));

  // log r is harmonic in the plane
  const auto polar = diag2({"r", 1, 0.01, 11}, {"theta", 0, 0.01, 11}, [](double, double) { return 1.0; },
                           [](double r, double) { return r * r; });
  ScalarGrid v(polar.lattice());
  for (std::size_t n = 0; n < v.values.size(); ++n) v[n] = std::log(polar.lattice().position(n, 0));
  CHECK(std::abs(laplace_beltrami(polar, v)[polar.lattice().index({5, 5})]) < 1e-4);
}

TEST_CASE("closedness of two-forms") {
  Lattice l({{"x", 0, 0.1, 5}, {"y", 0, 0.1, 5}, {"z", 0, 0.1, 5}});
  std::vector<double> w, bad;
  for (std::size_t n = 0; n < l.size(); ++n) {
    const double x = l.position(n, 0), z = l.position(n, 2);
    // x dy^dz is not closed; d(x^2 dy) = 2x dx^dy is
    const double a[9] = {0, 2 * x, 0, -2 * x, 0, 0, 0, 0, 0};
    const double b[9] = {0, 0, 0, 0, 0, x + z, 0, -(x + z), 0};
    w.insert(w.end(), a, a + 9);
    bad.insert(bad.end(), b, b + 9);
  }
  CHECK(exterior_derivative_closedness(TwoFormGrid(l, w)) < 1e-12);
  CHECK(exterior_derivative_closedness(TwoFormGrid(l, bad)) == doctest::Approx(1.0));
}

TEST_CASE("convergence order estimates") {
  const auto e = convergence_order({{0.1, 3e-2}, {0.2, 1.2e-1}, {0.4, 4.8e-1}});
  REQUIRE(e.order);
  CHECK(*e.order == doctest::Approx(2.0));
  const auto f = convergence_order({{0.1, 1e-16}, {0.2, 0}, {0.4, 2e-16}}, 1e-14);
  CHECK(f.below_floor);
  CHECK_FALSE(f.order);
  CHECK_THROWS_AS(convergence_order({{0.1, 1}, {0.2, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(convergence_order({{0.1, 1}, {0.2, 2}, {0.5, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(convergence_order({{0.1, 0}, {0.2, 1}, {0.4, 2}}), std::invalid_argument);
}
