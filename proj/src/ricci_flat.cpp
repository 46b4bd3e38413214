#include "kem/ricci_flat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "kem/curvature.hpp"
#include "kem/ode.hpp"

namespace kem::pde {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_domain(const Domain& d) {
  if (!(d.x1 > d.x0) || !(d.y1 > d.y0) || !std::isfinite(d.x0 + d.x1 + d.y0 + d.y1))
    throw std::invalid_argument("domain must satisfy x0 < x1 and y0 < y1");
}

MetricGrid conformal_grid(const Lattice& l, const std::vector<double>& f) {
  std::vector<double> g(l.size() * 4, 0.0);
  for (std::size_t n = 0; n < l.size(); ++n) {
    g[n * 4] = f[n];
    g[n * 4 + 3] = f[n];
  }
  return MetricGrid(l, std::move(g));
}

}  // namespace

Lattice leaf_lattice(const Domain& d, std::size_t n) {
  check_domain(d);
  if (n < 5) throw std::invalid_argument("need at least 5 nodes per axis");
  const double hx = (d.x1 - d.x0) / static_cast<double>(n - 1), hy = (d.y1 - d.y0) / static_cast<double>(n - 1);
  return Lattice({{"x", d.x0, hx, n}, {"y", d.y0, hy, n}});
}

ScalarGrid sample(const Expression& e, const Lattice& l) {
  ScalarGrid s(l);
  for (std::size_t n = 0; n < l.size(); ++n) s[n] = e.value(l.position(n, 0), l.position(n, 1));
  return s;
}

ScalarGrid hyperbolic_factor(const Domain& d, std::size_t n) {
  if (!(d.y0 > 0)) throw std::invalid_argument("the half-plane factor needs the domain inside y > 0");
  const Lattice l = leaf_lattice(d, n);
  ScalarGrid s(l);
  for (std::size_t k = 0; k < l.size(); ++k) {
    const double y = l.position(k, 1);
    s[k] = 1 / (2 * y * y);
  }
  return s;
}

LeafSpec make_leaf_spec(const Domain& d, std::size_t n, const std::string& h_expr, const std::string& ell_expr,
                        LeafValidation* report) {
  const Lattice l = leaf_lattice(d, n);
  LeafSpec spec{d, n, Expression::parse(h_expr), Expression::parse(ell_expr)};
  if (ell_expr == kDefaultEll && !(d.y0 > 0)) throw std::invalid_argument("the half-plane factor needs the domain inside y > 0");
  LeafValidation v;
  double hscale = 1;
  std::vector<double> ell(l.size());
  for (std::size_t k = 0; k < l.size(); ++k) {
    const double x = l.position(k, 0), y = l.position(k, 1);
    const Jet2 h = spec.h.eval(x, y);
    const Jet2 e = spec.ell.eval(x, y);
    if (!std::isfinite(h.v)) throw std::invalid_argument("h is not finite on the domain");
    if (!(e.v > 0) || !std::isfinite(e.v)) throw std::invalid_argument("the factor l must be positive on the domain");
    ell[k] = e.v;
    hscale = std::max(hscale, std::abs(h.v));
    v.harmonic_residual = std::max(v.harmonic_residual, std::abs(h.xx + h.yy));
    const Jet2 le = log(e);
    const double K = -(le.xx + le.yy) / (2 * e.v);
    v.hyperbolic_residual = std::max(v.hyperbolic_residual, std::abs(K + 2));
  }
  if (v.harmonic_residual > 1e-8 * hscale)
    throw std::invalid_argument("h is not harmonic (max |h_xx + h_yy| = " + std::to_string(v.harmonic_residual) + ")");
  if (v.hyperbolic_residual > 1e-8)
    throw std::invalid_argument("l (dx^2 + dy^2) does not have curvature -2 (max deviation " +
                                std::to_string(v.hyperbolic_residual) + ")");
  v.hyperbolic_residual_fd = max_abs([&] {
    ScalarGrid K = gauss_curvature_2d(conformal_grid(l, ell));
    for (double& x : K.values) x += 2;
    return K;
  }());
  if (report) *report = v;
  return spec;
}

LeafMetric leaf_metric(const LeafSpec& spec) {
  const Lattice l = leaf_lattice(spec.domain, spec.n);
  std::vector<double> f(l.size());
  ScalarGrid K(l);
  for (std::size_t k = 0; k < l.size(); ++k) {
    const double x = l.position(k, 0), y = l.position(k, 1);
    const double h = spec.h.value(x, y), e = spec.ell.value(x, y);
    f[k] = std::exp(-h) / std::sqrt(e);
    K[k] = std::exp(h) * e * std::sqrt(e);
  }
  return {conformal_grid(l, f), K};
}

MetricGrid conformal_multiple(const MetricGrid& g, const ScalarGrid& f) {
  if (!g.lattice().same_shape(f.lattice)) throw std::invalid_argument("factor grid does not match the metric");
  std::vector<double> c = g.components();
  const std::size_t per = g.dim() * g.dim();
  for (std::size_t n = 0; n < g.lattice().size(); ++n)
    for (std::size_t k = 0; k < per; ++k) c[n * per + k] *= f[n];
  return MetricGrid(g.lattice(), std::move(c));
}

LeafPdeReport leaf_pde_residual(const MetricGrid& g, const ScalarGrid& K) {
  if (g.dim() != 2) throw std::invalid_argument("leaf metric must be 2-dimensional");
  LeafPdeReport rep;
  ScalarGrid u(K.lattice, kNaN);
  for (std::size_t n = 0; n < K.values.size(); ++n) {
    if (K[n] > 0)
      u[n] = std::log(K[n]);
    else
      ++rep.excluded;
  }
  const ScalarGrid lap = laplace_beltrami(g, u);
  for (std::size_t n = 0; n < lap.values.size(); ++n) {
    if (!std::isfinite(lap[n]) || !(K[n] > 0)) continue;
    rep.max_residual = std::max(rep.max_residual, std::abs(lap[n] - 6 * K[n]));
    ++rep.evaluated;
  }
  rep.vacuous = rep.evaluated == 0;
  return rep;
}

LeafChecks verify_leaf(const LeafMetric& lm) {
  LeafChecks c;
  const ScalarGrid Kfd = gauss_curvature_2d(lm.metric);
  for (std::size_t n = 0; n < Kfd.values.size(); ++n)
    if (std::isfinite(Kfd[n])) c.curvature_error = std::max(c.curvature_error, std::abs(Kfd[n] - lm.K[n]));
  c.pde = leaf_pde_residual(lm.metric, lm.K);
  const ScalarGrid Kh = gauss_curvature_2d(conformal_multiple(lm.metric, lm.K));
  for (double v : Kh.values)
    if (std::isfinite(v)) c.hyperbolic_error = std::max(c.hyperbolic_error, std::abs(v + 2));
  return c;
}

// ---- surface metrics ----

ConformalSurfaceMetric::ConformalSurfaceMetric(std::function<Jet2(double, double)> factor, Domain d)
    : f_(std::move(factor)), dom_(d) {}

SurfaceJet ConformalSurfaceMetric::jet(double x, double y) const {
  const Jet2 f = f_(x, y);
  SurfaceJet j;
  j.g = {f.v, 0, f.v};
  j.d[0] = {f.x, 0, f.x};
  j.d[1] = {f.y, 0, f.y};
  j.dd[0] = {f.xx, 0, f.xx};
  j.dd[1] = {f.xy, 0, f.xy};
  j.dd[2] = {f.yy, 0, f.yy};
  return j;
}

bool ConformalSurfaceMetric::contains(double x, double y) const {
  return x >= dom_.x0 && x <= dom_.x1 && y >= dom_.y0 && y <= dom_.y1;
}

ExpressionSurfaceMetric::ExpressionSurfaceMetric(Expression g11, Expression g12, Expression g22, Domain d)
    : g11_(std::move(g11)), g12_(std::move(g12)), g22_(std::move(g22)), dom_(d) {}

SurfaceJet ExpressionSurfaceMetric::jet(double x, double y) const {
  const Jet2 c[3] = {g11_.eval(x, y), g12_.eval(x, y), g22_.eval(x, y)};
  SurfaceJet j;
  for (int k = 0; k < 3; ++k) {
    j.g[k] = c[k].v;
    j.d[0][k] = c[k].x;
    j.d[1][k] = c[k].y;
    j.dd[0][k] = c[k].xx;
    j.dd[1][k] = c[k].xy;
    j.dd[2][k] = c[k].yy;
  }
  return j;
}

bool ExpressionSurfaceMetric::contains(double x, double y) const {
  return x >= dom_.x0 && x <= dom_.x1 && y >= dom_.y0 && y <= dom_.y1;
}

namespace {

// fourth-order central differences inside, lower order near the edges
double grid_deriv(const std::vector<double>& v, std::size_t n, std::size_t i, std::size_t count, std::size_t stride,
                  double h) {
  if (i >= 2 && i + 2 < count)
    return (-v[n + 2 * stride] + 8 * v[n + stride] - 8 * v[n - stride] + v[n - 2 * stride]) / (12 * h);
  if (i >= 1 && i + 1 < count) return (v[n + stride] - v[n - stride]) / (2 * h);
  if (i == 0) return (-3 * v[n] + 4 * v[n + stride] - v[n + 2 * stride]) / (2 * h);
  return (3 * v[n] - 4 * v[n - stride] + v[n - 2 * stride]) / (2 * h);
}

}  // namespace

GridSurfaceMetric::GridSurfaceMetric(const MetricGrid& g) : lat_(g.lattice()) {
  if (g.dim() != 2) throw std::invalid_argument("surface metric must be 2-dimensional");
  const std::size_t N = lat_.size();
  const std::size_t comp[3][2] = {{0, 0}, {0, 1}, {1, 1}};
  for (int k = 0; k < 3; ++k) {
    v_[k].resize(N);
    dx_[k].resize(N);
    dy_[k].resize(N);
    dxy_[k].resize(N);
    for (std::size_t n = 0; n < N; ++n) v_[k][n] = g.g(n, comp[k][0], comp[k][1]);
  }
  const Axis &ax = lat_.axis(0), &ay = lat_.axis(1);
  for (int k = 0; k < 3; ++k) {
    for (std::size_t n = 0; n < N; ++n) {
      dx_[k][n] = grid_deriv(v_[k], n, lat_.coord(n, 0), ax.count, lat_.stride(0), ax.step);
      dy_[k][n] = grid_deriv(v_[k], n, lat_.coord(n, 1), ay.count, lat_.stride(1), ay.step);
    }
    for (std::size_t n = 0; n < N; ++n)
      dxy_[k][n] = grid_deriv(dx_[k], n, lat_.coord(n, 1), ay.count, lat_.stride(1), ay.step);
  }
}

bool GridSurfaceMetric::contains(double x, double y) const {
  const Axis &ax = lat_.axis(0), &ay = lat_.axis(1);
  return x >= ax.min && x <= ax.max() && y >= ay.min && y <= ay.max();
}

SurfaceJet GridSurfaceMetric::jet(double x, double y) const {
  const Axis &ax = lat_.axis(0), &ay = lat_.axis(1);
  auto cell = [](const Axis& a, double p, double& s) {
    double f = (p - a.min) / a.step;
    std::size_t i = static_cast<std::size_t>(std::clamp(std::floor(f), 0.0, static_cast<double>(a.count - 2)));
    s = f - static_cast<double>(i);  // may leave [0,1] when extrapolating
    return i;
  };
  double s, t;
  const std::size_t i = cell(ax, x, s), j = cell(ay, y, t);
  const double hx = ax.step, hy = ay.step;
  // Hermite basis and derivatives: [value, first, second]
  auto basis = [](double u, double out[4][3]) {
    out[0][0] = 2 * u * u * u - 3 * u * u + 1, out[0][1] = 6 * u * u - 6 * u, out[0][2] = 12 * u - 6;
    out[1][0] = -2 * u * u * u + 3 * u * u, out[1][1] = -6 * u * u + 6 * u, out[1][2] = -12 * u + 6;
    out[2][0] = u * u * u - 2 * u * u + u, out[2][1] = 3 * u * u - 4 * u + 1, out[2][2] = 6 * u - 4;
    out[3][0] = u * u * u - u * u, out[3][1] = 3 * u * u - 2 * u, out[3][2] = 6 * u - 2;
  };
  double Bs[4][3], Bt[4][3];
  basis(s, Bs);
  basis(t, Bt);
  SurfaceJet jt;
  for (int k = 0; k < 3; ++k) {
    double acc[3][3] = {};  // [order in x][order in y]
    for (int ci = 0; ci < 2; ++ci)
      for (int cj = 0; cj < 2; ++cj) {
        const std::size_t n = (i + ci) * lat_.stride(0) + (j + cj) * lat_.stride(1);
        const double terms[4] = {v_[k][n], hx * dx_[k][n], hy * dy_[k][n], hx * hy * dxy_[k][n]};
        const int vs[4] = {ci, 2 + ci, ci, 2 + ci};  // s-basis: value or derivative slot
        const int vt[4] = {cj, cj, 2 + cj, 2 + cj};
        for (int m = 0; m < 4; ++m)
          for (int ox = 0; ox < 3; ++ox)
            for (int oy = 0; ox + oy < 3; ++oy) acc[ox][oy] += terms[m] * Bs[vs[m]][ox] * Bt[vt[m]][oy];
      }
    jt.g[k] = acc[0][0];
    jt.d[0][k] = acc[1][0] / hx;
    jt.d[1][k] = acc[0][1] / hy;
    jt.dd[0][k] = acc[2][0] / (hx * hx);
    jt.dd[1][k] = acc[1][1] / (hx * hy);
    jt.dd[2][k] = acc[0][2] / (hy * hy);
  }
  return jt;
}

std::unique_ptr<SurfaceMetric> leaf_surface_metric(const LeafSpec& spec) {
  Expression h = spec.h, ell = spec.ell;
  return std::make_unique<ConformalSurfaceMetric>(
      [h, ell](double x, double y) { return exp(-h.eval(x, y)) * pow(ell.eval(x, y), -0.5); }, spec.domain);
}

// ---- geodesic parallel coordinates ----

namespace {

struct Connection {
  double gi[2][2];
  double gam[2][2][2];      // Gamma^k_ij
  double dgam[2][2][2][2];  // [m][k][i][j] = d_m Gamma^k_ij
};

inline int ci(int i, int j) { return i + j; }  // (00,01,11) -> (0,1,2)

Connection connection(const SurfaceJet& J) {
  Connection C{};
  const double g00 = J.g[0], g01 = J.g[1], g11 = J.g[2];
  const double det = g00 * g11 - g01 * g01;
  C.gi[0][0] = g11 / det;
  C.gi[0][1] = C.gi[1][0] = -g01 / det;
  C.gi[1][1] = g00 / det;
  auto dg = [&](int m, int i, int j) { return J.d[m][ci(i, j)]; };
  auto ddg = [&](int m, int l, int i, int j) { return J.dd[m + l][ci(i, j)]; };
  double T[2][2][2];  // T_lij
  for (int l = 0; l < 2; ++l)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) T[l][i][j] = dg(i, l, j) + dg(j, l, i) - dg(l, i, j);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) C.gam[k][i][j] = 0.5 * (C.gi[k][0] * T[0][i][j] + C.gi[k][1] * T[1][i][j]);
  for (int m = 0; m < 2; ++m) {
    double dgi[2][2];
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l) {
        double s = 0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) s -= C.gi[k][a] * dg(m, a, b) * C.gi[b][l];
        dgi[k][l] = s;
      }
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          double s = 0;
          for (int l = 0; l < 2; ++l) {
            const double dT = ddg(m, i, l, j) + ddg(m, j, l, i) - ddg(m, l, i, j);
            s += dgi[k][l] * T[l][i][j] + C.gi[k][l] * dT;
          }
          C.dgam[m][k][i][j] = 0.5 * s;
        }
  }
  return C;
}

// state: x, y, vx, vy, Jx, Jy, Wx, Wy
ode::Vec<8> geodesic_rhs(const SurfaceMetric& g, const ode::Vec<8>& z) {
  const Connection C = connection(g.jet(z[0], z[1]));
  const double v[2] = {z[2], z[3]}, J[2] = {z[4], z[5]}, W[2] = {z[6], z[7]};
  ode::Vec<8> out{};
  out[0] = v[0];
  out[1] = v[1];
  out[4] = W[0];
  out[5] = W[1];
  for (int k = 0; k < 2; ++k) {
    double acc = 0, jac = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        acc -= C.gam[k][i][j] * v[i] * v[j];
        jac -= 2 * C.gam[k][i][j] * W[i] * v[j];
        for (int l = 0; l < 2; ++l) jac -= C.dgam[l][k][i][j] * J[l] * v[i] * v[j];
      }
    out[2 + k] = acc;
    out[6 + k] = jac;
  }
  return out;
}

double norm_sq(const SurfaceJet& J, double u0, double u1) { return J.g[0] * u0 * u0 + 2 * J.g[1] * u0 * u1 + J.g[2] * u1 * u1; }

}  // namespace

CProfile geodesic_parallel_profile(const SurfaceMetric& g, const ProfileRequest& req) {
  if (req.n_X < 5 || req.n_y < 5) throw std::invalid_argument("profile needs at least 5 nodes per axis");
  if (!(req.X_step > 0) || !(req.y_step > 0) || req.substeps < 1) throw std::invalid_argument("bad profile spacing");
  const Lattice lat({{"x", 0.0, req.X_step, req.n_X}, {"y", req.y_min, req.y_step, req.n_y}});
  CProfile cp;
  cp.c = ScalarGrid(lat, kNaN);
  cp.x_of = ScalarGrid(lat, kNaN);
  cp.y_of = ScalarGrid(lat, kNaN);
  cp.requested_X = req.n_X;
  std::size_t covered = req.n_X;
  const double ds = std::numbers::sqrt2 * req.X_step / req.substeps;
  auto f = [&](double, const ode::Vec<8>& z) { return geodesic_rhs(g, z); };
  for (std::size_t j = 0; j < req.n_y; ++j) {
    const double Y = lat.axis(1).at(j);
    if (!g.contains(req.x_base, Y)) throw std::invalid_argument("base curve leaves the metric domain");
    const SurfaceJet J0 = g.jet(req.x_base, Y);
    const Connection C0 = connection(J0);
    // unit normal n^i = g^{i0}/sqrt(g^{00}) and its y-derivative
    const double s00 = std::sqrt(C0.gi[0][0]);
    double dgi[2][2];
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l) {
        double s = 0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) s -= C0.gi[k][a] * J0.d[1][ci(a, b)] * C0.gi[b][l];
        dgi[k][l] = s;
      }
    ode::Vec<8> z{req.x_base, Y, C0.gi[0][0] / s00, C0.gi[1][0] / s00, 0, 1, 0, 0};
    for (int i = 0; i < 2; ++i) z[6 + i] = dgi[i][0] / s00 - 0.5 * C0.gi[i][0] * dgi[0][0] / (s00 * s00 * s00);
    const double j0 = std::sqrt(norm_sq(J0, 0, 1));
    std::size_t reached = 0;
    std::string why;
    for (std::size_t i = 0; i < req.n_X; ++i) {
      if (i > 0) {
        bool ok = true;
        for (int st = 0; st < req.substeps && ok; ++st) {
          z = ode::rk4_step<8>(f, 0.0, z, ds);
          if (!std::isfinite(z[0]) || !std::isfinite(z[1]) || !g.contains(z[0], z[1])) {
            ok = false;
            why = "geodesic left the domain";
          }
        }
        if (!ok) break;
      }
      const SurfaceJet Jz = g.jet(z[0], z[1]);
      const double jn = std::sqrt(norm_sq(Jz, z[4], z[5]));
      if (!(jn > 1e-8 * j0)) {
        why = "caustic (c -> 0)";
        break;
      }
      const std::size_t node = lat.index({i, j});
      cp.c[node] = jn / std::numbers::sqrt2;
      cp.x_of[node] = z[0];
      cp.y_of[node] = z[1];
      reached = i + 1;
    }
    if (reached < covered) {
      covered = reached;
      cp.truncation = why;
    }
  }
  if (covered < 5) throw std::runtime_error("profile coverage too small (" + std::to_string(covered) + " nodes): " + cp.truncation);
  cp.covered_X = covered;
  if (covered < req.n_X) {
    const Lattice small({{"x", 0.0, req.X_step, covered}, lat.axis(1)});
    auto shrink = [&](const ScalarGrid& s) {
      ScalarGrid o(small);
      for (std::size_t n = 0; n < small.size(); ++n) o[n] = s[lat.index({small.coord(n, 0), small.coord(n, 1)})];
      return o;
    };
    cp.c = shrink(cp.c);
    cp.x_of = shrink(cp.x_of);
    cp.y_of = shrink(cp.y_of);
  }
  return cp;
}

CProfile profile_from_function(const Axis& X, const Axis& Y, const std::function<double(double, double)>& c) {
  const Lattice lat({X, Y});
  CProfile cp;
  cp.c = ScalarGrid(lat);
  cp.x_of = ScalarGrid(lat, kNaN);
  cp.y_of = ScalarGrid(lat, kNaN);
  for (std::size_t n = 0; n < lat.size(); ++n) {
    cp.c[n] = c(lat.position(n, 0), lat.position(n, 1));
    if (!(cp.c[n] > 0)) throw std::invalid_argument("profile c must be positive");
  }
  cp.requested_X = cp.covered_X = X.count;
  return cp;
}

double profile_pullback_error(const SurfaceMetric& g, const CProfile& cp) {
  const Lattice& L = cp.c.lattice;
  double m = 0;
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!L.interior(n, 1)) continue;
    const std::size_t sx = L.stride(0), sy = L.stride(1);
    const double hX = L.axis(0).step, hY = L.axis(1).step;
    const double xX = (cp.x_of[n + sx] - cp.x_of[n - sx]) / (2 * hX), yX = (cp.y_of[n + sx] - cp.y_of[n - sx]) / (2 * hX);
    const double xY = (cp.x_of[n + sy] - cp.x_of[n - sy]) / (2 * hY), yY = (cp.y_of[n + sy] - cp.y_of[n - sy]) / (2 * hY);
    const SurfaceJet J = g.jet(cp.x_of[n], cp.y_of[n]);
    const double gXX = norm_sq(J, xX, yX), gYY = norm_sq(J, xY, yY);
    const double gXY = J.g[0] * xX * xY + J.g[1] * (xX * yY + yX * xY) + J.g[2] * yX * yY;
    const double c = cp.c[n];
    m = std::max({m, std::abs(gXX - 2), std::abs(gXY), std::abs(gYY - 2 * c * c)});
  }
  return m;
}

// ---- reduced fields and residuals ----

ScalarGrid crop(const ScalarGrid& s, std::size_t layers) {
  const Lattice& L = s.lattice;
  std::vector<Axis> axes;
  for (std::size_t k = 0; k < L.dims(); ++k) {
    Axis a = L.axis(k);
    if (a.count <= 2 * layers) throw std::invalid_argument("grid too small to crop");
    a.min = a.at(layers);
    a.count -= 2 * layers;
    axes.push_back(a);
  }
  const Lattice C(axes);
  ScalarGrid out(C);
  std::vector<std::size_t> idx(L.dims());
  for (std::size_t n = 0; n < C.size(); ++n) {
    for (std::size_t k = 0; k < L.dims(); ++k) idx[k] = C.coord(n, k) + layers;
    out[n] = s[L.index(idx)];
  }
  return out;
}

ReducedFields reduced_fields(const CProfile& cp) {
  const ScalarGrid& c = cp.c;
  const Lattice& L = c.lattice;
  const std::size_t sx = L.stride(0), sy = L.stride(1);
  const double hx = L.axis(0).step, hy = L.axis(1).step;
  ScalarGrid cxx(L, kNaN), w(L, kNaN);
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!L.interior(n, 1)) continue;
    cxx[n] = (c[n + sx] - 2 * c[n] + c[n - sx]) / (hx * hx);
    if (cxx[n] < 0) w[n] = std::log(-cxx[n] / c[n]);
  }
  ScalarGrid Lf(L, kNaN), R(L, kNaN), P(L, kNaN), Q(L, kNaN);
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!L.interior(n, 2)) continue;
    const double cx = (c[n + sx] - c[n - sx]) / (2 * hx);
    const double wx = (w[n + sx] - w[n - sx]) / (2 * hx), wy = (w[n + sy] - w[n - sy]) / (2 * hy);
    if (!std::isfinite(w[n]) || !std::isfinite(wx) || !std::isfinite(wy)) continue;
    Lf[n] = -cx / (2 * c[n]);
    R[n] = std::sqrt(-cxx[n] / c[n]);
    P[n] = wx / 2 + cx / c[n];
    Q[n] = -wy / (2 * c[n]);
  }
  ReducedFields f{crop(Lf, 2), crop(R, 2), crop(P, 2), crop(Q, 2), 0};
  for (double v : f.R.values)
    if (!std::isfinite(v)) ++f.excluded;
  return f;
}

double Sys2Residuals::max() const { return std::max({r_x, r_y, l_x, p_x, second}); }

Sys2Residuals sys2_residuals(const ReducedFields& f, const CProfile& cp) {
  const ScalarGrid c = crop(cp.c, 2);
  const Lattice& L = f.R.lattice;
  if (!L.same_shape(c.lattice)) throw std::invalid_argument("fields do not match the profile");
  const std::size_t sx = L.stride(0), sy = L.stride(1);
  const double hx = L.axis(0).step, hy = L.axis(1).step;
  Sys2Residuals r;
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!L.interior(n, 1)) continue;
    auto dx = [&](const ScalarGrid& g) { return (g[n + sx] - g[n - sx]) / (2 * hx); };
    auto dy = [&](const ScalarGrid& g) { return (g[n + sy] - g[n - sy]) / (2 * hy); };
    const double R = f.R[n], Lv = f.L[n], P = f.P[n], Q = f.Q[n], cv = c[n];
    const double lr = std::log(R);
    const double lr_xp = std::log(f.R[n + sx]), lr_xm = std::log(f.R[n - sx]);
    const double lr_yp = std::log(f.R[n + sy]), lr_ym = std::log(f.R[n - sy]);
    const double lr_x = (lr_xp - lr_xm) / (2 * hx), lr_y = (lr_yp - lr_ym) / (2 * hy);
    const double lr_xx = (lr_xp - 2 * lr + lr_xm) / (hx * hx), lr_yy = (lr_yp - 2 * lr + lr_ym) / (hy * hy);
    const double c_y = dy(c);
    const double vals[5] = {
        dx(f.R) - R * (P + 2 * Lv),
        dy(f.R) / cv + R * Q,
        dx(f.L) - 2 * Lv * Lv - R * R / 2,
        dx(f.P) - dy(f.Q) / cv - 2 * Lv * P - 2 * R * R,
        3 * R * R - (lr_xx + lr_yy / (cv * cv) - c_y / (cv * cv * cv) * lr_y - 2 * Lv * lr_x)};
    bool finite = true;
    for (double v : vals) finite = finite && std::isfinite(v);
    if (!finite) continue;
    r.r_x = std::max(r.r_x, std::abs(vals[0]));
    r.r_y = std::max(r.r_y, std::abs(vals[1]));
    r.l_x = std::max(r.l_x, std::abs(vals[2]));
    r.p_x = std::max(r.p_x, std::abs(vals[3]));
    r.second = std::max(r.second, std::abs(vals[4]));
    ++r.evaluated;
  }
  return r;
}

VecSysCoefficients vecsys_coefficients(const ReducedFields& f) {
  const double s2 = std::numbers::sqrt2;
  VecSysCoefficients k{ScalarGrid(f.R.lattice), ScalarGrid(f.R.lattice), ScalarGrid(f.R.lattice),
                       ScalarGrid(f.R.lattice)};
  for (std::size_t n = 0; n < f.R.values.size(); ++n) {
    k.alpha[n] = f.R[n] / s2;
    k.beta[n] = f.Q[n] / 2;
    k.nu[n] = f.P[n] / 2 + f.R[n] / s2;
    k.chi[n] = -f.P[n] / 2 + f.R[n] / s2;
  }
  return k;
}

namespace {

using Mat2 = std::array<double, 4>;  // row-major

// exp of a trace-free 2x2 matrix [[p, q], [r, -p]]
Mat2 expm_tracefree(double p, double q, double r) {
  const double d = p * p + q * r;
  double C, S;
  if (std::abs(d) < 1e-8) {
    C = 1 + d / 2 + d * d / 24;
    S = 1 + d / 6 + d * d / 120;
  } else if (d > 0) {
    const double s = std::sqrt(d);
    C = std::cosh(s);
    S = std::sinh(s) / s;
  } else {
    const double s = std::sqrt(-d);
    C = std::cos(s);
    S = std::sin(s) / s;
  }
  return {C + S * p, S * q, S * r, C - S * p};
}

void apply(const Mat2& m, double& u, double& v) {
  const double nu = m[0] * u + m[1] * v, nv = m[2] * u + m[3] * v;
  u = nu;
  v = nv;
}

}  // namespace

VecSysSolution integrate_vecsys(const VecSysCoefficients& k, const CProfile& cp, const VecSysOptions& opt) {
  const Lattice& L = k.alpha.lattice;
  ScalarGrid c = crop(cp.c, 2);
  if (!L.same_shape(c.lattice)) throw std::invalid_argument("coefficients do not match the profile");
  for (const ScalarGrid* g : {&k.alpha, &k.beta, &k.nu, &k.chi})
    for (double v : g->values)
      if (!std::isfinite(v)) throw std::runtime_error("shear-free nodes (c_xx >= 0) inside the working domain");
  const auto [a0, b0, r0, s0] = opt.init;
  const double det0 = a0 * s0 - r0 * b0;
  if (det0 == 0) throw std::invalid_argument("initial data must have as - rb != 0");
  const std::size_t nx = L.axis(0).count, ny = L.axis(1).count;
  const double hx = L.axis(0).step, hy = L.axis(1).step;
  VecSysSolution sol{ScalarGrid(L), ScalarGrid(L), ScalarGrid(L), ScalarGrid(L), c, det0, 0, 0};
  auto at = [&](std::size_t i, std::size_t j) { return L.index({i, j}); };
  sol.a[at(0, 0)] = a0;
  sol.b[at(0, 0)] = b0;
  sol.r[at(0, 0)] = r0;
  sol.s[at(0, 0)] = s0;
  // along x = x0 in y
  for (std::size_t j = 0; j + 1 < ny; ++j) {
    const std::size_t n = at(0, j), m = at(0, j + 1);
    const double q = hy * 0.5 * (c[n] * k.nu[n] + c[m] * k.nu[m]);
    const double r = hy * 0.5 * (c[n] * k.chi[n] + c[m] * k.chi[m]);
    const Mat2 E = expm_tracefree(0, q, r);
    double a = sol.a[n], rr = sol.r[n], b = sol.b[n], s = sol.s[n];
    apply(E, a, rr);
    apply(E, b, s);
    sol.a[m] = a, sol.r[m] = rr, sol.b[m] = b, sol.s[m] = s;
  }
  // along every y-line in x
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const std::size_t n = at(i, j), m = at(i + 1, j);
      const double p = hx * 0.5 * (k.alpha[n] + k.alpha[m]);
      const double q = hx * 0.5 * (k.beta[n] + k.beta[m]);
      const Mat2 E = expm_tracefree(p, q, -q);
      double a = sol.a[n], rr = sol.r[n], b = sol.b[n], s = sol.s[n];
      apply(E, a, rr);
      apply(E, b, s);
      sol.a[m] = a, sol.r[m] = rr, sol.b[m] = b, sol.s[m] = s;
    }
  for (std::size_t n = 0; n < L.size(); ++n)
    sol.det_spread = std::max(sol.det_spread, std::abs(sol.a[n] * sol.s[n] - sol.r[n] * sol.b[n] - det0));
  // y-equations checked with central differences
  const std::size_t sy = L.stride(1);
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!L.interior(n, 1)) continue;
    auto dy = [&](const ScalarGrid& g) { return (g[n + sy] - g[n - sy]) / (2 * hy); };
    const double cn = c[n] * k.nu[n], cc = c[n] * k.chi[n];
    sol.compat_residual = std::max({sol.compat_residual, std::abs(dy(sol.a) - cn * sol.r[n]),
                                    std::abs(dy(sol.r) - cc * sol.a[n]), std::abs(dy(sol.b) - cn * sol.s[n]),
                                    std::abs(dy(sol.s) - cc * sol.b[n])});
  }
  if (sol.compat_residual > opt.compat_threshold)
    throw std::runtime_error("vec-sys compatibility residual " + std::to_string(sol.compat_residual) +
                             " exceeds threshold; the reduced fields do not satisfy the PDE system");
  return sol;
}

FourMetric assemble_four_metric(const VecSysSolution& v, std::size_t n_uv, double h_uv) {
  const Lattice& L2 = v.a.lattice;
  if (h_uv <= 0) h_uv = L2.axis(0).step;
  const Lattice L({L2.axis(0), L2.axis(1), {"u", 0.0, h_uv, n_uv}, {"v", 0.0, h_uv, n_uv}});
  std::vector<double> g(L.size() * 16, 0.0), w(L.size() * 16, 0.0);
  for (std::size_t n = 0; n < L.size(); ++n) {
    const std::size_t m = L2.index({L.coord(n, 0), L.coord(n, 1)});
    const double a = v.a[m], b = v.b[m], r = v.r[m], s = v.s[m], c = v.c[m];
    const double det = a * s - r * b, id2 = 1 / (det * det);
    double* G = g.data() + n * 16;
    double* W = w.data() + n * 16;
    G[0] = 2;
    G[5] = 2 * c * c;
    G[10] = (s * s + b * b) * id2;
    G[11] = G[14] = -(s * r + a * b) * id2;
    G[15] = (r * r + a * a) * id2;
    W[1] = 2 * c;
    W[4] = -W[1];
    W[11] = 1 / det;
    W[14] = -W[11];
  }
  return {MetricGrid(L, std::move(g)), TwoFormGrid(L, std::move(w))};
}

Construction construct(const CProfile& cp, const VecSysOptions& opt) {
  Construction c;
  c.fields = reduced_fields(cp);
  c.sys2 = sys2_residuals(c.fields, cp);
  c.vec = integrate_vecsys(vecsys_coefficients(c.fields), cp, opt);
  c.four = assemble_four_metric(c.vec);
  return c;
}

// ---- serialization ----

json to_json(const CProfile& cp) {
  return {{"schema", 1},
          {"kind", "cprofile"},
          {"c", to_json(cp.c)},
          {"x_of", to_json(cp.x_of)},
          {"y_of", to_json(cp.y_of)},
          {"requested_X", cp.requested_X},
          {"covered_X", cp.covered_X},
          {"truncation", cp.truncation}};
}

CProfile profile_from_json(const json& j) {
  if (j.value("kind", "") != "cprofile") throw std::invalid_argument("not a cprofile document");
  CProfile cp;
  cp.c = scalar_from_json(j.at("c"));
  cp.x_of = scalar_from_json(j.at("x_of"));
  cp.y_of = scalar_from_json(j.at("y_of"));
  cp.requested_X = j.value("requested_X", cp.c.lattice.axis(0).count);
  cp.covered_X = j.value("covered_X", cp.c.lattice.axis(0).count);
  cp.truncation = j.value("truncation", "");
  return cp;
}

json to_json(const LeafSpec& s) {
  return {{"schema", 1},
          {"kind", "leaf_spec"},
          {"domain", {s.domain.x0, s.domain.x1, s.domain.y0, s.domain.y1}},
          {"n", s.n},
          {"h", s.h.source()},
          {"ell", s.ell.source()}};
}

LeafSpec leaf_spec_from_json(const json& j) {
  if (j.value("kind", "") != "leaf_spec") throw std::invalid_argument("not a leaf_spec document");
  const auto d = j.at("domain").get<std::vector<double>>();
  if (d.size() != 4) throw std::invalid_argument("domain needs four numbers");
  return make_leaf_spec({d[0], d[1], d[2], d[3]}, j.at("n").get<std::size_t>(), j.at("h").get<std::string>(),
                        j.at("ell").get<std::string>());
}

}  // namespace kem::pde
