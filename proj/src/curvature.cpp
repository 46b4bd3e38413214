#include "kem/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kem {

namespace {

constexpr std::size_t kMax = 4;

// In-place Gauss-Jordan with partial pivoting; returns the determinant.
double invert(const double* a, std::size_t d, double* inv) {
  double m[kMax][2 * kMax];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      m[i][j] = a[i * d + j];
      m[i][d + j] = i == j ? 1.0 : 0.0;
    }
  double det = 1;
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
    if (m[p][c] == 0) return 0;
    if (p != c) {
      for (std::size_t j = 0; j < 2 * d; ++j) std::swap(m[p][j], m[c][j]);
      det = -det;
    }
    const double piv = m[c][c];
    det *= piv;
    for (std::size_t j = 0; j < 2 * d; ++j) m[c][j] /= piv;
    for (std::size_t r = 0; r < d; ++r) {
      if (r == c) continue;
      const double f = m[r][c];
      if (f == 0) continue;
      for (std::size_t j = 0; j < 2 * d; ++j) m[r][j] -= f * m[c][j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) inv[i * d + j] = m[i][d + j];
  return det;
}

// Metric, inverse and first/second derivatives at one interior node.
struct Jet {
  std::size_t d = 0;
  double g[kMax][kMax]{};
  double gi[kMax][kMax]{};
  double det = 0;
  double dg[kMax][kMax][kMax]{};            // [k][i][j] = d_k g_ij
  double ddg[kMax][kMax][kMax][kMax]{};     // [k][l][i][j] = d_k d_l g_ij
  double gam[kMax][kMax][kMax]{};           // Gamma^k_ij
  double gam1[kMax][kMax][kMax]{};          // Gamma_{k,ij}
};

void build_jet(const MetricGrid& G, std::size_t n, Jet& J) {
  const Lattice& L = G.lattice();
  const std::size_t d = G.dim();
  J.d = d;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) J.g[i][j] = G.g(n, i, j);
  double flat[kMax * kMax] = {}, inv[kMax * kMax] = {};
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) flat[i * d + j] = J.g[i][j];
  J.det = invert(flat, d, inv);
  if (J.det == 0) throw std::runtime_error("singular metric at node " + std::to_string(n));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) J.gi[i][j] = inv[i * d + j];

  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t sk = L.stride(k);
    const double hk = L.axis(k).step;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        const double gp = G.g(n + sk, i, j), gm = G.g(n - sk, i, j);
        J.dg[k][i][j] = J.dg[k][j][i] = (gp - gm) / (2 * hk);
        J.ddg[k][k][i][j] = J.ddg[k][k][j][i] = (gp - 2 * J.g[i][j] + gm) / (hk * hk);
      }
    for (std::size_t l = k + 1; l < d; ++l) {
      const std::size_t sl = L.stride(l);
      const double hl = L.axis(l).step;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
          const double v = (G.g(n + sk + sl, i, j) - G.g(n + sk - sl, i, j) - G.g(n - sk + sl, i, j) +
                            G.g(n - sk - sl, i, j)) /
                           (4 * hk * hl);
          J.ddg[k][l][i][j] = J.ddg[k][l][j][i] = J.ddg[l][k][i][j] = J.ddg[l][k][j][i] = v;
        }
    }
  }
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) J.gam1[k][i][j] = 0.5 * (J.dg[i][k][j] + J.dg[j][k][i] - J.dg[k][i][j]);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0;
        for (std::size_t l = 0; l < d; ++l) s += J.gi[k][l] * J.gam1[l][i][j];
        J.gam[k][i][j] = s;
      }
}

double riemann_component(const Jet& J, std::size_t a, std::size_t b, std::size_t c, std::size_t e) {
  double r = 0.5 * (J.ddg[b][c][a][e] + J.ddg[a][e][b][c] - J.ddg[a][c][b][e] - J.ddg[b][e][a][c]);
  for (std::size_t f = 0; f < J.d; ++f) r += J.gam[f][b][c] * J.gam1[f][a][e] - J.gam[f][b][e] * J.gam1[f][a][c];
  return r;
}

void ricci_at(const Jet& J, double ric[kMax][kMax]) {
  const std::size_t d = J.d;
  for (std::size_t b = 0; b < d; ++b)
    for (std::size_t e = 0; e < d; ++e) {
      double s = 0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t c = 0; c < d; ++c)
          if (J.gi[a][c] != 0) s += J.gi[a][c] * riemann_component(J, a, b, c, e);
      ric[b][e] = s;
    }
}

TensorField make_field(const MetricGrid& g, std::size_t rank) {
  TensorField f;
  f.lattice = g.lattice();
  f.rank = rank;
  f.dim = g.dim();
  f.data.assign(f.lattice.size() * f.per_node(), std::numeric_limits<double>::quiet_NaN());
  f.valid.assign(f.lattice.size(), 0);
  return f;
}

}  // namespace

TensorField christoffel(const MetricGrid& g) {
  TensorField f = make_field(g, 3);
  const std::size_t d = g.dim();
  Jet J;
  for (std::size_t n = 0; n < g.lattice().size(); ++n) {
    if (!g.lattice().interior(n, 1)) continue;
    build_jet(g, n, J);
    double* out = f.at(n);
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out[(k * d + i) * d + j] = J.gam[k][i][j];
    f.valid[n] = 1;
  }
  return f;
}

TensorField riemann(const MetricGrid& g) {
  TensorField f = make_field(g, 4);
  const std::size_t d = g.dim();
  Jet J;
  for (std::size_t n = 0; n < g.lattice().size(); ++n) {
    if (!g.lattice().interior(n, 1)) continue;
    build_jet(g, n, J);
    double* out = f.at(n);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        for (std::size_t c = 0; c < d; ++c)
          for (std::size_t e = 0; e < d; ++e) out[((a * d + b) * d + c) * d + e] = riemann_component(J, a, b, c, e);
    f.valid[n] = 1;
  }
  return f;
}

TensorField ricci(const MetricGrid& g) {
  TensorField f = make_field(g, 2);
  const std::size_t d = g.dim();
  Jet J;
  double ric[kMax][kMax];
  for (std::size_t n = 0; n < g.lattice().size(); ++n) {
    if (!g.lattice().interior(n, 1)) continue;
    build_jet(g, n, J);
    ricci_at(J, ric);
    double* out = f.at(n);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] = ric[i][j];
    f.valid[n] = 1;
  }
  return f;
}

double einstein_residual(const MetricGrid& g, double lambda) {
  const TensorField ric = ricci(g);
  const std::size_t d = g.dim();
  double m = 0;
  for (std::size_t n = 0; n < g.lattice().size(); ++n) {
    if (!ric.valid[n]) continue;
    const double* r = ric.at(n);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) m = std::max(m, std::abs(r[i * d + j] - lambda * g.g(n, i, j)));
  }
  return m;
}

double max_riemann(const MetricGrid& g) {
  const TensorField rm = riemann(g);
  double m = 0;
  for (std::size_t n = 0; n < g.lattice().size(); ++n) {
    if (!rm.valid[n]) continue;
    const double* r = rm.at(n);
    for (std::size_t k = 0; k < rm.per_node(); ++k) m = std::max(m, std::abs(r[k]));
  }
  return m;
}

double ricci_asymmetry(const MetricGrid& g) {
  const TensorField ric = ricci(g);
  const std::size_t d = g.dim();
  double asym = 0, scale = 0;
  for (std::size_t n = 0; n < g.lattice().size(); ++n) {
    if (!ric.valid[n]) continue;
    const double* r = ric.at(n);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        asym = std::max(asym, std::abs(r[i * d + j] - r[j * d + i]));
        scale = std::max(scale, std::abs(r[i * d + j]));
      }
  }
  return scale > 0 ? asym / scale : 0.0;
}

ScalarGrid gauss_curvature_2d(const MetricGrid& g) {
  if (g.dim() != 2) throw std::invalid_argument("gauss_curvature_2d needs a 2-dimensional metric");
  ScalarGrid K(g.lattice(), std::numeric_limits<double>::quiet_NaN());
  Jet J;
  for (std::size_t n = 0; n < g.lattice().size(); ++n) {
    if (!g.lattice().interior(n, 1)) continue;
    build_jet(g, n, J);
    K[n] = riemann_component(J, 0, 1, 0, 1) / J.det;
  }
  return K;
}

ScalarGrid laplace_beltrami(const MetricGrid& g, const ScalarGrid& u) {
  const Lattice& L = g.lattice();
  if (!L.same_shape(u.lattice)) throw std::invalid_argument("scalar grid does not match the metric lattice");
  const std::size_t d = g.dim();
  // sqrt(det g) g^ij at every node
  std::vector<double> dens(L.size() * d * d), vol(L.size());
  double flat[kMax * kMax], inv[kMax * kMax];
  for (std::size_t n = 0; n < L.size(); ++n) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) flat[i * d + j] = g.g(n, i, j);
    const double det = invert(flat, d, inv);
    vol[n] = std::sqrt(det);
    for (std::size_t k = 0; k < d * d; ++k) dens[n * d * d + k] = vol[n] * inv[k];
  }
  ScalarGrid out(L, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!L.interior(n, 1)) continue;
    double du[kMax], ddu[kMax][kMax];
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t si = L.stride(i);
      const double hi = L.axis(i).step;
      du[i] = (u[n + si] - u[n - si]) / (2 * hi);
      ddu[i][i] = (u[n + si] - 2 * u[n] + u[n - si]) / (hi * hi);
      for (std::size_t j = i + 1; j < d; ++j) {
        const std::size_t sj = L.stride(j);
        const double hj = L.axis(j).step;
        ddu[i][j] = ddu[j][i] =
            (u[n + si + sj] - u[n + si - sj] - u[n - si + sj] + u[n - si - sj]) / (4 * hi * hj);
      }
    }
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t si = L.stride(i);
      const double hi = L.axis(i).step;
      for (std::size_t j = 0; j < d; ++j) {
        const double gij = dens[n * d * d + i * d + j] / vol[n];
        const double ddens = (dens[(n + si) * d * d + i * d + j] - dens[(n - si) * d * d + i * d + j]) / (2 * hi);
        s += gij * ddu[i][j] + ddens / vol[n] * du[j];
      }
    }
    out[n] = s;
  }
  return out;
}

double exterior_derivative_closedness(const TwoFormGrid& w) {
  const Lattice& L = w.lattice();
  const std::size_t d = w.dim();
  double m = 0;
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!L.interior(n, 1)) continue;
    auto dw = [&](std::size_t k, std::size_t i, std::size_t j) {
      const std::size_t sk = L.stride(k);
      return (w.w(n + sk, i, j) - w.w(n - sk, i, j)) / (2 * L.axis(k).step);
    };
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j)
        for (std::size_t k = j + 1; k < d; ++k) m = std::max(m, std::abs(dw(i, j, k) + dw(j, k, i) + dw(k, i, j)));
  }
  return m;
}

ConvergenceEstimate convergence_order(const std::vector<std::pair<double, double>>& hv, double floor) {
  if (hv.size() < 3) throw std::invalid_argument("convergence_order needs at least 3 spacings");
  for (std::size_t i = 0; i < hv.size(); ++i)
    if (!(hv[i].first > 0)) throw std::invalid_argument("spacings must be positive");
  const double ratio = hv[1].first / hv[0].first;
  if (std::abs(ratio - 1) < 1e-12) throw std::invalid_argument("spacings must differ");
  for (std::size_t i = 1; i < hv.size(); ++i)
    if (std::abs(hv[i].first / hv[i - 1].first / ratio - 1) > 1e-6)
      throw std::invalid_argument("spacings must form a geometric progression");
  ConvergenceEstimate est;
  bool all_floor = true;
  for (const auto& p : hv) {
    if (std::isnan(p.second) || p.second < 0) throw std::invalid_argument("residual values must be non-negative");
    if (p.second > floor) all_floor = false;
  }
  if (all_floor) {
    est.below_floor = true;
    return est;
  }
  for (const auto& p : hv)
    if (!(p.second > 0)) throw std::invalid_argument("residual values must be positive");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(hv.size());
  for (const auto& p : hv) {
    const double x = std::log(p.first), y = std::log(p.second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  est.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return est;
}

}  // namespace kem
