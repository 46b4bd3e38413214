#include "kem/bianchi.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include "kem/ode.hpp"

namespace kem {

void BianchiParams::validate() const {
  if (!std::isfinite(p1) || !std::isfinite(p2) || !std::isfinite(p3) || !std::isfinite(lambda))
    throw std::invalid_argument("structure constants and lambda must be finite");
  if (p3 == 0) {
    if (lambda != 0) throw std::invalid_argument("p3 = 0 forces lambda = 0 (the Einstein closure has no lambda term)");
    if (!alpha0) throw std::invalid_argument("p3 = 0 requires a constant alpha");
  } else if (alpha0) {
    throw std::invalid_argument("alpha is determined by lambda when p3 != 0; do not pass it");
  }
}

std::array<double, 3> abc_rhs(const BianchiParams& p, const ABCState& s) {
  const double a2 = s.a * s.a, b2 = s.b * s.b, c2 = s.c * s.c;
  const double al = p.alpha(s.a, s.b);
  return {0.5 * s.a * (-p.p1 * a2 + p.p2 * b2 + p.p3 * c2), 0.5 * s.b * (p.p1 * a2 - p.p2 * b2 + p.p3 * c2),
          0.5 * s.c * (p.p1 * a2 + p.p2 * b2 - p.p3 * c2 + 2 * al)};
}

const char* to_string(ClosedFormCase c) {
  switch (c) {
    case ClosedFormCase::poincare: return "poincare";
    case ClosedFormCase::torus: return "torus";
    case ClosedFormCase::heisenberg: return "heisenberg";
    case ClosedFormCase::euclidean: return "euclidean";
  }
  return "unknown";
}

std::optional<ClosedFormCase> closed_form_case_from_string(const std::string& n) {
  if (n == "poincare") return ClosedFormCase::poincare;
  if (n == "torus" || n == "abelian") return ClosedFormCase::torus;
  if (n == "heisenberg" || n == "heisenberg-p3zero") return ClosedFormCase::heisenberg;
  if (n == "euclidean") return ClosedFormCase::euclidean;
  return std::nullopt;
}

BianchiParams closed_form_params(ClosedFormCase cc, const ClosedFormConsts& k) {
  BianchiParams p;
  p.alpha0 = k.alpha;
  switch (cc) {
    case ClosedFormCase::poincare: p.p1 = 1; p.p2 = -1; break;
    case ClosedFormCase::torus: break;
    case ClosedFormCase::heisenberg: p.p1 = 1; break;
    case ClosedFormCase::euclidean: p.p1 = 1; p.p2 = 1; break;
  }
  return p;
}

std::pair<double, double> closed_form_interval(ClosedFormCase cc, const ClosedFormConsts& k) {
  const double inf = std::numeric_limits<double>::infinity();
  switch (cc) {
    case ClosedFormCase::poincare: return {k.t0, k.t0 + std::numbers::pi / (2 * k.w3)};
    case ClosedFormCase::torus: return {-inf, inf};
    case ClosedFormCase::heisenberg:
    case ClosedFormCase::euclidean: return {k.t0, inf};
  }
  return {-inf, inf};
}

ABCState closed_form(ClosedFormCase cc, const ClosedFormConsts& k, double t) {
  if ((cc == ClosedFormCase::poincare || cc == ClosedFormCase::euclidean || cc == ClosedFormCase::heisenberg) &&
      !(k.w3 > 0))
    throw std::invalid_argument("w3 must be positive");
  if (cc == ClosedFormCase::torus && !(k.a0 > 0 && k.b0 > 0 && k.c0 > 0))
    throw std::invalid_argument("torus constants a0, b0, c0 must be positive");
  const auto [lo, hi] = closed_form_interval(cc, k);
  if (!(t > lo)) throw std::domain_error("t is at or before the singular endpoint t0 = " + std::to_string(lo));
  if (!(t < hi)) throw std::domain_error("t is at or beyond the singular endpoint t0 + pi/(2 w3) = " + std::to_string(hi));
  const auto v = closed_form_abc<double>(cc, k, t);
  return {t, v[0], v[1], v[2]};
}

std::array<double, 4> metric_components(const ABCState& s) {
  const double abc = s.a * s.b * s.c;
  return {abc * abc, s.a * s.a, s.b * s.b, s.c * s.c};
}

std::array<double, 2> kahler_form_components(const ABCState& s) { return {s.a * s.b * s.c * s.c, s.a * s.b}; }

std::array<double, 2> heisenberg_invariants(const ABCState& s) {
  const double ab = s.a * s.b;
  return {s.a / s.b, ab * (s.c * s.c - 2.0 / 3.0 * ab * ab)};
}

FrameCoefficients bianchi_frame_coefficients(const BianchiParams& p, const ABCState& s) {
  if (!(s.a != 0 && s.b != 0 && s.c != 0))
    throw std::domain_error("frame coefficients need a, b, c non-zero (degenerate orbit)");
  const auto d = abc_rhs(p, s);
  const double r2 = std::numbers::sqrt2;
  const double a = s.a, b = s.b, c = s.c;
  FrameCoefficients f;
  f.A = -d[0] / (r2 * a * a * b * c);
  f.B = -b * p.p2 / (r2 * a * c);
  f.C = a * p.p1 / (r2 * b * c);
  f.D = -d[1] / (r2 * a * b * b * c);
  f.E = -f.A;
  f.F = f.B;
  f.G = f.C;
  f.H = -f.D;
  f.L = -d[2] / (r2 * a * b * c * c);
  f.N = -c * p.p3 / (r2 * a * b);
  return f;
}

double frame_table_R(const BianchiParams& p, const ABCState& s) {
  return std::abs(s.a * s.a * p.p1 - s.b * s.b * p.p2) / (s.a * s.b * s.c);
}

Trajectory integrate(const BianchiParams& p, const ABCState& s0, double t_end, double tol,
                     const IntegrateOptions& io) {
  p.validate();
  if (!(tol > 0)) throw std::invalid_argument("tol must be positive");
  if (!(s0.a > 0 && s0.b > 0 && s0.c > 0)) throw std::invalid_argument("initial state must be positive");
  ode::Options opt;
  opt.rtol = opt.atol = tol;
  opt.h_max = io.h_max;
  auto f = [&](double t, const ode::Vec<3>& y) { return abc_rhs(p, {t, y[0], y[1], y[2]}); };
  Trajectory tr;
  tr.info.tol = tol;
  tr.samples.push_back(s0);
  std::vector<ode::Event<3>> events;
  if (io.b_stop) {
    const double bs = *io.b_stop;
    events.push_back({[bs](double, const ode::Vec<3>& y) { return y[1] - bs; }, true, 0});
  }
  auto obs = [&](const ode::DenseStep<3>& ds) { tr.samples.push_back({ds.t1, ds.y1[0], ds.y1[1], ds.y1[2]}); };
  auto valid = [](const ode::Vec<3>& y) { return y[0] > 0 && y[1] > 0 && y[2] > 0; };
  const auto res = ode::integrate<3>(f, s0.t, {s0.a, s0.b, s0.c}, t_end, opt, events, obs, valid);
  if (res.status == ode::Termination::event) {
    // replace the overshooting last step by the event point
    tr.samples.back() = {res.t, res.y[0], res.y[1], res.y[2]};
    if (tr.samples.size() >= 2 && tr.samples[tr.samples.size() - 2].t == res.t) tr.samples.pop_back();
  }
  tr.info.accepted = res.accepted;
  tr.info.rejected = res.rejected;
  tr.info.evaluations = res.evaluations;
  tr.info.termination = ode::to_string(res.status);
  switch (res.status) {
    case ode::Termination::completed: tr.stop = StopReason::completed; break;
    case ode::Termination::event: tr.stop = StopReason::target; break;
    case ode::Termination::invalid_state: tr.stop = StopReason::positivity_lost; break;
    default: tr.stop = StopReason::blow_up; break;
  }
  if (t_end < s0.t) std::reverse(tr.samples.begin(), tr.samples.end());
  return tr;
}

bool coframe_supported(const BianchiParams& p) {
  const std::array<double, 3> k{p.p1, p.p2, p.p3};
  const std::array<std::array<double, 3>, 6> ok{{{0, 0, 0}, {1, 0, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 0}, {1, -1, 0}}};
  return std::find(ok.begin(), ok.end(), k) != ok.end();
}

std::array<std::string, 3> coframe_coordinates(const BianchiParams& p) {
  if (!coframe_supported(p)) throw std::invalid_argument("no coordinate coframe for these structure constants");
  if (p.p1 == 1 && (p.p3 == 1 || p.p2 != 0)) return {"x", "y", "theta"};
  return {"x", "y", "z"};
}

std::array<std::array<double, 3>, 3> coframe_matrix(const BianchiParams& p, const std::array<double, 3>& u) {
  if (!coframe_supported(p)) throw std::invalid_argument("no coordinate coframe for these structure constants");
  const double x = u[0], y = u[1], th = u[2];
  if (p.p1 == 0 && p.p3 == 0) return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  if (p.p1 == 1 && p.p2 == 0 && p.p3 == 0) return {{{1, 0, y}, {0, 1, 0}, {0, 0, 1}}};
  if (p.p1 == 0 && p.p3 == 1) return {{{1, 0, 0}, {0, 1, 0}, {0, x, 1}}};
  if (p.p3 == 1) {
    const double c = std::cos(th), s = std::sin(th);
    return {{{c, s, 0}, {0, 0, 1}, {-s, c, 0}}};
  }
  if (p.p2 == 1) {
    const double c = std::cos(th), s = std::sin(th);
    return {{{c, s, 0}, {s, -c, 0}, {0, 0, 1}}};
  }
  const double ch = std::cosh(th), sh = std::sinh(th);
  return {{{ch, sh, 0}, {-sh, -ch, 0}, {0, 0, 1}}};
}

std::vector<ABCState> sample_flow(const BianchiParams& p, const ABCState& seed, const Axis& t_axis, int substeps,
                                  double tol) {
  if (substeps < 1) throw std::invalid_argument("substeps must be at least 1");
  auto f = [&](double t, const ode::Vec<3>& y) { return abc_rhs(p, {t, y[0], y[1], y[2]}); };
  ode::Vec<3> y{seed.a, seed.b, seed.c};
  if (seed.t != t_axis.min) {
    ode::Options opt;
    opt.rtol = opt.atol = tol;
    const auto r = ode::integrate<3>(f, seed.t, y, t_axis.min, opt);
    if (r.status != ode::Termination::completed)
      throw std::runtime_error("flow does not reach the first grid node (" + std::string(ode::to_string(r.status)) + ")");
    y = r.y;
  }
  std::vector<ABCState> out;
  out.reserve(t_axis.count);
  const double h = t_axis.step / substeps;
  for (std::size_t i = 0; i < t_axis.count; ++i) {
    if (i > 0) y = ode::rk4<3>(f, t_axis.at(i - 1), y, h, static_cast<std::size_t>(substeps));
    if (!(y[0] > 0 && y[1] > 0 && y[2] > 0) || !std::isfinite(y[0] + y[1] + y[2]))
      throw std::runtime_error("flow leaves the positive octant at grid node " + std::to_string(i));
    out.push_back({t_axis.at(i), y[0], y[1], y[2]});
  }
  return out;
}

BianchiGrid bianchi_grid(const BianchiParams& p, const Axis& t_axis, const std::vector<ABCState>& at_nodes,
                         const std::array<Axis, 3>& group_axes) {
  if (at_nodes.size() != t_axis.count) throw std::invalid_argument("need one state per t node");
  Lattice L({t_axis, group_axes[0], group_axes[1], group_axes[2]});
  const std::size_t n = L.size();
  std::vector<double> g(n * 16, 0.0), w(n * 16, 0.0);
  for (std::size_t node = 0; node < n; ++node) {
    const ABCState& s = at_nodes[L.coord(node, 0)];
    const auto S = coframe_matrix(p, {L.position(node, 1), L.position(node, 2), L.position(node, 3)});
    const double A2[3] = {s.a * s.a, s.b * s.b, s.c * s.c};
    const auto kf = kahler_form_components(s);
    double* G = g.data() + node * 16;
    double* W = w.data() + node * 16;
    const double abc = s.a * s.b * s.c;
    G[0] = abc * abc;
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = j; k < 3; ++k) {
        double v = 0;
        for (std::size_t i = 0; i < 3; ++i) v += A2[i] * S[i][j] * S[i][k];
        G[(j + 1) * 4 + (k + 1)] = G[(k + 1) * 4 + (j + 1)] = v;
      }
    for (std::size_t k = 0; k < 3; ++k) {
      W[k + 1] = kf[0] * S[2][k];
      W[(k + 1) * 4] = -W[k + 1];
    }
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = j + 1; k < 3; ++k) {
        const double v = kf[1] * (S[0][j] * S[1][k] - S[0][k] * S[1][j]);
        W[(j + 1) * 4 + (k + 1)] = v;
        W[(k + 1) * 4 + (j + 1)] = -v;
      }
  }
  return {MetricGrid(L, std::move(g)), TwoFormGrid(L, std::move(w))};
}

}  // namespace kem
