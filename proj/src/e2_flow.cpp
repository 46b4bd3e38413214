#include "kem/e2_flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "kem/ode.hpp"

namespace kem::e2 {

using nlohmann::json;

BianchiParams params() {
  BianchiParams p;
  p.p1 = 1;
  p.p3 = 1;
  p.lambda = -1;
  return p;
}

std::array<double, 3> e2_rhs(const ABCState& s) {
  const double a2 = s.a * s.a, b2 = s.b * s.b, c2 = s.c * s.c;
  return {0.5 * s.a * (-a2 + c2), 0.5 * s.b * (a2 + c2), 0.5 * s.c * (a2 - c2 + 2 * a2 * b2)};
}

std::array<std::array<double, 3>, 3> e2_jacobian(const ABCState& s) {
  const double a = s.a, b = s.b, c = s.c;
  return {{{(-3 * a * a + c * c) / 2, 0.0, a * c},
           {a * b, (a * a + c * c) / 2, b * c},
           {a * c + 2 * a * b * b * c, 2 * a * a * b * c, (a * a - 3 * c * c + 2 * a * a * b * b) / 2}}};
}

Linearization linearization(double q, Equilibrium which) {
  if (!(q > 0)) throw std::invalid_argument("q must be positive");
  Linearization lin;
  const ABCState eq = which == Equilibrium::qoq ? ABCState{0, q, 0, q} : ABCState{0, 0, q, 0};
  lin.matrix = e2_jacobian(eq);
  Eigen::Matrix3d M;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M(i, j) = lin.matrix[i][j];
  // both equilibria give symmetric matrices
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  for (int k = 0; k < 3; ++k) {
    const int src = 2 - k;  // ascending -> descending
    lin.eigenvalues[k] = es.eigenvalues()(src);
    Eigen::Vector3d v = es.eigenvectors().col(src).normalized();
    int big = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(v(i)) > std::abs(v(big))) big = i;
    if (v(big) < 0) v = -v;
    lin.eigenvectors[k] = {v(0), v(1), v(2)};
  }
  const double scale = std::max(1.0, std::abs(lin.eigenvalues[0]));
  if (lin.eigenvalues[0] > 1e-12 * scale) lin.unstable = lin.eigenvectors[0];
  return lin;
}

std::array<double, 4> derivative_identity_residuals(const ABCState& s) {
  const auto d = e2_rhs(s);
  const double a = s.a, b = s.b, c = s.c;
  auto rel = [](double lhs, double rhs) { return std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)); };
  return {rel(d[0] * b + a * d[1], a * b * c * c), rel(d[1] * c + b * d[2], b * c * a * a * (1 + b * b)),
          rel(d[0] * c + a * d[2], a * a * a * c * b * b), rel((d[0] * b - a * d[1]) / (b * b), -a * a * a / b)};
}

const char* to_string(StartRegion r) {
  switch (r) {
    case StartRegion::below: return "below";
    case StartRegion::above: return "above";
    case StartRegion::inside: return "inside";
  }
  return "unknown";
}

StartRegion classify_start(const ABCState& s) {
  const double d = s.c * s.c - s.a * s.a;
  if (d < 0) return StartRegion::below;
  if (d > 2 * s.a * s.a * s.b * s.b) return StartRegion::above;
  return StartRegion::inside;
}

Trajectory shoot_from(const ABCState& start, const ShootStop& stop, double tol) {
  if (!stop.b_max && !stop.t_span) throw std::invalid_argument("shooting needs b_max or t_span");
  IntegrateOptions io;
  if (stop.b_max) {
    if (!(*stop.b_max > start.b)) throw std::invalid_argument("b_max must exceed the starting b");
    io.b_stop = *stop.b_max;
  }
  // b reaches infinity at a finite time of order log(q/b0)/q^2; a long span
  // would also inflate the step-underflow threshold
  const double q2 = std::max(0.5 * (start.a * start.a + start.c * start.c), 1e-2);
  const double span = stop.t_span ? *stop.t_span : 100 / q2;
  return integrate(params(), start, start.t + span, tol, io);
}

Trajectory shoot_unstable(double q, double eps, const ShootStop& stop, double tol) {
  if (!(q > 0)) throw std::invalid_argument("q must be positive");
  if (!(eps > 0) || !(eps < q)) throw std::invalid_argument("eps must satisfy 0 < eps << q");
  return shoot_from({0.0, q, eps, q}, stop, tol);
}

namespace {

// (a, b, c, r) with r' = abc
ode::Vec<4> augmented_rhs(double, const ode::Vec<4>& y) {
  const auto d = e2_rhs({0, y[0], y[1], y[2]});
  return {d[0], d[1], d[2], y[0] * y[1] * y[2]};
}

struct LevelRun {
  std::vector<std::optional<double>> r_at;  // per level
  ode::Termination status = ode::Termination::completed;
};

// Integrate the orbit through `start` with r(start) = r0, using s = log b as the
// independent variable (b'/b = (a^2 + c^2)/2 > 0), and record r at each b level.
// In s the orbit stays regular up to any finite b, unlike in t near the blow-up time.
LevelRun distances_at_levels(const ABCState& start, double r0, const std::vector<double>& levels, double tol) {
  LevelRun out;
  out.r_at.assign(levels.size(), std::nullopt);
  if (levels.empty()) return out;
  std::vector<double> s_lv;
  for (double L : levels) s_lv.push_back(std::log(L));
  const double s_end = *std::max_element(s_lv.begin(), s_lv.end());
  ode::Options opt;
  opt.rtol = opt.atol = tol;
  opt.blowup = 1e15;
  for (double s : s_lv)
    if (s > std::log(start.b) && s < s_end) opt.landing.push_back(s);
  std::sort(opt.landing.begin(), opt.landing.end());
  opt.landing.erase(std::unique(opt.landing.begin(), opt.landing.end()), opt.landing.end());
  // state (a, c, r)
  auto f = [](double s, const ode::Vec<3>& y) -> ode::Vec<3> {
    const double b = std::exp(s);
    const auto d = e2_rhs({0, y[0], b, y[1]});
    const double g = d[1] / b;
    return {d[0] / g, d[2] / g, y[0] * b * y[1] / g};
  };
  auto obs = [&](const ode::DenseStep<3>& ds) {
    for (std::size_t k = 0; k < levels.size(); ++k)
      if (!out.r_at[k] && s_lv[k] == ds.t1) out.r_at[k] = ds.y1[2];
  };
  const auto res = ode::integrate<3>(f, std::log(start.b), {start.a, start.c, r0}, s_end, opt, {}, obs);
  out.status = res.status;
  return out;
}

bool near_equilibrium(const ABCState& s) { return std::abs(s.a - s.c) <= 1e-6 * s.a && s.b <= 1e-3 * s.a; }

}  // namespace

std::optional<double> E2Diagnostics::distance_between(double b1, double b2) const {
  std::optional<double> r1, r2;
  for (const auto& [lvl, r] : level_distances) {
    if (std::abs(lvl - b1) <= 1e-12 * b1) r1 = r;
    if (std::abs(lvl - b2) <= 1e-12 * b2) r2 = r;
  }
  if (!r1 || !r2) return std::nullopt;
  return *r2 - *r1;
}

E2Diagnostics diagnose(const Trajectory& tr, const DiagnoseOptions& opt) {
  E2Diagnostics d;
  d.samples = tr.samples.size();
  d.stop = tr.stop;
  if (tr.samples.size() < 10) {
    d.inconclusive = true;
    d.note = "trajectory too short";
    return d;
  }
  const auto& S = tr.samples;
  d.start_region = classify_start(S.front());

  auto rel_ge = [&](double next, double prev) { return next >= prev - opt.monotone_slack * std::abs(prev); };
  bool left_one = false;
  double prev_ratio = 0;
  for (std::size_t i = 0; i < S.size(); ++i) {
    const auto& s = S[i];
    const double a2 = s.a * s.a, c2 = s.c * s.c, b2 = s.b * s.b;
    const double scale = std::max(1.0, c2);
    const double gap = c2 - a2;
    if (gap < -opt.region_slack * scale || gap > 2 * a2 * b2 + opt.region_slack * scale) {
      if (d.region_ok) d.region_first_violation = i;
      d.region_ok = false;
    }
    const double ratio = s.a / s.c;
    if (ratio < 1 / std::sqrt(1 + b2) - opt.nullcline_slack) d.nullcline_ok = false;
    if (ratio > 1 + opt.region_slack) d.ratio_upper_ok = false;
    if (!left_one && ratio < 1 - 1e-6) {
      left_one = true;
      d.b_p = s.b;
    } else if (left_one && ratio > prev_ratio * (1 + opt.monotone_slack)) {
      d.ratio_monotone_ok = false;
    }
    prev_ratio = ratio;
    if (i > 0) {
      const auto& p = S[i - 1];
      if (!rel_ge(s.a * s.b, p.a * p.b)) d.monotone_ab = false;
      if (!rel_ge(s.b * s.c, p.b * p.c)) d.monotone_bc = false;
      if (!rel_ge(s.a * s.c, p.a * p.c)) d.monotone_ac = false;
      if (!rel_ge(s.b, p.b)) d.monotone_b = false;
    }
  }

  if (d.b_p) {
    for (double k = 2.0; k <= 50.0; k += 0.5) {
      bool holds = true;
      for (const auto& s : S) {
        if (s.b < *d.b_p) continue;
        if (s.a / s.c > std::sqrt(k * k / (k * k + s.b * s.b)) * (1 + 1e-12)) {
          holds = false;
          break;
        }
      }
      if (holds) {
        d.kp_fit = k;
        break;
      }
    }
  }

  const ABCState& s0 = S.front();
  if (!near_equilibrium(s0)) {
    d.inconclusive = true;
    d.note = "first sample is not near an equilibrium (q,0,q); no tail toward minus infinity";
    return d;
  }
  // abc ~ q^2 k e^{q^2 t} near the bolt, so the tail integral equals b(t_start)
  d.tail = s0.b;
  std::vector<double> levels;
  const double ref = opt.reference_b;
  if (!(ref > s0.b) || !(opt.b_top > ref)) throw std::invalid_argument("need b(first sample) < reference_b < b_top");
  levels.push_back(ref);
  for (int e = static_cast<int>(std::ceil(std::log10(s0.b))); std::pow(10.0, e) <= opt.b_top * (1 + 1e-12); ++e)
    if (std::pow(10.0, e) > s0.b) levels.push_back(std::pow(10.0, e));
  const double tol = std::min(opt.tol, tr.info.tol > 0 ? tr.info.tol : opt.tol);
  const LevelRun run = distances_at_levels(s0, d.tail, levels, tol);
  if (run.r_at[0]) d.dist_to_minus_inf = *run.r_at[0];
  for (std::size_t k = 1; k < levels.size(); ++k)
    if (run.r_at[k]) d.level_distances.push_back({levels[k], *run.r_at[k]});

  // same orbit family started ten times closer to the bolt
  const ABCState s_ref{s0.t, s0.a, s0.b / 10, s0.c};
  const LevelRun fine = distances_at_levels(s_ref, s0.b / 10, {ref}, tol);
  if (fine.r_at[0] && d.dist_to_minus_inf) d.tail_cauchy_gap = std::abs(*fine.r_at[0] - *d.dist_to_minus_inf);

  for (std::size_t k = 0; k + 1 < d.level_distances.size(); ++k) {
    const auto& lo = d.level_distances[k];
    const auto& hi = d.level_distances[k + 1];
    d.decade_slopes.push_back({lo.first, (hi.second - lo.second) / std::log(hi.first / lo.first)});
  }
  if (d.decade_slopes.size() >= 2) {
    const double last = d.decade_slopes.back().second;
    const double prev = d.decade_slopes[d.decade_slopes.size() - 2].second;
    d.dist_growth_slope = last;
    d.k2_stability = std::abs(last - prev) / std::abs(last);
  } else {
    d.inconclusive = true;
    d.note = "fewer than two complete b-decades";
  }
  return d;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const E2Diagnostics& d) {
  json levels = json::array(), slopes = json::array();
  for (const auto& [b, r] : d.level_distances) levels.push_back({{"b", b}, {"distance", r}});
  for (const auto& [b, k] : d.decade_slopes) slopes.push_back({{"b_from", b}, {"b_to", 10 * b}, {"K", k}});
  return {{"schema", 1},
          {"inconclusive", d.inconclusive},
          {"note", d.note},
          {"start_region", to_string(d.start_region)},
          {"stop", to_string(d.stop)},
          {"samples", d.samples},
          {"region_ok", d.region_ok},
          {"region_first_violation", d.region_first_violation ? json(*d.region_first_violation) : json(nullptr)},
          {"monotone_ok", {{"ab", d.monotone_ab}, {"bc", d.monotone_bc}, {"ac", d.monotone_ac}, {"b", d.monotone_b}}},
          {"nullcline_ok", d.nullcline_ok},
          {"ratio_upper_ok", d.ratio_upper_ok},
          {"ratio_monotone_ok", d.ratio_monotone_ok},
          {"kp_fit", opt_json(d.kp_fit)},
          {"b_p", opt_json(d.b_p)},
          {"dist_to_minus_inf", opt_json(d.dist_to_minus_inf)},
          {"tail", d.tail},
          {"tail_cauchy_gap", opt_json(d.tail_cauchy_gap)},
          {"level_distances", levels},
          {"decade_slopes", slopes},
          {"dist_growth_slope", opt_json(d.dist_growth_slope)},
          {"k2_stability", opt_json(d.k2_stability)}};
}

BoltProfile bolt_profile(const Trajectory& tr, double tol) {
  validate_trajectory(tr);
  const auto& S = tr.samples;
  const ABCState& s0 = S.front();
  if (!near_equilibrium(s0)) throw std::invalid_argument("trajectory does not start near an equilibrium (q,0,q)");
  BoltProfile p;
  p.q = 0.5 * (s0.a + s0.c);
  const double r0 = s0.b;

  struct Row {
    double r, a, b, c;
  };
  std::vector<Row> rows;
  rows.push_back({r0, s0.a, s0.b, s0.c});

  // arclength at every sample time
  {
    ode::Options opt;
    opt.rtol = opt.atol = tol;
    opt.blowup = 1e15;
    for (std::size_t i = 1; i < S.size(); ++i) opt.landing.push_back(S[i].t);
    std::size_t next = 1;
    auto obs = [&](const ode::DenseStep<4>& ds) {
      while (next < S.size() && S[next].t <= ds.t1) {
        if (S[next].t == ds.t1) rows.push_back({ds.y1[3], ds.y1[0], ds.y1[1], ds.y1[2]});
        ++next;
      }
    };
    ode::integrate<4>(augmented_rhs, s0.t, {s0.a, s0.b, s0.c, r0}, S.back().t, opt, {}, obs);
  }
  const double r_last = rows.back().r;

  // exact rows on a dyadic ladder near the bolt, integrating in r
  {
    std::vector<double> ladder;
    for (int k = 8; k >= 0; --k) {
      const double r = 0.32 / std::pow(2.0, k);
      if (r > r0 * 1.001 && r < r_last) ladder.push_back(r);
    }
    if (!ladder.empty()) {
      auto f = [](double, const ode::Vec<4>& y) {
        const auto d = e2_rhs({0, y[0], y[1], y[2]});
        const double abc = y[0] * y[1] * y[2];
        return ode::Vec<4>{d[0] / abc, d[1] / abc, d[2] / abc, 1 / abc};
      };
      ode::Options opt;
      opt.rtol = opt.atol = tol;
      opt.landing = ladder;
      std::size_t next = 0;
      auto obs = [&](const ode::DenseStep<4>& ds) {
        while (next < ladder.size() && ladder[next] <= ds.t1) {
          if (ladder[next] == ds.t1) rows.push_back({ds.t1, ds.y1[0], ds.y1[1], ds.y1[2]});
          ++next;
        }
      };
      ode::integrate<4>(f, r0, {s0.a, s0.b, s0.c, s0.t}, ladder.back(), opt, {}, obs);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) { return x.r < y.r; });
  p.r.push_back(0);
  p.a.push_back(p.q);
  p.b.push_back(0);
  p.c.push_back(p.q);
  for (const Row& w : rows) {
    if (w.r <= p.r.back() * (1 + 1e-13)) continue;
    p.r.push_back(w.r);
    p.a.push_back(w.a);
    p.b.push_back(w.b);
    p.c.push_back(w.c);
  }
  return p;
}

void write_bolt_csv(std::ostream& os, const BoltProfile& p) {
  os << "r,a,b,c\n";
  char buf[128];
  for (std::size_t i = 0; i < p.r.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.r[i], p.a[i], p.b[i], p.c[i]);
    os << buf;
  }
}

BoltProfile read_bolt_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty bolt profile");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "r,a,b,c") throw std::runtime_error("bolt profile header must be 'r,a,b,c'");
  BoltProfile p;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    double r, a, b, c;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r, &a, &b, &c) != 4) throw std::runtime_error("malformed bolt row");
    p.r.push_back(r);
    p.a.push_back(a);
    p.b.push_back(b);
    p.c.push_back(c);
  }
  if (p.r.empty()) throw std::runtime_error("bolt profile has no rows");
  p.q = p.r.front() == 0 ? 0.5 * (p.a.front() + p.c.front()) : 0.0;
  return p;
}

namespace {

struct Quantities {
  double db_dr, ratio, kahler, a, c;
};

Quantities quantities(double r, double a, double b, double c) {
  return {(a * a + c * c) / (2 * a * c), (a * a - c * c) / (r * r), (c * r - a * b) / (r * r * r), a, c};
}

// state at radius r: an exact row if present, else cubic Hermite in r
std::optional<std::array<double, 3>> state_at(const BoltProfile& p, double r, bool& interpolated) {
  for (std::size_t i = 1; i < p.r.size(); ++i)
    if (std::abs(p.r[i] - r) <= 1e-9 * r) return std::array<double, 3>{p.a[i], p.b[i], p.c[i]};
  for (std::size_t i = 1; i + 1 < p.r.size(); ++i) {
    if (!(p.r[i] <= r && r <= p.r[i + 1])) continue;
    interpolated = true;
    const double h = p.r[i + 1] - p.r[i], s = (r - p.r[i]) / h;
    auto deriv = [&](std::size_t j) {
      const auto d = e2_rhs({0, p.a[j], p.b[j], p.c[j]});
      const double abc = p.a[j] * p.b[j] * p.c[j];
      return std::array<double, 3>{d[0] / abc, d[1] / abc, d[2] / abc};
    };
    const auto d0 = deriv(i), d1 = deriv(i + 1);
    const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s, h01 = -2 * s * s * s + 3 * s * s,
                 h11 = s * s * s - s * s;
    const double y0[3] = {p.a[i], p.b[i], p.c[i]}, y1[3] = {p.a[i + 1], p.b[i + 1], p.c[i + 1]};
    std::array<double, 3> out;
    for (int k = 0; k < 3; ++k) out[k] = h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k];
    return out;
  }
  return std::nullopt;
}

// two Richardson levels in r^2 from samples at r, r/2, r/4
double richardson(double f0, double f1, double f2) {
  const double g0 = (4 * f1 - f0) / 3, g1 = (4 * f2 - f1) / 3;
  return (16 * g1 - g0) / 15;
}

}  // namespace

BoltReport bolt_smoothness(const BoltProfile& p) {
  BoltReport rep;
  rep.q = p.q;
  const double bases[2] = {0.08, 0.04};
  std::array<std::array<Quantities, 3>, 2> q{};
  for (int lvl = 0; lvl < 2; ++lvl)
    for (int k = 0; k < 3; ++k) {
      const double r = bases[lvl] / std::pow(2.0, k);
      const auto s = state_at(p, r, rep.interpolated);
      if (!s) {
        rep.inconclusive = true;
        rep.note = "profile does not resolve r = " + std::to_string(r);
        return rep;
      }
      q[lvl][k] = quantities(r, (*s)[0], (*s)[1], (*s)[2]);
    }
  auto limit = [&](double Quantities::*m) {
    BoltLimit L;
    L.coarse = richardson(q[0][0].*m, q[0][1].*m, q[0][2].*m);
    L.value = richardson(q[1][0].*m, q[1][1].*m, q[1][2].*m);
    L.change = std::abs(L.value - L.coarse) / std::max(std::abs(L.value), 1e-300);
    return L;
  };
  rep.db_dr = limit(&Quantities::db_dr);
  rep.ratio_a2c2 = limit(&Quantities::ratio);
  rep.kahler_r3 = limit(&Quantities::kahler);
  rep.a0 = limit(&Quantities::a);
  rep.c0 = limit(&Quantities::c);
  rep.db_dr_error = std::abs(rep.db_dr.value - 1);
  return rep;
}

json to_json(const BoltReport& r) {
  auto lim = [](const BoltLimit& L) { return json{{"limit", L.value}, {"coarse", L.coarse}, {"change", L.change}}; };
  return {{"schema", 1},
          {"inconclusive", r.inconclusive},
          {"note", r.note},
          {"interpolated", r.interpolated},
          {"q", r.q},
          {"db_dr", lim(r.db_dr)},
          {"db_dr_error", r.db_dr_error},
          {"a2_minus_c2_over_r2", lim(r.ratio_a2c2)},
          {"cr_minus_ab_over_r3", lim(r.kahler_r3)},
          {"a_at_bolt", lim(r.a0)},
          {"c_at_bolt", lim(r.c0)}};
}

Trajectory scaling_map(const Trajectory& tr, double k) {
  if (!(k > 0)) throw std::invalid_argument("scaling factor must be positive");
  Trajectory out = tr;
  for (auto& s : out.samples) {
    s.t /= k * k;
    s.a *= k;
    s.c *= k;
  }
  return out;
}

BianchiGrid e2_metric_grid(const Trajectory& tr, const E2GridSpec& spec) {
  validate_trajectory(tr);
  const auto& S = tr.samples;
  double tc;
  if (spec.t_center) {
    tc = *spec.t_center;
  } else {
    std::size_t best = 0;
    for (std::size_t i = 1; i < S.size(); ++i)
      if (std::abs(std::log(S[i].b)) < std::abs(std::log(S[best].b))) best = i;
    tc = S[best].t;
  }
  if (spec.n_t < 5 || spec.n_theta < 5 || spec.n_xy < 5) throw std::invalid_argument("each axis needs at least 5 nodes");
  const Axis t_axis{"t", tc - spec.h * static_cast<double>(spec.n_t - 1) / 2, spec.h, spec.n_t};
  if (t_axis.min < S.front().t || t_axis.max() > S.back().t)
    throw std::invalid_argument("grid t-nodes fall outside the trajectory range");
  std::size_t seed = 0;
  for (std::size_t i = 0; i < S.size(); ++i)
    if (std::abs(S[i].t - t_axis.min) < std::abs(S[seed].t - t_axis.min)) seed = i;
  const auto states = sample_flow(params(), S[seed], t_axis, 4);
  const Axis x{"x", 0.0, spec.h_xy, spec.n_xy}, y{"y", 0.0, spec.h_xy, spec.n_xy};
  const Axis th{"theta", spec.theta_center - spec.h * static_cast<double>(spec.n_theta - 1) / 2, spec.h, spec.n_theta};
  return bianchi_grid(params(), t_axis, states, {x, y, th});
}

}  // namespace kem::e2
