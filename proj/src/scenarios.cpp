#include "kem/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kem/bianchi.hpp"
#include "kem/curvature.hpp"
#include "kem/e2_flow.hpp"
#include "kem/frame_algebra.hpp"
#include "kem/manifest.hpp"
#include "kem/ode.hpp"
#include "kem/ricci_flat.hpp"

namespace kem::scenario {

using nlohmann::json;

namespace {

// Typed access to a request object; records the resolved value of every key.
class Req {
 public:
  Req(const std::string& command, const json& j, std::initializer_list<const char*> keys) : cmd_(command), j_(j) {
    if (!j.is_object()) throw std::invalid_argument(command + ": request must be a JSON object");
    for (const auto& [k, v] : j.items()) {
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known) throw std::invalid_argument(command + ": unknown parameter '" + k + "'");
    }
  }

  bool has(const char* k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  template <class T>
  T get(const char* k, T def) {
    T v = def;
    if (has(k)) v = convert<T>(k);
    resolved_[k] = v;
    return v;
  }

  template <class T>
  std::optional<T> opt(const char* k) {
    if (!has(k)) {
      resolved_[k] = nullptr;
      return std::nullopt;
    }
    T v = convert<T>(k);
    resolved_[k] = v;
    return v;
  }

  // embedded documents are recorded by checksum only
  const json& object(const char* k) {
    if (!has(k) || !j_.at(k).is_object()) throw std::invalid_argument(cmd_ + ": parameter '" + k + "' must be an object");
    resolved_[k] = {{"fnv1a64", hex64(fnv1a64(j_.at(k).dump()))}};
    return j_.at(k);
  }
  const std::string& text(const char* k) {
    if (!has(k) || !j_.at(k).is_string()) throw std::invalid_argument(cmd_ + ": parameter '" + k + "' must be a string");
    const auto& s = j_.at(k).get_ref<const std::string&>();
    resolved_[k] = {{"fnv1a64", hex64(fnv1a64(s))}};
    return s;
  }

  const json& resolved() const { return resolved_; }
  const std::string& command() const { return cmd_; }

 private:
  template <class T>
  T convert(const char* k) const {
    try {
      return j_.at(k).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(cmd_ + ": parameter '" + std::string(k) + "' has the wrong type");
    }
  }

  std::string cmd_;
  const json& j_;
  json resolved_ = json::object();
};

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

Outcome start(const Req& r) {
  Outcome o;
  o.report = {{"schema", 1}, {"command", r.command()}};
  return o;
}

void finish(Outcome& o, const Req& r) { o.report["request"] = r.resolved(); }

std::string dump(const json& j) { return j.dump(1) + "\n"; }

json metric_document(const MetricGrid& g, const TwoFormGrid* w, const Req& r) {
  json j = to_json(g);
  if (w) j["kahler"] = to_json(*w);
  j["manifest"] = make_manifest(r.command(), r.resolved());
  return j;
}

Trajectory trajectory_from_text(const std::string& csv) {
  std::istringstream is(csv);
  return read_trajectory_csv(is);
}

std::string trajectory_text(const Trajectory& tr) {
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  return os.str();
}

json integrator_json(const Trajectory& tr) {
  return {{"tol", tr.info.tol},
          {"accepted", tr.info.accepted},
          {"rejected", tr.info.rejected},
          {"evaluations", tr.info.evaluations},
          {"termination", tr.info.termination},
          {"stop", to_string(tr.stop)},
          {"samples", tr.samples.size()},
          {"t_first", tr.samples.empty() ? json(nullptr) : json(tr.front().t)},
          {"t_last", tr.samples.empty() ? json(nullptr) : json(tr.back().t)}};
}

json order_json(const std::vector<std::pair<double, double>>& hv, double floor) {
  if (hv.size() < 3) return nullptr;
  const auto est = convergence_order(hv, floor);
  return {{"order", opt_json(est.order)}, {"below_floor", est.below_floor}};
}

bool order_ok(const std::vector<std::pair<double, double>>& hv, double floor, double lo, double hi) {
  if (hv.size() < 3) return true;
  const auto est = convergence_order(hv, floor);
  if (est.below_floor) return true;
  return est.order && *est.order >= lo && *est.order <= hi;
}

// ---------------------------------------------------------------- bianchi

double rel_dev(double v, double ref) { return std::abs(v - ref) / std::max(1.0, std::abs(ref)); }

Outcome bianchi_solve(const json& j) {
  Req r("bianchi.solve", j,
        {"p1", "p2", "p3", "lambda", "alpha", "case", "alpha_eq_ab", "k", "w3", "t0", "a0", "b0", "c0", "t_start",
         "t_end", "tol", "grid_h", "sweep", "grid_tol", "flat_tol"});
  const auto case_name = r.opt<std::string>("case");
  const bool alpha_eq_ab = r.get<bool>("alpha_eq_ab", false);
  const double tol = r.get<double>("tol", 1e-10);
  const double grid_h = r.get<double>("grid_h", 1e-3);
  const int sweep = r.get<int>("sweep", 3);
  const double grid_tol = r.get<double>("grid_tol", 5e-3);
  const double flat_tol = r.get<double>("flat_tol", 1e-6);
  if (!(tol > 0) || !(grid_h > 0) || sweep < 1 || sweep > 6) throw std::invalid_argument("bianchi.solve: bad tol, grid_h or sweep");

  BianchiParams p;
  std::optional<ClosedFormCase> cc;
  ClosedFormConsts K;
  ABCState s0;
  double t_end = 0;

  if (case_name) {
    cc = closed_form_case_from_string(*case_name);
    if (!cc) throw std::invalid_argument("bianchi.solve: unknown case '" + *case_name + "'");
    K.k = r.get<double>("k", 1.0);
    K.w3 = r.get<double>("w3", 1.0);
    K.t0 = r.get<double>("t0", 0.0);
    K.a0 = r.get<double>("a0", 1.0);
    K.b0 = r.get<double>("b0", 1.0);
    K.c0 = r.get<double>("c0", 1.0);
    const auto alpha = r.opt<double>("alpha");
    if (alpha_eq_ab) {
      if (*cc != ClosedFormCase::torus) throw std::invalid_argument("bianchi.solve: alpha_eq_ab applies to the torus case only");
      if (alpha && *alpha != K.a0 * K.b0) throw std::invalid_argument("bianchi.solve: alpha conflicts with alpha_eq_ab (alpha = a0 b0)");
      K.alpha = K.a0 * K.b0;
    } else {
      K.alpha = alpha.value_or(0.0);
    }
    p = closed_form_params(*cc, K);
    const std::array<std::pair<const char*, double>, 4> given{
        {{"p1", p.p1}, {"p2", p.p2}, {"p3", p.p3}, {"lambda", p.lambda}}};
    for (const auto& [key, want] : given) {
      const auto v = r.opt<double>(key);
      if (v && *v != want)
        throw std::invalid_argument("bianchi.solve: case " + std::string(to_string(*cc)) + " requires " + key + " = " +
                                    std::to_string(want));
    }
    const auto [lo, hi] = closed_form_interval(*cc, K);
    double ts, te;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      ts = lo + 0.1 * (hi - lo);
      te = lo + 0.9 * (hi - lo);
    } else if (std::isfinite(lo)) {
      ts = lo + 0.5;
      te = lo + 3.0;
    } else {
      ts = K.t0;
      te = K.t0 + 2.0;
    }
    ts = r.get<double>("t_start", ts);
    t_end = r.get<double>("t_end", te);
    s0 = closed_form(*cc, K, ts);
  } else {
    p.p1 = r.get<double>("p1", 0.0);
    p.p2 = r.get<double>("p2", 0.0);
    p.p3 = r.get<double>("p3", 0.0);
    p.lambda = r.get<double>("lambda", 0.0);
    p.alpha0 = r.opt<double>("alpha");
    if (alpha_eq_ab) throw std::invalid_argument("bianchi.solve: alpha_eq_ab needs case torus");
    s0 = {r.get<double>("t_start", 0.0), r.get<double>("a0", 1.0), r.get<double>("b0", 1.0), r.get<double>("c0", 1.0)};
    t_end = r.get<double>("t_end", 1.0);
  }
  p.validate();
  if (!(s0.a > 0 && s0.b > 0 && s0.c > 0)) throw std::invalid_argument("bianchi.solve: a0, b0, c0 must be positive");
  if (t_end == s0.t) throw std::invalid_argument("bianchi.solve: t_end equals t_start");

  Outcome o = start(r);
  const Trajectory tr = integrate(p, s0, t_end, tol);
  o.artifacts.push_back({"trajectory.csv", trajectory_text(tr)});
  o.report["params"] = {{"p1", p.p1}, {"p2", p.p2}, {"p3", p.p3}, {"lambda", p.lambda}, {"alpha", opt_json(p.alpha0)}};
  o.report["integrator"] = integrator_json(tr);
  bool pass = true;

  if (cc) {
    // closed form against the rhs, derivatives by complex step
    const double ta = std::min(s0.t, t_end), tb = std::max(s0.t, t_end);
    double rhs_res = 0;
    for (int i = 1; i <= 200; ++i) {
      const double t = ta + (tb - ta) * i / 201.0;
      const double hc = 1e-30;
      const auto z = closed_form_abc<std::complex<double>>(*cc, K, std::complex<double>(t, hc));
      const ABCState s{t, z[0].real(), z[1].real(), z[2].real()};
      const auto f = abc_rhs(p, s);
      for (int c = 0; c < 3; ++c) rhs_res = std::max(rhs_res, rel_dev(f[c], z[c].imag() / hc));
    }
    double dev = 0;
    for (const auto& s : tr.samples) {
      const auto e = closed_form_abc<double>(*cc, K, s.t);
      dev = std::max({dev, rel_dev(s.a, e[0]), rel_dev(s.b, e[1]), rel_dev(s.c, e[2])});
    }
    const bool match = rhs_res < 1e-10 && dev < 10 * tol;
    pass = pass && match;
    o.report["closed_form"] = {{"case", to_string(*cc)},
                               {"consts", {{"k", K.k}, {"w3", K.w3}, {"alpha", K.alpha}, {"t0", K.t0}, {"a0", K.a0}, {"b0", K.b0}, {"c0", K.c0}}},
                               {"rhs_residual", rhs_res},
                               {"rhs_points", 200},
                               {"max_deviation", dev},
                               {"deviation_limit", 10 * tol},
                               {"match", match}};
  }

  // curvature on a sampled grid around the middle of the run
  if (coframe_supported(p) && !tr.early_stop()) {
    const double tc = 0.5 * (tr.front().t + tr.back().t);
    const auto names = coframe_coordinates(p);
    std::vector<std::pair<double, double>> ein, riem;
    json levels = json::array();
    std::optional<BianchiGrid> finest;
    for (int k = 0; k < sweep; ++k) {
      const double H = grid_h * std::pow(2.0, k);
      const Axis ta{"t", tc - 3 * H, H, 7};
      if (ta.min <= tr.front().t || ta.max() >= tr.back().t) break;
      std::array<Axis, 3> ga;
      for (int i = 0; i < 3; ++i) ga[i] = {names[i], 0.2 - 2 * H, H, 5};
      const auto states = sample_flow(p, tr.front(), ta);
      auto bg = bianchi_grid(p, ta, states, ga);
      const double e = einstein_residual(bg.metric, p.lambda);
      const double m = max_riemann(bg.metric);
      const double cl = exterior_derivative_closedness(bg.kahler);
      ein.push_back({H, e});
      riem.push_back({H, m});
      levels.push_back({{"h", H}, {"einstein_residual", e}, {"max_riemann", m}, {"kahler_closedness", cl}});
      if (k == 0) finest = std::move(bg);
    }
    json g = {{"t_center", tc}, {"levels", levels}, {"einstein_order", order_json(ein, 1e-12)}};
    if (!ein.empty()) {
      const bool ok = ein.front().second < grid_tol && order_ok(ein, 1e-12, 1.8, 2.2);
      g["einstein_ok"] = ok;
      pass = pass && ok;
    }
    if (alpha_eq_ab && !riem.empty()) {
      const bool flat = riem.front().second < flat_tol && order_ok(riem, 1e-14, 1.8, 2.2);
      g["riemann_order"] = order_json(riem, 1e-14);
      g["flat"] = flat;
      pass = pass && flat;
    }
    o.report["grid"] = g;
    if (finest) {
      finish(o, r);
      o.artifacts.push_back({"metric.json", dump(metric_document(finest->metric, &finest->kahler, r))});
    }
  } else if (!coframe_supported(p)) {
    o.report["grid"] = {{"skipped", "no coordinate coframe for these structure constants"}};
  }

  o.report["pass"] = pass;
  o.status = tr.early_stop() ? terminated : (pass ? ok : check_failed);
  finish(o, r);
  return o;
}

// ---------------------------------------------------------------- e2

bool unstable_flags_ok(const e2::E2Diagnostics& d) {
  return d.region_ok && d.monotone_ok() && d.nullcline_ok && d.ratio_upper_ok && d.ratio_monotone_ok;
}

bool completeness_ok(const e2::E2Diagnostics& d) {
  if (d.inconclusive || !d.tail_cauchy_gap || !d.k2_stability || !d.dist_growth_slope) return false;
  const auto d10 = d.distance_between(10, 100);
  const bool bound = d10 ? *d10 >= 0.9 * *d.dist_growth_slope * std::log(10.0) : true;
  return *d.tail_cauchy_gap < 1e-8 && *d.dist_growth_slope > 0 && *d.k2_stability <= 0.1 && bound;
}

json completeness_json(const e2::E2Diagnostics& d) {
  const auto d10 = d.distance_between(10, 100);
  json j = {{"distance_10_100", opt_json(d10)}, {"ok", completeness_ok(d)}};
  if (d10 && d.dist_growth_slope) j["bound_0_9_K2_ln10"] = 0.9 * *d.dist_growth_slope * std::log(10.0);
  return j;
}

e2::DiagnoseOptions diagnose_options(Req& r) {
  e2::DiagnoseOptions o;
  o.tol = r.get<double>("diagnose_tol", o.tol);
  o.reference_b = r.get<double>("reference_b", o.reference_b);
  o.b_top = r.get<double>("b_top", o.b_top);
  return o;
}

const char* classification_text(e2::StartRegion s) {
  switch (s) {
    case e2::StartRegion::below: return "c0^2 - a0^2 < 0: a grows without bound at a finite past time";
    case e2::StartRegion::above: return "c0^2 - a0^2 > 2 a0^2 b0^2: c grows without bound at a finite past time";
    case e2::StartRegion::inside: return "0 <= c0^2 - a0^2 <= 2 a0^2 b0^2";
  }
  return "";
}

Outcome e2_shoot(const json& j) {
  Req r("e2.shoot", j, {"q", "eps", "b_max", "t_span", "start", "tol", "diagnose_tol", "reference_b", "b_top"});
  const double q = r.get<double>("q", 1.0);
  const double eps = r.get<double>("eps", 1e-5 * q);
  e2::ShootStop stop{r.opt<double>("b_max"), r.opt<double>("t_span")};
  const auto st = r.opt<std::vector<double>>("start");
  const double tol = r.get<double>("tol", 1e-12);
  if (!stop.b_max && !stop.t_span) stop.b_max = 100.0;
  const auto dopt = diagnose_options(r);
  if (!(q > 0) || !(tol > 0)) throw std::invalid_argument("e2.shoot: q and tol must be positive");

  Outcome o = start(r);
  Trajectory tr;
  if (st) {
    if (st->size() != 3 || !((*st)[0] > 0 && (*st)[1] > 0 && (*st)[2] > 0))
      throw std::invalid_argument("e2.shoot: start must be three positive numbers a,b,c");
    const ABCState s{0.0, (*st)[0], (*st)[1], (*st)[2]};
    tr = e2::shoot_from(s, stop, tol);
    const auto region = e2::classify_start(s);
    const double q2 = std::max(0.5 * (s.a * s.a + s.c * s.c), 1e-2);
    const Trajectory back = integrate(e2::params(), s, -(stop.t_span ? *stop.t_span : 100 / q2), tol);
    json cls = {{"start_region", to_string(region)},
                {"condition", classification_text(region)},
                {"backward_stop", to_string(back.stop)},
                {"backward_t_last", back.samples.front().t}};
    if (back.early_stop()) {
      const auto& e = back.samples.front();
      cls["diverging"] = e.a > e.c ? "a" : "c";
      cls["backward_state"] = {e.a, e.b, e.c};
    }
    o.report["classification"] = cls;
  } else {
    tr = e2::shoot_unstable(q, eps, stop, tol);
  }
  o.artifacts.push_back({"trajectory.csv", trajectory_text(tr)});
  o.report["integrator"] = integrator_json(tr);
  const auto d = e2::diagnose(tr, dopt);
  o.report["diagnostics"] = to_json(d);
  if (!st) {
    o.report["completeness"] = completeness_json(d);
    o.report["flags_ok"] = unstable_flags_ok(d);
  }
  if (tr.early_stop())
    o.status = terminated;
  else if (!st && !(unstable_flags_ok(d) && completeness_ok(d)))
    o.status = check_failed;
  finish(o, r);
  return o;
}

Outcome e2_diagnose(const json& j) {
  Req r("e2.diagnose", j, {"trajectory_csv", "diagnose_tol", "reference_b", "b_top"});
  const Trajectory tr = trajectory_from_text(r.text("trajectory_csv"));
  const auto dopt = diagnose_options(r);
  Outcome o = start(r);
  const auto d = e2::diagnose(tr, dopt);
  o.report["diagnostics"] = to_json(d);
  o.report["flags_ok"] = unstable_flags_ok(d);
  if (!d.inconclusive) o.report["completeness"] = completeness_json(d);
  if (!unstable_flags_ok(d) || (!d.inconclusive && !completeness_ok(d))) o.status = check_failed;
  finish(o, r);
  return o;
}

Outcome e2_bolt(const json& j) {
  Req r("e2.bolt", j, {"trajectory_csv", "tol", "db_dr_tol", "change_tol"});
  const Trajectory tr = trajectory_from_text(r.text("trajectory_csv"));
  const double tol = r.get<double>("tol", 1e-12);
  const double db_tol = r.get<double>("db_dr_tol", 1e-4);
  const double ch_tol = r.get<double>("change_tol", 0.01);
  Outcome o = start(r);
  const auto prof = e2::bolt_profile(tr, tol);
  std::ostringstream os;
  e2::write_bolt_csv(os, prof);
  o.artifacts.push_back({"bolt.csv", os.str()});
  const auto rep = e2::bolt_smoothness(prof);
  o.report["bolt"] = to_json(rep);
  const bool pass = !rep.inconclusive && rep.db_dr_error < db_tol && rep.ratio_a2c2.change < ch_tol &&
                    rep.kahler_r3.change < ch_tol;
  o.report["pass"] = pass;
  if (!pass) o.status = check_failed;
  finish(o, r);
  return o;
}

Outcome e2_einstein(const json& j) {
  Req r("e2.einstein", j,
        {"trajectory_csv", "h", "sweep", "t_center", "theta_center", "n_t", "n_theta", "n_xy", "max_residual"});
  const Trajectory tr = trajectory_from_text(r.text("trajectory_csv"));
  e2::E2GridSpec spec;
  const double h = r.get<double>("h", 1e-3);
  const int sweep = r.get<int>("sweep", 3);
  spec.t_center = r.opt<double>("t_center");
  spec.theta_center = r.get<double>("theta_center", spec.theta_center);
  spec.n_t = r.get<std::size_t>("n_t", spec.n_t);
  spec.n_theta = r.get<std::size_t>("n_theta", spec.n_theta);
  spec.n_xy = r.get<std::size_t>("n_xy", spec.n_xy);
  const double max_res = r.get<double>("max_residual", 5e-3);
  if (!(h > 0) || sweep < 1 || sweep > 6) throw std::invalid_argument("e2.einstein: bad h or sweep");
  Outcome o = start(r);
  std::vector<std::pair<double, double>> hv;
  json levels = json::array();
  std::optional<BianchiGrid> finest;
  for (int k = 0; k < sweep; ++k) {
    spec.h = spec.h_xy = h * std::pow(2.0, k);
    auto g = e2::e2_metric_grid(tr, spec);
    const double e = einstein_residual(g.metric, -1.0);
    const double cl = exterior_derivative_closedness(g.kahler);
    hv.push_back({spec.h, e});
    levels.push_back({{"h", spec.h}, {"einstein_residual", e}, {"kahler_closedness", cl}});
    if (k == 0) finest = std::move(g);
  }
  o.report["levels"] = levels;
  o.report["einstein_order"] = order_json(hv, 1e-12);
  const bool pass = hv.front().second < max_res && order_ok(hv, 1e-12, 1.8, 2.2);
  o.report["pass"] = pass;
  if (!pass) o.status = check_failed;
  finish(o, r);
  o.artifacts.push_back({"e2_metric.json", dump(metric_document(finest->metric, &finest->kahler, r))});
  return o;
}

// ---------------------------------------------------------------- pde

pde::Domain domain_from(const std::vector<double>& v) {
  if (v.size() != 4) throw std::invalid_argument("domain must be x0,x1,y0,y1");
  pde::Domain d{v[0], v[1], v[2], v[3]};
  if (!(d.x1 > d.x0 && d.y1 > d.y0)) throw std::invalid_argument("domain must satisfy x0 < x1 and y0 < y1");
  return d;
}

Outcome pde_leaf_build(const json& j) {
  Req r("pde.leaf_build", j, {"h", "ell", "domain", "n", "curvature_tol", "pde_tol", "hyperbolic_tol"});
  const std::string h = r.get<std::string>("h", "x");
  const std::string ell = r.get<std::string>("ell", pde::kDefaultEll);
  const auto dom = domain_from(r.get<std::vector<double>>("domain", {0, 1, 1, 2}));
  const auto n = r.get<std::size_t>("n", 257);
  const double ctol = r.get<double>("curvature_tol", 1e-5);
  const double ptol = r.get<double>("pde_tol", 1e-4);
  const double htol = r.get<double>("hyperbolic_tol", 1e-4);
  pde::LeafValidation val;
  const auto spec = pde::make_leaf_spec(dom, n, h, ell, &val);
  Outcome o = start(r);
  const auto lm = pde::leaf_metric(spec);
  const auto ch = pde::verify_leaf(lm);
  o.report["validation"] = {{"harmonic_residual", val.harmonic_residual},
                            {"hyperbolic_residual", val.hyperbolic_residual},
                            {"hyperbolic_residual_fd", val.hyperbolic_residual_fd}};
  o.report["checks"] = {{"curvature_error", ch.curvature_error},
                        {"pde_residual", ch.pde.max_residual},
                        {"pde_evaluated", ch.pde.evaluated},
                        {"pde_excluded", ch.pde.excluded},
                        {"pde_vacuous", ch.pde.vacuous},
                        {"hyperbolic_error", ch.hyperbolic_error}};
  const bool pass = ch.curvature_error < ctol && ch.pde.max_residual < ptol && ch.hyperbolic_error < htol && !ch.pde.vacuous;
  o.report["pass"] = pass;
  if (!pass) o.status = check_failed;
  finish(o, r);
  json sj = pde::to_json(spec);
  sj["manifest"] = make_manifest(r.command(), r.resolved());
  o.artifacts.push_back({"leaf_spec.json", dump(sj)});
  o.artifacts.push_back({"leaf_metric.json", dump(metric_document(lm.metric, nullptr, r))});
  o.artifacts.push_back({"leaf_K.json", dump(to_json(lm.K))});
  return o;
}

Outcome pde_profile(const json& j) {
  Req r("pde.profile", j, {"leaf_spec", "metric", "x_base", "y_min", "y_step", "n_y", "X_step", "n_X", "substeps"});
  std::unique_ptr<pde::SurfaceMetric> sm;
  double x0, y0, y1, step;
  if (r.has("leaf_spec")) {
    if (r.has("metric")) throw std::invalid_argument("pde.profile: pass either leaf_spec or metric");
    const auto spec = pde::leaf_spec_from_json(r.object("leaf_spec"));
    sm = pde::leaf_surface_metric(spec);
    x0 = spec.domain.x0;
    y0 = spec.domain.y0;
    y1 = spec.domain.y1;
    step = (spec.domain.x1 - spec.domain.x0) / static_cast<double>(spec.n - 1);
  } else {
    const auto g = metric_from_json(r.object("metric"));
    if (g.dim() != 2) throw std::invalid_argument("pde.profile: metric must be two-dimensional");
    x0 = g.lattice().axis(0).min;
    y0 = g.lattice().axis(1).min;
    y1 = g.lattice().axis(1).max();
    step = g.lattice().axis(0).step;
    sm = std::make_unique<pde::GridSurfaceMetric>(g);
  }
  pde::ProfileRequest pr;
  pr.x_base = r.get<double>("x_base", x0);
  pr.y_min = r.get<double>("y_min", y0 + 0.2 * (y1 - y0));
  pr.y_step = r.get<double>("y_step", step);
  pr.n_y = r.get<std::size_t>("n_y", 21);
  pr.X_step = r.get<double>("X_step", step);
  pr.n_X = r.get<std::size_t>("n_X", 21);
  pr.substeps = r.get<int>("substeps", 4);
  Outcome o = start(r);
  const auto cp = pde::geodesic_parallel_profile(*sm, pr);
  o.report["coverage"] = {{"requested_X", cp.requested_X}, {"covered_X", cp.covered_X}, {"truncation", cp.truncation}};
  if (cp.covered_X >= 3) o.report["pullback_error"] = pde::profile_pullback_error(*sm, cp);
  if (cp.covered_X < cp.requested_X) o.status = terminated;
  finish(o, r);
  json cj = pde::to_json(cp);
  cj["manifest"] = make_manifest(r.command(), r.resolved());
  o.artifacts.push_back({"cprofile.json", dump(cj)});
  return o;
}

// true when every component is exactly constant along the u and v axes
bool uv_independent(const MetricGrid& g) {
  const Lattice& L = g.lattice();
  const std::size_t d = g.dim();
  for (std::size_t n = 0; n < L.size(); ++n)
    for (std::size_t ax = 2; ax < 4; ++ax) {
      if (L.coord(n, ax) == 0) continue;
      const std::size_t m = n - L.stride(ax);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k)
          if (g.g(n, i, k) != g.g(m, i, k)) return false;
    }
  return true;
}

Outcome pde_construct(const json& j) {
  Req r("pde.construct", j, {"profile", "n_uv", "h_uv", "compat_threshold", "init", "max_residual", "det_tol", "closed_tol"});
  const auto cp = pde::profile_from_json(r.object("profile"));
  pde::VecSysOptions vo;
  const auto n_uv = r.get<std::size_t>("n_uv", 5);
  const double h_uv = r.get<double>("h_uv", 0.0);
  vo.compat_threshold = r.get<double>("compat_threshold", vo.compat_threshold);
  const auto init = r.get<std::vector<double>>("init", {1, 0, 0, 1});
  const double max_res = r.get<double>("max_residual", 5e-3);
  const double det_tol = r.get<double>("det_tol", 1e-8);
  const double closed_tol = r.get<double>("closed_tol", 1e-10);
  if (init.size() != 4) throw std::invalid_argument("pde.construct: init must be a,b,r,s");
  std::copy(init.begin(), init.end(), vo.init.begin());
  if (init[0] * init[3] - init[2] * init[1] == 0) throw std::invalid_argument("pde.construct: init must have as - rb != 0");

  Outcome o = start(r);
  const auto f = pde::reduced_fields(cp);
  const auto s2 = pde::sys2_residuals(f, cp);
  o.report["fields"] = {{"excluded", f.excluded}};
  o.report["sys2"] = {{"r_x", s2.r_x}, {"r_y", s2.r_y}, {"l_x", s2.l_x}, {"p_x", s2.p_x}, {"second", s2.second}, {"evaluated", s2.evaluated}};
  pde::VecSysSolution v;
  try {
    v = pde::integrate_vecsys(pde::vecsys_coefficients(f), cp, vo);
  } catch (const std::runtime_error& e) {
    o.report["error"] = e.what();
    o.report["pass"] = false;
    o.status = check_failed;
    finish(o, r);
    return o;
  }
  const auto four = pde::assemble_four_metric(v, n_uv, h_uv);
  const double ein = einstein_residual(four.metric, 0.0);
  const double cl = exterior_derivative_closedness(four.kahler);
  const bool uv = uv_independent(four.metric);
  o.report["vecsys"] = {{"det0", v.det0}, {"det_spread", v.det_spread}, {"compat_residual", v.compat_residual}};
  o.report["four_metric"] = {{"einstein_residual", ein}, {"kahler_closedness", cl}, {"uv_independent", uv}};
  const bool pass = v.det_spread < det_tol && cl < closed_tol && ein < max_res && uv;
  o.report["pass"] = pass;
  if (!pass) o.status = check_failed;
  finish(o, r);
  o.artifacts.push_back({"four_metric.json", dump(metric_document(four.metric, &four.kahler, r))});
  json vj = {{"schema", 1}, {"kind", "vecsys"}, {"a", to_json(v.a)}, {"b", to_json(v.b)}, {"r", to_json(v.r)},
             {"s", to_json(v.s)}, {"det0", v.det0}};
  o.artifacts.push_back({"vecsys.json", dump(vj)});
  return o;
}

MetricGrid subsample(const MetricGrid& g, const std::vector<std::size_t>& stride) {
  const Lattice& L = g.lattice();
  const std::size_t d = g.dim();
  std::vector<Axis> axes;
  for (std::size_t k = 0; k < d; ++k) {
    Axis a = L.axis(k);
    a.count = (a.count - 1) / stride[k] + 1;
    a.step *= static_cast<double>(stride[k]);
    axes.push_back(a);
  }
  Lattice C(axes);
  std::vector<double> comps(C.size() * d * d);
  std::vector<std::size_t> idx(d);
  for (std::size_t n = 0; n < C.size(); ++n) {
    for (std::size_t k = 0; k < d; ++k) idx[k] = C.coord(n, k) * stride[k];
    const std::size_t m = L.index(idx);
    for (std::size_t i = 0; i < d * d; ++i) comps[n * d * d + i] = g.components()[m * d * d + i];
  }
  return MetricGrid(C, std::move(comps));
}

// max |Ric - lambda g| over nodes whose fine-grid indices keep `margin` from every boundary
double residual_in_region(const MetricGrid& g, double lambda, const std::vector<std::size_t>& stride,
                          const std::vector<std::size_t>& fine_count, const std::vector<std::size_t>& margin) {
  const TensorField ric = ricci(g);
  const Lattice& L = g.lattice();
  const std::size_t d = g.dim();
  double mx = 0;
  for (std::size_t n = 0; n < L.size(); ++n) {
    if (!ric.valid[n]) continue;
    bool inside = true;
    for (std::size_t k = 0; k < d && inside; ++k) {
      const std::size_t fi = L.coord(n, k) * stride[k];
      inside = fi >= margin[k] && fi + margin[k] <= fine_count[k] - 1;
    }
    if (!inside) continue;
    const double* R = ric.at(n);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) mx = std::max(mx, std::abs(R[i * d + k] - lambda * g.g(n, i, k)));
  }
  return mx;
}

Outcome pde_verify(const json& j) {
  Req r("pde.verify", j, {"metric", "lambda", "sweep", "max_residual", "floor"});
  const json& doc = r.object("metric");
  const auto g = metric_from_json(doc);
  const double lambda = r.get<double>("lambda", 0.0);
  const int sweep = r.get<int>("sweep", 3);
  const double max_res = r.get<double>("max_residual", 5e-3);
  const double floor = r.get<double>("floor", 1e-10);
  if (sweep < 1 || sweep > 6) throw std::invalid_argument("pde.verify: sweep must be in 1..6");
  const std::size_t d = g.dim();
  const std::size_t F = std::size_t{1} << (sweep - 1);
  std::vector<std::size_t> fine(d), margin(d), sub(d);
  bool any = false;
  for (std::size_t k = 0; k < d; ++k) {
    fine[k] = g.lattice().axis(k).count;
    sub[k] = fine[k] >= 4 * F + 1 ? 1 : 0;
    any = any || sub[k];
    margin[k] = sub[k] ? F : 1;
  }
  if (sweep > 1 && !any) throw std::invalid_argument("pde.verify: no axis has enough nodes for the requested sweep");

  Outcome o = start(r);
  std::vector<std::pair<double, double>> hv;
  json levels = json::array();
  for (int k = 0; k < sweep; ++k) {
    std::vector<std::size_t> stride(d);
    double h = 0;
    for (std::size_t a = 0; a < d; ++a) {
      stride[a] = sub[a] ? (std::size_t{1} << k) : 1;
      if (sub[a]) h = std::max(h, g.lattice().axis(a).step * static_cast<double>(stride[a]));
    }
    const MetricGrid gk = k == 0 ? g : subsample(g, stride);
    const double e = residual_in_region(gk, lambda, stride, fine, margin);
    hv.push_back({h, e});
    levels.push_back({{"h", h}, {"einstein_residual", e}});
  }
  o.report["levels"] = levels;
  o.report["full_grid_residual"] = einstein_residual(g, lambda);
  o.report["einstein_order"] = order_json(hv, floor);
  bool pass = o.report["full_grid_residual"].get<double>() < max_res && order_ok(hv, floor, 1.8, 2.2);
  if (doc.contains("kahler")) {
    const double cl = exterior_derivative_closedness(two_form_from_json(doc.at("kahler")));
    o.report["kahler_closedness"] = cl;
  }
  if (doc.contains("manifest")) o.report["source_manifest"] = doc.at("manifest");
  o.report["pass"] = pass;
  if (!pass) o.status = check_failed;
  finish(o, r);
  return o;
}

// ---------------------------------------------------------------- algebra

double angle_gap(double a, double b) {
  const double d = std::remainder(a - b, 2 * std::numbers::pi);
  return std::abs(d);
}

Outcome check_algebra(const json& j) {
  Req r("check.algebra", j, {"seed", "n", "flows", "span", "tol"});
  const auto seed = r.get<std::uint64_t>("seed", 1);
  const auto n = r.get<std::size_t>("n", 10000);
  const auto flows = r.get<std::size_t>("flows", 100);
  const double span = r.get<double>("span", 0.5);
  const double tol = r.get<double>("tol", 1e-12);
  Outcome o = start(r);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1, 1), pos(0.05, 3.0), ang(-std::numbers::pi, std::numbers::pi);

  // PQRS round trips in both directions
  double rt_pqrs = 0, rt_frame = 0, kahler = 0;
  for (std::size_t i = 0; i < n; ++i) {
    PQRSState s;
    s.P = U(rng);
    s.Q = U(rng);
    s.R = pos(rng);
    s.S = ang(rng);
    s.L = U(rng);
    s.N = U(rng);
    const auto fc = from_pqrs(s);
    for (double v : kahler_relation_residuals(fc)) kahler = std::max(kahler, std::abs(v));
    const auto back = to_pqrs(fc);
    rt_pqrs = std::max({rt_pqrs, std::abs(back.P - s.P), std::abs(back.Q - s.Q), std::abs(back.R - s.R),
                        std::abs(back.L - s.L), std::abs(back.N - s.N),
                        back.S ? angle_gap(*back.S, *s.S) : 1.0});
    const auto fc2 = from_pqrs(back);
    const double a[] = {fc.A, fc.B, fc.C, fc.D, fc.E, fc.F, fc.G, fc.H, fc.L, fc.N};
    const double b[] = {fc2.A, fc2.B, fc2.C, fc2.D, fc2.E, fc2.F, fc2.G, fc2.H, fc2.L, fc2.N};
    for (int k = 0; k < 10; ++k) rt_frame = std::max(rt_frame, std::abs(a[k] - b[k]));
  }

  // lambda constraint along sys_rhs flows
  double drift = 0;
  std::size_t flows_done = 0;
  for (std::size_t i = 0; i < flows; ++i) {
    PQRSState s;
    s.P = U(rng);
    s.Q = U(rng);
    s.R = pos(rng) / 3;
    s.S = ang(rng);
    s.L = U(rng) / 2;
    s.N = U(rng) / 2;
    const double l0 = lambda_constraint(s);
    ode::Options opt;
    opt.rtol = opt.atol = tol;
    const auto res = ode::integrate<6>([](double, const ode::Vec<6>& y) { return sys_rhs_vector(y); }, 0.0,
                                       to_sys_vector(s), span, opt);
    if (res.status != ode::Termination::completed) continue;
    ++flows_done;
    drift = std::max(drift, std::abs(lambda_constraint(from_sys_vector(res.y)) - l0));
  }

  // E(2) derivative identities
  double ident = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ABCState s{0, pos(rng), pos(rng), pos(rng)};
    for (double v : e2::derivative_identity_residuals(s)) ident = std::max(ident, std::abs(v));
  }

  o.report["pqrs_round_trip"] = rt_pqrs;
  o.report["frame_round_trip"] = rt_frame;
  o.report["kahler_relations"] = kahler;
  o.report["lambda_drift"] = drift;
  o.report["flows_completed"] = flows_done;
  o.report["derivative_identities"] = ident;
  const bool pass = rt_pqrs < 1e-12 && rt_frame < 1e-12 && kahler < 1e-12 && drift < 1e-8 && ident < 1e-12 &&
                    flows_done == flows;
  o.report["pass"] = pass;
  if (!pass) o.status = check_failed;
  finish(o, r);
  return o;
}

using Handler = Outcome (*)(const json&);

const std::map<std::string, Handler>& table() {
  static const std::map<std::string, Handler> t{
      {"bianchi.solve", bianchi_solve}, {"e2.shoot", e2_shoot},       {"e2.diagnose", e2_diagnose},
      {"e2.bolt", e2_bolt},             {"e2.einstein", e2_einstein}, {"pde.leaf_build", pde_leaf_build},
      {"pde.profile", pde_profile},     {"pde.construct", pde_construct}, {"pde.verify", pde_verify},
      {"check.algebra", check_algebra}};
  return t;
}

}  // namespace

Outcome run(const std::string& command, const json& request) {
  const auto& t = table();
  const auto it = t.find(command);
  if (it == t.end()) throw std::invalid_argument("unknown command '" + command + "'");
  return it->second(request);
}

std::vector<std::string> commands() {
  std::vector<std::string> out;
  for (const auto& [k, v] : table()) out.push_back(k);
  return out;
}

}  // namespace kem::scenario
