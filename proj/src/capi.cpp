#include "kem/kem.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "kem/bianchi.hpp"
#include "kem/curvature.hpp"
#include "kem/e2_flow.hpp"
#include "kem/frame_algebra.hpp"
#include "kem/manifest.hpp"
#include "kem/scenarios.hpp"

struct kem_trajectory {
  kem::Trajectory tr;
};

struct kem_metric {
  kem::MetricGrid g;
};

namespace {

thread_local std::string last_error;

template <class F>
kem_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return KEM_OK;
  } catch (const std::invalid_argument& e) {
    last_error = e.what();
    return KEM_E_INVALID;
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return KEM_E_INVALID;
  } catch (const std::domain_error& e) {
    last_error = e.what();
    return KEM_E_DOMAIN;
  } catch (const std::runtime_error& e) {
    last_error = e.what();
    return KEM_E_COMPUTE;
  } catch (const std::exception& e) {
    last_error = e.what();
    return KEM_E_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return KEM_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::runtime_error("out of memory");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

kem::FrameCoefficients to_cpp(const kem_frame& f) { return {f.A, f.B, f.C, f.D, f.E, f.F, f.G, f.H, f.L, f.N}; }
kem_frame to_c(const kem::FrameCoefficients& f) { return {f.A, f.B, f.C, f.D, f.E, f.F, f.G, f.H, f.L, f.N}; }

kem::PQRSState to_cpp(const kem_pqrs& s) {
  kem::PQRSState o;
  o.P = s.P;
  o.Q = s.Q;
  o.R = s.R;
  if (s.has_S) o.S = s.S;
  o.L = s.L;
  o.N = s.N;
  return o;
}

kem_pqrs to_c(const kem::PQRSState& s) {
  return {s.P, s.Q, s.R, s.S.value_or(0.0), s.L, s.N, s.S ? 1 : 0};
}

kem::BianchiParams to_cpp(const kem_bianchi_params& p) {
  kem::BianchiParams o;
  o.p1 = p.p1;
  o.p2 = p.p2;
  o.p3 = p.p3;
  o.lambda = p.lambda;
  if (p.has_alpha0) o.alpha0 = p.alpha0;
  o.validate();
  return o;
}

}  // namespace

extern "C" {

const char* kem_version(void) { return "1.0.0"; }
const char* kem_last_error(void) { return last_error.c_str(); }
void kem_string_free(char* s) { std::free(s); }
uint64_t kem_fnv1a64(const char* data, size_t len) { return kem::fnv1a64(std::string_view(data ? data : "", data ? len : 0)); }

kem_status kem_run(const char* command, const char* request_json, char** result_json) {
  return guarded([&] {
    need(command, "command");
    need(request_json, "request");
    need(result_json, "result");
    const auto out = kem::scenario::run(command, nlohmann::json::parse(request_json));
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : out.artifacts) arts.push_back({{"name", a.name}, {"content", a.content}});
    const nlohmann::json j = {{"status", out.status}, {"report", out.report}, {"artifacts", arts}};
    *result_json = dup(j.dump());
  });
}

kem_status kem_commands(char** out) {
  return guarded([&] {
    need(out, "out");
    std::string s;
    for (const auto& c : kem::scenario::commands()) s += c + "\n";
    *out = dup(s);
  });
}

kem_status kem_to_pqrs(const kem_frame* f, kem_pqrs* out) {
  return guarded([&] {
    need(f, "frame");
    need(out, "out");
    *out = to_c(kem::to_pqrs(to_cpp(*f)));
  });
}

kem_status kem_from_pqrs(const kem_pqrs* s, kem_frame* out) {
  return guarded([&] {
    need(s, "state");
    need(out, "out");
    *out = to_c(kem::from_pqrs(to_cpp(*s)));
  });
}

kem_status kem_kahler_residuals(const kem_frame* f, double out[4]) {
  return guarded([&] {
    need(f, "frame");
    need(out, "out");
    const auto r = kem::kahler_relation_residuals(to_cpp(*f));
    for (int i = 0; i < 4; ++i) out[i] = r[i];
  });
}

kem_status kem_sys_rhs(const kem_pqrs* s, double out[5]) {
  return guarded([&] {
    need(s, "state");
    need(out, "out");
    const auto r = kem::sys_rhs(to_cpp(*s));
    for (int i = 0; i < 5; ++i) out[i] = r[i];
  });
}

kem_status kem_lambda_constraint(const kem_pqrs* s, double* out) {
  return guarded([&] {
    need(s, "state");
    need(out, "out");
    *out = kem::lambda_constraint(to_cpp(*s));
  });
}

kem_status kem_abc_rhs(const kem_bianchi_params* p, double a, double b, double c, double out[3]) {
  return guarded([&] {
    need(p, "params");
    need(out, "out");
    const auto r = kem::abc_rhs(to_cpp(*p), {0, a, b, c});
    for (int i = 0; i < 3; ++i) out[i] = r[i];
  });
}

kem_status kem_e2_rhs(double a, double b, double c, double out[3]) {
  return guarded([&] {
    need(out, "out");
    const auto r = kem::e2::e2_rhs({0, a, b, c});
    for (int i = 0; i < 3; ++i) out[i] = r[i];
  });
}

kem_status kem_e2_linearization(double q, double eigenvalues[3], double unstable[3]) {
  return guarded([&] {
    need(eigenvalues, "eigenvalues");
    if (!(q > 0)) throw std::invalid_argument("q must be positive");
    const auto lin = kem::e2::linearization(q, kem::e2::Equilibrium::qoq);
    for (int i = 0; i < 3; ++i) eigenvalues[i] = lin.eigenvalues[i];
    if (unstable) {
      if (!lin.unstable) throw std::runtime_error("no unstable direction");
      for (int i = 0; i < 3; ++i) unstable[i] = (*lin.unstable)[i];
    }
  });
}

kem_status kem_bianchi_integrate(const kem_bianchi_params* p, const double state[4], double t_end, double tol,
                                 kem_trajectory** out) {
  return guarded([&] {
    need(p, "params");
    need(state, "state");
    need(out, "out");
    if (!(tol > 0)) throw std::invalid_argument("tol must be positive");
    auto t = std::make_unique<kem_trajectory>();
    t->tr = kem::integrate(to_cpp(*p), {state[0], state[1], state[2], state[3]}, t_end, tol);
    *out = t.release();
  });
}

kem_status kem_e2_shoot(double q, double eps, double b_max, double tol, kem_trajectory** out) {
  return guarded([&] {
    need(out, "out");
    kem::e2::ShootStop stop;
    if (b_max > 0)
      stop.b_max = b_max;
    else
      stop.t_span = 100 / (q * q);
    auto t = std::make_unique<kem_trajectory>();
    t->tr = kem::e2::shoot_unstable(q, eps, stop, tol);
    *out = t.release();
  });
}

kem_status kem_trajectory_from_csv(const char* csv, kem_trajectory** out) {
  return guarded([&] {
    need(csv, "csv");
    need(out, "out");
    std::istringstream is(csv);
    auto t = std::make_unique<kem_trajectory>();
    t->tr = kem::read_trajectory_csv(is);
    *out = t.release();
  });
}

kem_status kem_trajectory_to_csv(const kem_trajectory* tr, char** out) {
  return guarded([&] {
    need(tr, "trajectory");
    need(out, "out");
    std::ostringstream os;
    kem::write_trajectory_csv(os, tr->tr);
    *out = dup(os.str());
  });
}

size_t kem_trajectory_size(const kem_trajectory* tr) { return tr ? tr->tr.samples.size() : 0; }

kem_status kem_trajectory_sample(const kem_trajectory* tr, size_t i, double out[4]) {
  return guarded([&] {
    need(tr, "trajectory");
    need(out, "out");
    if (i >= tr->tr.samples.size()) throw std::invalid_argument("sample index out of range");
    const auto& s = tr->tr.samples[i];
    out[0] = s.t;
    out[1] = s.a;
    out[2] = s.b;
    out[3] = s.c;
  });
}

kem_stop kem_trajectory_stop(const kem_trajectory* tr) {
  if (!tr) return KEM_STOP_COMPLETED;
  switch (tr->tr.stop) {
    case kem::StopReason::completed: return KEM_STOP_COMPLETED;
    case kem::StopReason::target: return KEM_STOP_TARGET;
    case kem::StopReason::blow_up: return KEM_STOP_BLOW_UP;
    case kem::StopReason::positivity_lost: return KEM_STOP_POSITIVITY_LOST;
  }
  return KEM_STOP_COMPLETED;
}

void kem_trajectory_free(kem_trajectory* tr) { delete tr; }

kem_status kem_metric_from_json(const char* json, kem_metric** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    auto m = std::make_unique<kem_metric>();
    m->g = kem::metric_from_json(nlohmann::json::parse(json));
    *out = m.release();
  });
}

size_t kem_metric_dim(const kem_metric* m) { return m ? m->g.dim() : 0; }
size_t kem_metric_nodes(const kem_metric* m) { return m ? m->g.lattice().size() : 0; }

kem_status kem_metric_einstein_residual(const kem_metric* m, double lambda, double* out) {
  return guarded([&] {
    need(m, "metric");
    need(out, "out");
    *out = kem::einstein_residual(m->g, lambda);
  });
}

kem_status kem_metric_max_riemann(const kem_metric* m, double* out) {
  return guarded([&] {
    need(m, "metric");
    need(out, "out");
    *out = kem::max_riemann(m->g);
  });
}

void kem_metric_free(kem_metric* m) { delete m; }

}  // extern "C"
