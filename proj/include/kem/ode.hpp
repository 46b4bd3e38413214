// Adaptive Dormand-Prince 5(4) with dense output, events and landing times,
// plus a classical fixed-step RK4.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace kem::ode {

template <std::size_t N>
using Vec = std::array<double, N>;

enum class Termination {
  completed,
  event,
  step_underflow,
  threshold_exceeded,
  invalid_state,
  max_steps,
};

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::event: return "event";
    case Termination::step_underflow: return "step_underflow";
    case Termination::threshold_exceeded: return "threshold_exceeded";
    case Termination::invalid_state: return "invalid_state";
    case Termination::max_steps: return "max_steps";
  }
  return "unknown";
}

struct Options {
  double rtol = 1e-10;
  double atol = 1e-10;
  double h_init = 0.0;  // 0: pick automatically
  double h_max = std::numeric_limits<double>::infinity();
  double h_min_rel = 1e-12;  // relative to |t_end - t0|
  double blowup = 1e12;      // any |y_i| above this stops the run
  std::size_t max_steps = 5'000'000;
  // times (inside the span, in integration order) that steps must land on
  std::vector<double> landing;
};

// One accepted step with its continuous extension.
template <std::size_t N>
struct DenseStep {
  double t0 = 0, t1 = 0;
  Vec<N> y0{}, y1{};
  std::array<Vec<N>, 5> rc{};

  Vec<N> operator()(double t) const {
    const double h = t1 - t0;
    const double th = h == 0 ? 0.0 : (t - t0) / h;
    const double th1 = 1.0 - th;
    Vec<N> y;
    for (std::size_t i = 0; i < N; ++i)
      y[i] = rc[0][i] +
             th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])));
    return y;
  }
};

template <std::size_t N>
struct Event {
  std::function<double(double, const Vec<N>&)> g;
  bool terminal = true;
  int direction = 0;  // +1 rising only, -1 falling only, 0 either
};

template <std::size_t N>
struct Result {
  double t = 0;
  Vec<N> y{};
  Termination status = Termination::completed;
  int event_index = -1;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
  double last_h = 0;
};

namespace detail {

// Dormand-Prince tableau and dense-output weights (Hairer, Norsett, Wanner).
struct DP {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0,
                          d7 = 69997945.0 / 29380423.0;
};

template <std::size_t N>
bool finite(const Vec<N>& y) {
  for (double v : y)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace detail

// f(t, y) -> dy/dt. `valid` rejects states (e.g. loss of positivity) and
// terminates with the last valid state. `observer` sees every accepted step.
template <std::size_t N, class F>
Result<N> integrate(F&& f, double t0, const Vec<N>& y0, double t_end, const Options& opt,
                    const std::vector<Event<N>>& events = {},
                    const std::function<void(const DenseStep<N>&)>& observer = {},
                    const std::function<bool(const Vec<N>&)>& valid = {}) {
  using detail::DP;
  if (!(opt.rtol > 0) || !(opt.atol >= 0)) throw std::invalid_argument("tolerances must be positive");
  Result<N> res;
  res.t = t0;
  res.y = y0;
  const double span = t_end - t0;
  if (span == 0) return res;
  const double dir = span > 0 ? 1.0 : -1.0;
  const double h_min = opt.h_min_rel * std::abs(span);

  auto scale = [&](double a, double b) { return opt.atol + opt.rtol * std::max(std::abs(a), std::abs(b)); };

  double t = t0;
  Vec<N> y = y0;
  Vec<N> k1 = f(t, y);
  ++res.evaluations;

  double h;
  if (opt.h_init > 0) {
    h = opt.h_init;
  } else {
    // starting step heuristic
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = scale(y[i], y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::abs(span));
    Vec<N> y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + dir * h0 * k1[i];
    Vec<N> f1 = f(t + dir * h0, y1);
    ++res.evaluations;
    double d2 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = scale(y[i], y[i]);
      d2 += ((f1[i] - k1[i]) / sc) * ((f1[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min(100 * h0, h1);
  }
  h = std::min({h, opt.h_max, std::abs(span)});

  std::vector<double> gvals(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) gvals[e] = events[e].g(t, y);

  std::size_t next_land = 0;
  while (next_land < opt.landing.size() && dir * (opt.landing[next_land] - t) <= 0) ++next_land;

  bool reject_prev = false;
  Vec<N> k2, k3, k4, k5, k6, k7, yt, y_new;
  while (true) {
    if (res.accepted + res.rejected >= opt.max_steps) {
      res.status = Termination::max_steps;
      break;
    }
    bool hits_end = false;
    double target = t_end;
    if (next_land < opt.landing.size() && dir * (opt.landing[next_land] - t_end) < 0) target = opt.landing[next_land];
    if (h >= std::abs(target - t) * (1 - 1e-14)) {
      h = std::abs(target - t);
      hits_end = true;
    }
    if (h < h_min && !hits_end) {
      res.status = Termination::step_underflow;
      break;
    }
    const double hs = dir * h;

    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * DP::a21 * k1[i];
    k2 = f(t + DP::c2 * hs, yt);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * (DP::a31 * k1[i] + DP::a32 * k2[i]);
    k3 = f(t + DP::c3 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (DP::a41 * k1[i] + DP::a42 * k2[i] + DP::a43 * k3[i]);
    k4 = f(t + DP::c4 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (DP::a51 * k1[i] + DP::a52 * k2[i] + DP::a53 * k3[i] + DP::a54 * k4[i]);
    k5 = f(t + DP::c5 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (DP::a61 * k1[i] + DP::a62 * k2[i] + DP::a63 * k3[i] + DP::a64 * k4[i] +
                           DP::a65 * k5[i]);
    k6 = f(t + hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      y_new[i] = y[i] + hs * (DP::a71 * k1[i] + DP::a73 * k3[i] + DP::a74 * k4[i] + DP::a75 * k5[i] +
                              DP::a76 * k6[i]);
    const double t_new = hits_end ? target : t + hs;
    k7 = f(t_new, y_new);
    res.evaluations += 6;

    double err = 0;
    bool ok = detail::finite(y_new) && detail::finite(k7);
    if (ok) {
      for (std::size_t i = 0; i < N; ++i) {
        const double e = hs * (DP::e1 * k1[i] + DP::e3 * k3[i] + DP::e4 * k4[i] + DP::e5 * k5[i] +
                               DP::e6 * k6[i] + DP::e7 * k7[i]);
        const double r = e / scale(y[i], y_new[i]);
        err += r * r;
      }
      err = std::sqrt(err / N);
      if (!std::isfinite(err)) ok = false;
    }
    if (ok && valid && !valid(y_new)) {
      // shrink toward the validity boundary, give up below h_min
      if (h * 0.25 < h_min) {
        res.status = Termination::invalid_state;
        break;
      }
      h *= 0.25;
      ++res.rejected;
      reject_prev = true;
      continue;
    }
    if (!ok) {
      h *= 0.1;
      ++res.rejected;
      reject_prev = true;
      continue;
    }
    if (err > 1.0) {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      ++res.rejected;
      reject_prev = true;
      continue;
    }

    DenseStep<N> ds;
    ds.t0 = t;
    ds.t1 = t_new;
    ds.y0 = y;
    ds.y1 = y_new;
    for (std::size_t i = 0; i < N; ++i) {
      const double ydiff = y_new[i] - y[i];
      const double bspl = hs * k1[i] - ydiff;
      ds.rc[0][i] = y[i];
      ds.rc[1][i] = ydiff;
      ds.rc[2][i] = bspl;
      ds.rc[3][i] = ydiff - hs * k7[i] - bspl;
      ds.rc[4][i] = hs * (DP::d1 * k1[i] + DP::d3 * k3[i] + DP::d4 * k4[i] + DP::d5 * k5[i] +
                          DP::d6 * k6[i] + DP::d7 * k7[i]);
    }
    ++res.accepted;
    res.last_h = h;

    // events: locate the earliest sign change inside the step
    int hit = -1;
    double t_hit = t_new;
    for (std::size_t e = 0; e < events.size(); ++e) {
      const double g1 = events[e].g(t_new, y_new);
      const double g0 = gvals[e];
      const bool rising = g0 < 0 && g1 >= 0;
      const bool falling = g0 > 0 && g1 <= 0;
      const bool crossed = (events[e].direction >= 0 && rising) || (events[e].direction <= 0 && falling);
      if (crossed && events[e].terminal) {
        double lo = t, hi = t_new, glo = g0;
        for (int it = 0; it < 200 && std::abs(hi - lo) > 4 * std::numeric_limits<double>::epsilon() * std::abs(hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          const double gm = events[e].g(mid, ds(mid));
          if ((glo < 0) == (gm < 0) && gm != 0) {
            lo = mid;
            glo = gm;
          } else {
            hi = mid;
          }
        }
        if (hit < 0 || dir * (hi - t_hit) < 0) {
          hit = static_cast<int>(e);
          t_hit = hi;
        }
      }
      gvals[e] = g1;
    }
    if (hit >= 0) {
      const Vec<N> y_hit = (t_hit == t_new) ? y_new : ds(t_hit);
      // observers still see the full step; the run ends at the event point
      if (observer) observer(ds);
      res.t = t_hit;
      res.y = y_hit;
      res.status = Termination::event;
      res.event_index = hit;
      return res;
    }
    if (observer) observer(ds);

    t = t_new;
    y = y_new;
    k1 = k7;
    res.t = t;
    res.y = y;
    while (next_land < opt.landing.size() && dir * (opt.landing[next_land] - t) <= 0) ++next_land;

    bool big = false;
    for (double v : y)
      if (std::abs(v) > opt.blowup) big = true;
    if (big) {
      res.status = Termination::threshold_exceeded;
      break;
    }
    if (hits_end && target == t_end) {
      res.status = Termination::completed;
      break;
    }

    double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    fac = std::clamp(fac, 0.2, reject_prev ? 1.0 : 10.0);
    h = std::min(h * fac, opt.h_max);
    reject_prev = false;
  }
  return res;
}

template <std::size_t N, class F>
Vec<N> rk4_step(F&& f, double t, const Vec<N>& y, double h) {
  Vec<N> k1 = f(t, y), yt, k2, k3, k4;
  for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + 0.5 * h * k1[i];
  k2 = f(t + 0.5 * h, yt);
  for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + 0.5 * h * k2[i];
  k3 = f(t + 0.5 * h, yt);
  for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * k3[i];
  k4 = f(t + h, yt);
  Vec<N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return out;
}

// n fixed RK4 steps from t to t + n*h
template <std::size_t N, class F>
Vec<N> rk4(F&& f, double t, Vec<N> y, double h, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y = rk4_step<N>(f, t, y, h);
    t += h;
  }
  return y;
}

}  // namespace kem::ode
