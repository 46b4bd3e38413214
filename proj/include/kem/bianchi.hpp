// Diagonal Bianchi type A Kahler-Einstein reduction in the variables (a, b, c).
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kem/frame_algebra.hpp"
#include "kem/grid.hpp"
#include "kem/trajectory.hpp"

namespace kem {

struct BianchiParams {
  double p1 = 0, p2 = 0, p3 = 0;
  double lambda = 0;
  std::optional<double> alpha0;  // required iff p3 == 0

  // throws std::invalid_argument describing the violated constraint
  void validate() const;
  double alpha(double a, double b) const { return p3 != 0 ? -(lambda / p3) * a * a * b * b : *alpha0; }
};

std::array<double, 3> abc_rhs(const BianchiParams& p, const ABCState& s);

// ---- explicit Ricci-flat families with p3 = 0 ----

enum class ClosedFormCase { poincare, torus, heisenberg, euclidean };

const char* to_string(ClosedFormCase c);
std::optional<ClosedFormCase> closed_form_case_from_string(const std::string& name);

struct ClosedFormConsts {
  double k = 1, w3 = 1, alpha = 0, t0 = 0;
  double a0 = 1, b0 = 1, c0 = 1;  // torus only
};

BianchiParams closed_form_params(ClosedFormCase cc, const ClosedFormConsts& k);

// open interval of regular times; infinite ends where unbounded
std::pair<double, double> closed_form_interval(ClosedFormCase cc, const ClosedFormConsts& k);

// raw formulas, usable with complex arguments; no domain checks
template <class T>
std::array<T, 3> closed_form_abc(ClosedFormCase cc, const ClosedFormConsts& K, T t) {
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::sin;
  using std::sinh;
  using std::sqrt;
  using std::tan;
  const T s = t - K.t0;
  const double w = K.w3;
  switch (cc) {
    case ClosedFormCase::poincare:
      return {sqrt(w * cos(w * s) / sin(w * s)), sqrt(w * tan(w * s)),
              K.k * exp(K.alpha * s) * sqrt(sin(2.0 * w * s) / (2.0 * w))};
    case ClosedFormCase::torus:
      return {T(K.a0), T(K.b0), K.c0 * exp(K.alpha * s)};
    case ClosedFormCase::heisenberg:
      return {1.0 / sqrt(s), w * sqrt(s), K.k * exp(K.alpha * s) * sqrt(s)};
    case ClosedFormCase::euclidean:
      return {sqrt(w * cosh(w * s) / sinh(w * s)), sqrt(w * sinh(w * s) / cosh(w * s)),
              K.k * exp(K.alpha * s) * sqrt(sinh(2.0 * w * s) / (2.0 * w))};
  }
  return {T(0), T(0), T(0)};
}

// checked evaluation; throws std::domain_error at or beyond a singular endpoint
ABCState closed_form(ClosedFormCase cc, const ClosedFormConsts& k, double t);

// ((abc)^2, a^2, b^2, c^2)
std::array<double, 4> metric_components(const ABCState& s);

// (a b c^2, a b): coefficients of dt^sigma3 and sigma1^sigma2
std::array<double, 2> kahler_form_components(const ABCState& s);

// (a/b, ab(c^2 - 2/3 a^2 b^2)); conserved when p = (0,0,1), lambda = -1
std::array<double, 2> heisenberg_invariants(const ABCState& s);

// frame table; throws std::domain_error if a, b or c vanishes
FrameCoefficients bianchi_frame_coefficients(const BianchiParams& p, const ABCState& s);

// |a^2 p1 - b^2 p2| / (abc), the table value of R
double frame_table_R(const BianchiParams& p, const ABCState& s);

struct IntegrateOptions {
  std::optional<double> b_stop;  // stop when b first reaches this value
  double h_max = std::numeric_limits<double>::infinity();
};

// adaptive 5(4) integration with rtol = atol = tol; t_end may precede s0.t
Trajectory integrate(const BianchiParams& p, const ABCState& s0, double t_end, double tol,
                     const IntegrateOptions& opt = {});

// ---- left-invariant coframes and metric grids ----

// sigma_i = S[i][j] du_j in group coordinates u; supported structure constants:
// (0,0,0), (1,0,0), (0,0,1), (1,0,1), (1,1,0), (1,-1,0)
std::array<std::array<double, 3>, 3> coframe_matrix(const BianchiParams& p, const std::array<double, 3>& u);
std::array<std::string, 3> coframe_coordinates(const BianchiParams& p);
bool coframe_supported(const BianchiParams& p);

// states at every node of t_axis: seed is carried adaptively to the first
// node, then fixed-step RK4 with `substeps` steps per spacing
std::vector<ABCState> sample_flow(const BianchiParams& p, const ABCState& seed, const Axis& t_axis,
                                  int substeps = 4, double tol = 1e-13);

struct BianchiGrid {
  MetricGrid metric;
  TwoFormGrid kahler;
};

// g = (abc)^2 dt^2 + a^2 s1^2 + b^2 s2^2 + c^2 s3^2 on (t, u1, u2, u3)
BianchiGrid bianchi_grid(const BianchiParams& p, const Axis& t_axis, const std::vector<ABCState>& at_nodes,
                         const std::array<Axis, 3>& group_axes);

}  // namespace kem
