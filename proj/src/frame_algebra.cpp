#include "kem/frame_algebra.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kem {

std::array<double, 4> kahler_relation_residuals(const FrameCoefficients& f) {
  return {(f.A - f.D) - (f.F + f.G), (f.B + f.C) - (f.H - f.E), f.N - (f.A + f.D), f.N + (f.E + f.H)};
}

std::array<double, 2> integrability_residuals(const FrameCoefficients& f) {
  const auto r = kahler_relation_residuals(f);
  return {r[0], r[1]};
}

bool kahler_valid(const FrameCoefficients& fc, double tol) {
  for (double r : kahler_relation_residuals(fc))
    if (!(std::abs(r) <= tol)) return false;
  return true;
}

ShearPair shear_coefficients(double b11, double b12, double b21, double b22) {
  return {(b11 - b22) / 2, -(b12 + b21) / 2};
}

std::array<std::array<double, 2>, 2> shear_matrix(const ShearPair& s) {
  return {{{-s.sigma1, s.sigma2}, {s.sigma2, s.sigma1}}};
}

PQRSState to_pqrs(const FrameCoefficients& f) {
  PQRSState s;
  s.P = (f.B - f.C) + (f.F - f.G);
  s.Q = (f.B - f.C) - (f.F - f.G);
  const double u = f.B + f.C, v = f.F + f.G;
  s.R = std::hypot(u, v);
  if (s.R > 0) {
    double ang = std::atan2(u, v);
    if (ang <= -std::numbers::pi) ang = std::numbers::pi;
    s.S = ang;
  }
  s.L = f.L;
  s.N = f.N;
  return s;
}

FrameCoefficients from_pqrs(const PQRSState& s) {
  if (s.R < 0) throw std::invalid_argument("R must be non-negative");
  double sn = 0, cs = 0;
  if (s.R > 0) {
    if (!s.S) throw std::invalid_argument("S is required when R > 0");
    sn = std::sin(*s.S);
    cs = std::cos(*s.S);
  }
  FrameCoefficients f;
  f.B = ((s.P + s.Q) + 2 * s.R * sn) / 4;
  f.C = (-(s.P + s.Q) + 2 * s.R * sn) / 4;
  f.F = ((s.P - s.Q) + 2 * s.R * cs) / 4;
  f.G = (-(s.P - s.Q) + 2 * s.R * cs) / 4;
  f.A = (s.N + f.F + f.G) / 2;
  f.D = (s.N - f.F - f.G) / 2;
  f.E = -(s.N + f.B + f.C) / 2;
  f.H = (-s.N + f.B + f.C) / 2;
  f.L = s.L;
  f.N = s.N;
  return f;
}

std::array<double, 5> sys_rhs(const PQRSState& s) {
  const double N = s.N, L = s.L, R = s.R, P = s.P;
  return {N * N - L * N, L * L - N * N + N * P / 4 + R * R / 4, (P / 2 + L) * R, P * L + R * R, -s.Q / 2};
}

double lambda_constraint(const PQRSState& s) { return -s.N * (4 * s.L + 2 * s.N - s.P) / 2; }

SysVector to_sys_vector(const PQRSState& s) { return {s.N, s.L, s.R, s.P, s.S.value_or(0.0), s.Q}; }

PQRSState from_sys_vector(const SysVector& v) {
  PQRSState s;
  s.N = v[0];
  s.L = v[1];
  s.R = v[2];
  s.P = v[3];
  s.S = v[4];
  s.Q = v[5];
  return s;
}

SysVector sys_rhs_vector(const SysVector& v) {
  const auto d = sys_rhs(from_sys_vector(v));
  return {d[0], d[1], d[2], d[3], d[4], 0.0};
}

}  // namespace kem
