// Pointwise algebra of the orthonormal frame {k,t,x,y}.
#pragma once

#include <array>
#include <optional>

namespace kem {

// Bracket coefficients of the frame at one point.
struct FrameCoefficients {
  double A = 0, B = 0, C = 0, D = 0, E = 0, F = 0, G = 0, H = 0;
  double L = 0;  // from [k,t]
  double N = 0;  // from [x,y]
};

// Reduced variables. S is absent on the shear-free locus R = 0.
struct PQRSState {
  double P = 0, Q = 0, R = 0;
  std::optional<double> S;
  double L = 0, N = 0;

  bool shear_free() const { return !S.has_value(); }
};

struct ShearPair {
  double sigma1 = 0, sigma2 = 0;
};

// ((A-D)-(F+G), (B+C)-(H-E), N-(A+D), N+(E+H))
std::array<double, 4> kahler_relation_residuals(const FrameCoefficients& fc);

// first two components of kahler_relation_residuals
std::array<double, 2> integrability_residuals(const FrameCoefficients& fc);

bool kahler_valid(const FrameCoefficients& fc, double tol = 1e-10);

ShearPair shear_coefficients(double b11, double b12, double b21, double b22);

// [[-s1, s2], [s2, s1]]
std::array<std::array<double, 2>, 2> shear_matrix(const ShearPair& s);

PQRSState to_pqrs(const FrameCoefficients& fc);
FrameCoefficients from_pqrs(const PQRSState& pq);

// (N', L', R', P', S') with Q held fixed
std::array<double, 5> sys_rhs(const PQRSState& s);

double lambda_constraint(const PQRSState& s);

// Flat-vector form (N, L, R, P, S, Q) used by integrators.
using SysVector = std::array<double, 6>;
SysVector to_sys_vector(const PQRSState& s);
PQRSState from_sys_vector(const SysVector& v);
SysVector sys_rhs_vector(const SysVector& v);

}  // namespace kem
