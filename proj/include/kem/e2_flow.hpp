// Complete E(2) Kahler-Einstein metrics: the flow p = (1,0,1), lambda = -1.
#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "json.hpp"
#include "kem/bianchi.hpp"
#include "kem/grid.hpp"
#include "kem/trajectory.hpp"

namespace kem::e2 {

BianchiParams params();

// a' = a/2 (c^2 - a^2), b' = b/2 (a^2 + c^2), c' = c/2 (a^2 - c^2 + 2 a^2 b^2)
std::array<double, 3> e2_rhs(const ABCState& s);
std::array<std::array<double, 3>, 3> e2_jacobian(const ABCState& s);

enum class Equilibrium { qoq, oqo };

struct Linearization {
  std::array<std::array<double, 3>, 3> matrix{};
  std::array<double, 3> eigenvalues{};                 // descending
  std::array<std::array<double, 3>, 3> eigenvectors{};  // eigenvectors[i] pairs with eigenvalues[i]
  std::optional<std::array<double, 3>> unstable;       // unit, largest component positive
};

Linearization linearization(double q, Equilibrium which);

// relative residuals of (ab)' = abc^2, (bc)' = bca^2(1+b^2), (ac)' = a^3cb^2,
// (a/b)' = -a^3/b, with the left sides formed from e2_rhs
std::array<double, 4> derivative_identity_residuals(const ABCState& s);

enum class StartRegion {
  below,   // c^2 < a^2
  above,   // c^2 - a^2 > 2 a^2 b^2
  inside,  // 0 <= c^2 - a^2 <= 2 a^2 b^2
};
const char* to_string(StartRegion r);
StartRegion classify_start(const ABCState& s);

struct ShootStop {
  std::optional<double> b_max;
  std::optional<double> t_span;
};

// from (q, eps, q) at t = 0; the asymptotic constant is k = eps
Trajectory shoot_unstable(double q, double eps, const ShootStop& stop, double tol);
Trajectory shoot_from(const ABCState& start, const ShootStop& stop, double tol);

struct DiagnoseOptions {
  double tol = 1e-12;           // re-integration tolerance for distances
  double region_slack = 1e-10;  // relative to max(1, c^2)
  double monotone_slack = 1e-10;
  double nullcline_slack = 1e-8;
  double reference_b = 1.0;     // distance from the bolt is measured to this orbit
  double b_top = 1000;          // distances are followed along the orbit up to this b
};

struct E2Diagnostics {
  bool inconclusive = false;
  std::string note;
  StartRegion start_region = StartRegion::inside;
  StopReason stop = StopReason::completed;
  std::size_t samples = 0;

  bool region_ok = true;
  std::optional<std::size_t> region_first_violation;
  bool monotone_ab = true, monotone_bc = true, monotone_ac = true, monotone_b = true;
  bool nullcline_ok = true;       // a/c >= 1/sqrt(1+b^2) - slack
  bool ratio_upper_ok = true;     // a/c <= 1 + slack
  bool ratio_monotone_ok = true;  // a/c nonincreasing after it leaves 1
  std::optional<double> kp_fit;
  std::optional<double> b_p;

  std::optional<double> dist_to_minus_inf;  // bolt to the reference orbit, tail included
  double tail = 0;                          // analytic tail before the first sample
  std::optional<double> tail_cauchy_gap;
  std::vector<std::pair<double, double>> level_distances;  // (b level, distance from bolt)
  std::vector<std::pair<double, double>> decade_slopes;    // (lower level, K per decade)
  std::optional<double> dist_growth_slope;                 // final decade
  std::optional<double> k2_stability;                      // relative change over the last two decades

  bool monotone_ok() const { return monotone_ab && monotone_bc && monotone_ac && monotone_b; }
  std::optional<double> distance_between(double b1, double b2) const;
};

E2Diagnostics diagnose(const Trajectory& tr, const DiagnoseOptions& opt = {});
nlohmann::json to_json(const E2Diagnostics& d);

struct BoltProfile {
  double q = 0;
  std::vector<double> r, a, b, c;  // first row is the bolt r = 0
};

BoltProfile bolt_profile(const Trajectory& tr, double tol = 1e-12);
void write_bolt_csv(std::ostream& os, const BoltProfile& p);
BoltProfile read_bolt_csv(std::istream& is);

struct BoltLimit {
  double value = 0;   // finer extrapolation
  double coarse = 0;  // one refinement coarser
  double change = 0;  // relative difference
};

struct BoltReport {
  bool inconclusive = false;
  std::string note;
  bool interpolated = false;  // some sample radii were not rows of the profile
  BoltLimit db_dr, ratio_a2c2, kahler_r3, a0, c0;
  double db_dr_error = 0;  // |db/dr(0) - 1|
  double q = 0;
};

BoltReport bolt_smoothness(const BoltProfile& p);
nlohmann::json to_json(const BoltReport& r);

// (a,b,c)(t) -> (k a, b, k c)(k^2 t)
Trajectory scaling_map(const Trajectory& tr, double k);

struct E2GridSpec {
  std::optional<double> t_center;  // default: time where b is closest to 1
  double h = 1e-3;                 // spacing on t and theta
  std::size_t n_t = 7, n_theta = 7;
  double theta_center = 0.3;
  double h_xy = 1e-3;
  std::size_t n_xy = 5;
};

BianchiGrid e2_metric_grid(const Trajectory& tr, const E2GridSpec& spec);

}  // namespace kem::e2
