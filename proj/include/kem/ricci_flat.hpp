// Local Ricci-flat Kahler metrics built from a leaf-like surface metric.
//
// Pipeline: leaf spec (harmonic h, hyperbolic factor l) -> leaf metric
// -> geodesic parallel profile c(x, y) -> reduced fields L, R, P, Q
// -> linear system for (a, b, r, s) -> 4-metric and Kahler form.
#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>

#include "json.hpp"
#include "kem/expression.hpp"
#include "kem/grid.hpp"

namespace kem::pde {

struct Domain {
  double x0 = 0, x1 = 1, y0 = 1, y1 = 2;
};

struct LeafSpec {
  Domain domain;
  std::size_t n = 0;  // nodes per axis
  Expression h;
  Expression ell;
};

inline constexpr const char* kDefaultEll = "1/(2*y^2)";

struct LeafValidation {
  double harmonic_residual = 0;     // max |h_xx + h_yy| at lattice nodes (exact derivatives)
  double hyperbolic_residual = 0;   // max |K(l g0) + 2| at lattice nodes (exact derivatives)
  double hyperbolic_residual_fd = 0;  // same from the finite-difference engine
};

// parses and validates; throws std::invalid_argument on a bad spec
LeafSpec make_leaf_spec(const Domain& d, std::size_t n, const std::string& h_expr,
                        const std::string& ell_expr = kDefaultEll, LeafValidation* report = nullptr);

Lattice leaf_lattice(const Domain& d, std::size_t n);
ScalarGrid sample(const Expression& e, const Lattice& l);

// l = 1/(2 y^2); the domain must stay away from y = 0
ScalarGrid hyperbolic_factor(const Domain& d, std::size_t n);

struct LeafMetric {
  MetricGrid metric;  // l^{-1/2} e^{-h} (dx^2 + dy^2)
  ScalarGrid K;       // e^h l^{3/2}
};
LeafMetric leaf_metric(const LeafSpec& spec);

// g multiplied by a positive scalar field
MetricGrid conformal_multiple(const MetricGrid& g, const ScalarGrid& f);

struct LeafPdeReport {
  double max_residual = 0;  // max |Lap log K - 6K| over valid nodes with K > 0
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  bool vacuous = false;
};
LeafPdeReport leaf_pde_residual(const MetricGrid& g, const ScalarGrid& K);

struct LeafChecks {
  double curvature_error = 0;   // max |K_fd - K|
  LeafPdeReport pde;
  double hyperbolic_error = 0;  // max |K(K g) + 2|
};
LeafChecks verify_leaf(const LeafMetric& lm);

// ---- surface metrics sampled off-grid ----

struct SurfaceJet {
  std::array<double, 3> g{};                 // g11, g12, g22
  std::array<std::array<double, 3>, 2> d{};  // d_x, d_y of each
  std::array<std::array<double, 3>, 3> dd{}; // d_xx, d_xy, d_yy of each
};

class SurfaceMetric {
 public:
  virtual ~SurfaceMetric() = default;
  virtual SurfaceJet jet(double x, double y) const = 0;
  virtual bool contains(double x, double y) const = 0;
};

// g = f(x,y) (dx^2 + dy^2) for an expression f > 0, restricted to a domain
class ConformalSurfaceMetric : public SurfaceMetric {
 public:
  ConformalSurfaceMetric(std::function<Jet2(double, double)> factor, Domain d);
  SurfaceJet jet(double x, double y) const override;
  bool contains(double x, double y) const override;

 private:
  std::function<Jet2(double, double)> f_;
  Domain dom_;
};

// arbitrary components given as expressions
class ExpressionSurfaceMetric : public SurfaceMetric {
 public:
  ExpressionSurfaceMetric(Expression g11, Expression g12, Expression g22, Domain d);
  SurfaceJet jet(double x, double y) const override;
  bool contains(double x, double y) const override;

 private:
  Expression g11_, g12_, g22_;
  Domain dom_;
};

// bicubic Hermite interpolation of a sampled 2D metric grid
class GridSurfaceMetric : public SurfaceMetric {
 public:
  explicit GridSurfaceMetric(const MetricGrid& g);
  SurfaceJet jet(double x, double y) const override;
  bool contains(double x, double y) const override;

 private:
  Lattice lat_;
  std::array<std::vector<double>, 3> v_, dx_, dy_, dxy_;
};

std::unique_ptr<SurfaceMetric> leaf_surface_metric(const LeafSpec& spec);

// ---- geodesic parallel coordinates ----

struct ProfileRequest {
  double x_base = 0;          // base curve x = x_base, parametrised by y
  double y_min = 0, y_step = 0;
  std::size_t n_y = 0;
  double X_step = 0;          // spacing of the arclength coordinate X = s / sqrt 2
  std::size_t n_X = 0;
  int substeps = 4;           // RK4 steps per X spacing
};

struct CProfile {
  ScalarGrid c;            // on axes (X, Y)
  ScalarGrid x_of, y_of;   // original coordinates of each node (NaN if synthetic)
  std::size_t requested_X = 0;
  std::size_t covered_X = 0;
  std::string truncation;  // empty when fully covered
};

CProfile geodesic_parallel_profile(const SurfaceMetric& g, const ProfileRequest& req);

// c sampled from a function on (X, Y) axes, for synthetic inputs
CProfile profile_from_function(const Axis& X, const Axis& Y, const std::function<double(double, double)>& c);

// max |pullback - 2(dX^2 + c^2 dY^2)| using finite differences of the node map
double profile_pullback_error(const SurfaceMetric& g, const CProfile& cp);

struct ReducedFields {
  ScalarGrid L, R, P, Q;  // two node layers cropped from the profile lattice
  std::size_t excluded = 0;  // nodes with c_xx >= 0 (NaN in every field)
};

// L = -c_x/(2c), R = sqrt(-c_xx/c), w = log(-c_xx/c), P = w_x/2 + c_x/c, Q = -w_y/(2c)
ReducedFields reduced_fields(const CProfile& cp);

// crop a grid by `layers` on every side
ScalarGrid crop(const ScalarGrid& s, std::size_t layers);

struct Sys2Residuals {
  double r_x = 0;      // R_x - R(P + 2L)
  double r_y = 0;      // R_y / c + R Q
  double l_x = 0;      // L_x - 2L^2 - R^2/2
  double p_x = 0;      // P_x - Q_y / c - 2LP - 2R^2
  double second = 0;   // 3R^2 - (lapl-type second-order expression in log R)
  std::size_t evaluated = 0;
  double max() const;
};

Sys2Residuals sys2_residuals(const ReducedFields& f, const CProfile& cp);

struct VecSysCoefficients {
  ScalarGrid alpha, beta, nu, chi;
};
VecSysCoefficients vecsys_coefficients(const ReducedFields& f);

struct VecSysSolution {
  ScalarGrid a, b, r, s;
  ScalarGrid c;          // profile restricted to the same lattice
  double det0 = 0;       // as - rb at the corner
  double det_spread = 0; // max |as - rb - det0|
  double compat_residual = 0;
};

struct VecSysOptions {
  std::array<double, 4> init{1, 0, 0, 1};
  double compat_threshold = 1e-2;
};

// throws std::runtime_error when the y-equations are violated beyond the threshold
VecSysSolution integrate_vecsys(const VecSysCoefficients& k, const CProfile& cp, const VecSysOptions& opt = {});

struct FourMetric {
  MetricGrid metric;  // axes (x, y, u, v)
  TwoFormGrid kahler;
};

FourMetric assemble_four_metric(const VecSysSolution& v, std::size_t n_uv = 5, double h_uv = 0);

// whole pipeline from a profile
struct Construction {
  ReducedFields fields;
  Sys2Residuals sys2;
  VecSysSolution vec;
  FourMetric four;
};
Construction construct(const CProfile& cp, const VecSysOptions& opt = {});

nlohmann::json to_json(const CProfile& cp);
CProfile profile_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LeafSpec& s);
LeafSpec leaf_spec_from_json(const nlohmann::json& j);

}  // namespace kem::pde
