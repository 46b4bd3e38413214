// Finite-difference curvature of metrics sampled on uniform grids.
//
// All derivatives are second-order central differences; the outermost node
// layer of every axis is excluded (marked invalid, skipped by maxima).
#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "kem/grid.hpp"

namespace kem {

// Gamma^k_ij stored as [k][i][j]
TensorField christoffel(const MetricGrid& g);

// R_abcd with all indices down; K = R_0101 / det g in two dimensions
TensorField riemann(const MetricGrid& g);

// Ric_bd = g^ac R_abcd
TensorField ricci(const MetricGrid& g);

// max over valid nodes and components of |Ric_ij - lambda g_ij|
double einstein_residual(const MetricGrid& g, double lambda);

// max over valid nodes of max |R_abcd|
double max_riemann(const MetricGrid& g);

// max relative asymmetry |Ric_ij - Ric_ji| / max|Ric| over valid nodes
double ricci_asymmetry(const MetricGrid& g);

ScalarGrid gauss_curvature_2d(const MetricGrid& g);

ScalarGrid laplace_beltrami(const MetricGrid& g, const ScalarGrid& u);

// max over interior nodes of |d omega| components
double exterior_derivative_closedness(const TwoFormGrid& w);

struct ConvergenceEstimate {
  std::optional<double> order;  // absent when every value is at the floor
  bool below_floor = false;
};

// least-squares slope of log(value) against log(h)
ConvergenceEstimate convergence_order(const std::vector<std::pair<double, double>>& h_value, double floor = 0.0);

}  // namespace kem
