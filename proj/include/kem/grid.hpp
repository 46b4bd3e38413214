// Uniform coordinate lattices and the fields that live on them.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace kem {

struct Axis {
  std::string name;
  double min = 0;
  double step = 0;
  std::size_t count = 0;

  double at(std::size_t i) const { return min + step * static_cast<double>(i); }
  double max() const { return at(count - 1); }
};

class Lattice {
 public:
  Lattice() = default;
  explicit Lattice(std::vector<Axis> axes);

  std::size_t dims() const { return axes_.size(); }
  std::size_t size() const { return size_; }
  const Axis& axis(std::size_t k) const { return axes_[k]; }
  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t stride(std::size_t k) const { return strides_[k]; }

  // per-axis index of a flat node index
  std::size_t coord(std::size_t node, std::size_t k) const { return (node / strides_[k]) % axes_[k].count; }
  double position(std::size_t node, std::size_t k) const { return axes_[k].at(coord(node, k)); }
  std::size_t index(const std::vector<std::size_t>& ijk) const;

  // at least `layers` nodes away from every boundary
  bool interior(std::size_t node, std::size_t layers) const;

  bool same_shape(const Lattice& o) const;

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

// Scalar field; NaN marks nodes where the value is not defined.
struct ScalarGrid {
  Lattice lattice;
  std::vector<double> values;

  ScalarGrid() = default;
  explicit ScalarGrid(Lattice l, double fill = 0.0);
  double& operator[](std::size_t n) { return values[n]; }
  double operator[](std::size_t n) const { return values[n]; }
};

// Symmetric positive-definite metric components g_ij at each node.
class MetricGrid {
 public:
  MetricGrid() = default;
  // components: node-major, then i, then j (dim*dim per node)
  MetricGrid(Lattice lattice, std::vector<double> components);

  std::size_t dim() const { return lattice_.dims(); }
  const Lattice& lattice() const { return lattice_; }
  double g(std::size_t node, std::size_t i, std::size_t j) const { return comps_[(node * dim() + i) * dim() + j]; }
  const std::vector<double>& components() const { return comps_; }

 private:
  Lattice lattice_;
  std::vector<double> comps_;
};

// Antisymmetric 2-form components on a lattice.
class TwoFormGrid {
 public:
  TwoFormGrid() = default;
  TwoFormGrid(Lattice lattice, std::vector<double> components);

  std::size_t dim() const { return lattice_.dims(); }
  const Lattice& lattice() const { return lattice_; }
  double w(std::size_t node, std::size_t i, std::size_t j) const { return comps_[(node * dim() + i) * dim() + j]; }
  const std::vector<double>& components() const { return comps_; }

 private:
  Lattice lattice_;
  std::vector<double> comps_;
};

// Generic tensor field with per-node validity, e.g. Christoffel symbols.
struct TensorField {
  Lattice lattice;
  std::size_t rank = 0;
  std::size_t dim = 0;
  std::vector<double> data;
  std::vector<std::uint8_t> valid;

  std::size_t per_node() const;
  const double* at(std::size_t node) const { return data.data() + node * per_node(); }
  double* at(std::size_t node) { return data.data() + node * per_node(); }
};

nlohmann::json to_json(const Lattice& l);
Lattice lattice_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricGrid& g);
MetricGrid metric_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ScalarGrid& s);
ScalarGrid scalar_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TwoFormGrid& w);
TwoFormGrid two_form_from_json(const nlohmann::json& j);

// max |v| over finite values; 0 if none
double max_abs(const ScalarGrid& s);

}  // namespace kem
