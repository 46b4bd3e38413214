#include "kem/grid.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kem {

using nlohmann::json;

Lattice::Lattice(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw std::invalid_argument("lattice needs at least one axis");
  strides_.assign(axes_.size(), 1);
  size_ = 1;
  for (std::size_t k = axes_.size(); k-- > 0;) {
    const Axis& a = axes_[k];
    if (a.count == 0) throw std::invalid_argument("axis '" + a.name + "' has no nodes");
    if (!(a.step > 0) || !std::isfinite(a.step) || !std::isfinite(a.min))
      throw std::invalid_argument("axis '" + a.name + "' needs a positive finite step");
    strides_[k] = size_;
    size_ *= a.count;
  }
}

std::size_t Lattice::index(const std::vector<std::size_t>& ijk) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < axes_.size(); ++k) n += ijk[k] * strides_[k];
  return n;
}

bool Lattice::interior(std::size_t node, std::size_t layers) const {
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    const std::size_t i = coord(node, k);
    if (i < layers || i + layers >= axes_[k].count) return false;
  }
  return true;
}

bool Lattice::same_shape(const Lattice& o) const {
  if (dims() != o.dims()) return false;
  for (std::size_t k = 0; k < dims(); ++k)
    if (axes_[k].count != o.axes_[k].count || axes_[k].step != o.axes_[k].step || axes_[k].min != o.axes_[k].min)
      return false;
  return true;
}

ScalarGrid::ScalarGrid(Lattice l, double fill) : lattice(std::move(l)), values(lattice.size(), fill) {}

namespace {

std::string node_name(const Lattice& l, std::size_t node) {
  std::string s = "(";
  for (std::size_t k = 0; k < l.dims(); ++k) {
    if (k) s += ",";
    s += std::to_string(l.coord(node, k));
  }
  return s + ")";
}

// leading principal minors via Cholesky
bool positive_definite(const double* g, std::size_t d) {
  double L[4][4] = {};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = g[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (i == j) {
        if (!(s > 0)) return false;
        L[i][i] = std::sqrt(s);
      } else {
        L[i][j] = s / L[j][j];
      }
    }
  }
  return true;
}

}  // namespace

MetricGrid::MetricGrid(Lattice lattice, std::vector<double> components)
    : lattice_(std::move(lattice)), comps_(std::move(components)) {
  const std::size_t d = lattice_.dims();
  if (d != 2 && d != 4) throw std::invalid_argument("metric grids must be 2- or 4-dimensional");
  for (std::size_t k = 0; k < d; ++k)
    if (lattice_.axis(k).count < 5)
      throw std::invalid_argument("axis '" + lattice_.axis(k).name + "' needs at least 5 nodes");
  if (comps_.size() != lattice_.size() * d * d) throw std::invalid_argument("component array has wrong length");
  for (std::size_t n = 0; n < lattice_.size(); ++n) {
    const double* g = comps_.data() + n * d * d;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (g[i * d + j] != g[j * d + i])
          throw std::invalid_argument("metric not symmetric at node " + node_name(lattice_, n));
    if (!positive_definite(g, d))
      throw std::invalid_argument("metric not positive definite at node " + node_name(lattice_, n));
  }
}

TwoFormGrid::TwoFormGrid(Lattice lattice, std::vector<double> components)
    : lattice_(std::move(lattice)), comps_(std::move(components)) {
  const std::size_t d = lattice_.dims();
  if (comps_.size() != lattice_.size() * d * d) throw std::invalid_argument("component array has wrong length");
  for (std::size_t n = 0; n < lattice_.size(); ++n) {
    const double* w = comps_.data() + n * d * d;
    for (std::size_t i = 0; i < d; ++i) {
      if (w[i * d + i] != 0) throw std::invalid_argument("2-form has a diagonal entry at node " + node_name(lattice_, n));
      for (std::size_t j = 0; j < i; ++j)
        if (w[i * d + j] != -w[j * d + i])
          throw std::invalid_argument("2-form not antisymmetric at node " + node_name(lattice_, n));
    }
  }
}

std::size_t TensorField::per_node() const {
  std::size_t p = 1;
  for (std::size_t r = 0; r < rank; ++r) p *= dim;
  return p;
}

json to_json(const Lattice& l) {
  json axes = json::array();
  for (const Axis& a : l.axes()) axes.push_back({{"name", a.name}, {"min", a.min}, {"step", a.step}, {"count", a.count}});
  return axes;
}

Lattice lattice_from_json(const json& j) {
  std::vector<Axis> axes;
  for (const auto& a : j) axes.push_back({a.at("name").get<std::string>(), a.at("min").get<double>(),
                                          a.at("step").get<double>(), a.at("count").get<std::size_t>()});
  return Lattice(std::move(axes));
}

namespace {

// NaN is not representable in JSON; encode it as null
json encode_values(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) {
    if (std::isfinite(x))
      a.push_back(x);
    else
      a.push_back(nullptr);
  }
  return a;
}

std::vector<double> decode_values(const json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
  return v;
}

}  // namespace

json to_json(const MetricGrid& g) {
  return {{"schema", 1}, {"kind", "metric"}, {"dims", g.dim()}, {"axes", to_json(g.lattice())},
          {"components", encode_values(g.components())}};
}

MetricGrid metric_from_json(const json& j) {
  Lattice l = lattice_from_json(j.at("axes"));
  if (j.contains("dims") && j.at("dims").get<std::size_t>() != l.dims())
    throw std::invalid_argument("dims does not match the axis list");
  return MetricGrid(std::move(l), decode_values(j.at("components")));
}

json to_json(const ScalarGrid& s) {
  return {{"schema", 1}, {"kind", "scalar"}, {"dims", s.lattice.dims()}, {"axes", to_json(s.lattice)},
          {"values", encode_values(s.values)}};
}

ScalarGrid scalar_from_json(const json& j) {
  ScalarGrid s(lattice_from_json(j.at("axes")));
  s.values = decode_values(j.at("values"));
  if (s.values.size() != s.lattice.size()) throw std::invalid_argument("value array has wrong length");
  return s;
}

json to_json(const TwoFormGrid& w) {
  return {{"schema", 1}, {"kind", "two_form"}, {"dims", w.dim()}, {"axes", to_json(w.lattice())},
          {"components", encode_values(w.components())}};
}

TwoFormGrid two_form_from_json(const json& j) {
  return TwoFormGrid(lattice_from_json(j.at("axes")), decode_values(j.at("components")));
}

double max_abs(const ScalarGrid& s) {
  double m = 0;
  for (double v : s.values)
    if (std::isfinite(v)) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace kem
