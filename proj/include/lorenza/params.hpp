#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lorenza/errors.hpp"
#include "lorenza/matrix.hpp"

namespace lorenza {

// One named weight matrix. `value` is always stored with rows <= cols; a
// layer that arrives taller than wide is transposed on ingestion and
// `transposed` records that its natural orientation is value^T.
struct Layer {
  std::string name;
  Matrix value;
  bool transposed = false;

  Matrix natural() const { return transposed ? value.transposed() : value; }
};

// Ordered, name-unique collection of layers. ParamSet and GradSet are
// distinct instantiations so a gradient cannot be passed where weights are
// expected without an explicit conversion.
template <typename Tag>
class LayerSet {
 public:
  LayerSet() = default;

  // Adds a layer given in its natural orientation.
  void add(std::string name, Matrix natural) {
    const bool wide_first = natural.rows() > natural.cols();
    add_stored(std::move(name), wide_first ? natural.transposed() : std::move(natural),
               wide_first);
  }

  // Adds a layer already in storage orientation.
  void add_stored(std::string name, Matrix stored, bool transposed) {
    if (stored.empty()) throw DimensionError("layer '" + name + "' is empty");
    if (stored.rows() > stored.cols())
      throw DimensionError("layer '" + name + "' violates rows <= cols storage convention");
    for (const auto& l : layers_)
      if (l.name == name) throw DimensionError("duplicate layer name '" + name + "'");
    layers_.push_back(Layer{std::move(name), std::move(stored), transposed});
  }

  std::size_t size() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }

  Layer& operator[](std::size_t i) noexcept { return layers_[i]; }
  const Layer& operator[](std::size_t i) const noexcept { return layers_[i]; }

  const Layer& at(std::string_view name) const {
    for (const auto& l : layers_)
      if (l.name == name) return l;
    throw DimensionError("no layer named '" + std::string(name) + "'");
  }

  auto begin() noexcept { return layers_.begin(); }
  auto end() noexcept { return layers_.end(); }
  auto begin() const noexcept { return layers_.begin(); }
  auto end() const noexcept { return layers_.end(); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.value.size();
    return n;
  }

  template <typename OtherTag>
  bool congruent_with(const LayerSet<OtherTag>& other) const noexcept {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (layers_[i].name != other[i].name || !layers_[i].value.same_shape(other[i].value) ||
          layers_[i].transposed != other[i].transposed)
        return false;
    }
    return true;
  }

  // Same names and shapes, all entries zero, re-tagged.
  template <typename OutTag = Tag>
  LayerSet<OutTag> zeros_like() const {
    LayerSet<OutTag> out;
    for (const auto& l : layers_)
      out.add_stored(l.name, Matrix(l.value.rows(), l.value.cols()), l.transposed);
    return out;
  }

  // Explicit re-tagging (e.g. a gradient used as a direction in weight space).
  template <typename OutTag>
  LayerSet<OutTag> as() const {
    LayerSet<OutTag> out;
    for (const auto& l : layers_) out.add_stored(l.name, l.value, l.transposed);
    return out;
  }

  friend bool operator==(const LayerSet& a, const LayerSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].name != b[i].name || a[i].transposed != b[i].transposed ||
          !(a[i].value == b[i].value))
        return false;
    return true;
  }

 private:
  std::vector<Layer> layers_;
};

struct ParamTag;
struct GradTag;
using ParamSet = LayerSet<ParamTag>;
using GradSet = LayerSet<GradTag>;

// Sample indices into an objective's dataset; empty for deterministic objectives.
struct Batch {
  std::vector<std::size_t> indices;
};

template <typename A, typename B>
void require_congruent(const LayerSet<A>& a, const LayerSet<B>& b, const char* what) {
  if (!a.congruent_with(b)) throw DimensionError(std::string(what) + ": layer sets are not congruent");
}

// Norms and inner products over the joint vectorization of all layers.
template <typename Tag>
double joint_dot(const LayerSet<Tag>& a, const LayerSet<Tag>& b) {
  require_congruent(a, b, "joint_dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += frobenius_dot(a[i].value, b[i].value);
  return acc;
}

template <typename Tag>
double joint_norm_sq(const LayerSet<Tag>& a) {
  double acc = 0.0;
  for (const auto& l : a) acc += frobenius_dot(l.value, l.value);
  return acc;
}

template <typename Tag>
double joint_norm(const LayerSet<Tag>& a) {
  return std::sqrt(joint_norm_sq(a));
}

template <typename Tag>
bool all_finite(const LayerSet<Tag>& a) {
  for (const auto& l : a)
    if (!all_finite(l.value)) return false;
  return true;
}

// a + s * b, layerwise.
template <typename A, typename B>
LayerSet<A> add_scaled(LayerSet<A> a, const LayerSet<B>& b, double s) {
  require_congruent(a, b, "add_scaled");
  for (std::size_t i = 0; i < a.size(); ++i) a[i].value.add_scaled(b[i].value, s);
  return a;
}

template <typename Tag>
LayerSet<Tag> scaled(LayerSet<Tag> a, double s) {
  for (auto& l : a) l.value *= s;
  return a;
}

}  // namespace lorenza
