#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gstpp/rng.hpp"
#include "gstpp/tensor.hpp"

namespace gstpp {

/// Named trainable tensors with per-parameter optimizer moments.
/// Registration order is fixed at model construction and defines the
/// serialization and gradient-reduction order.
class ParamStore {
 public:
  struct Entry {
    std::string name;   // e.g. "lgcn.edge_w1"
    std::string group;  // e.g. "lgcn"
    Tensor value;
    Tensor m, v;  // adam moments
    bool weight_decay = true;
    // Coordinate-like parameters (anchor positions) live in data units, not
    // weight units; the optimizer applies its coordinate lr multiplier to them.
    bool coordinate = false;
  };

  int add(const std::string& group, const std::string& name, Tensor init, bool weight_decay,
          bool coordinate = false) {
    Entry e;
    e.name = group + "." + name;
    e.group = group;
    e.m = Tensor::zeros(init.shape);
    e.v = Tensor::zeros(init.shape);
    e.value = std::move(init);
    e.weight_decay = weight_decay;
    e.coordinate = coordinate;
    by_name_.emplace(e.name, static_cast<int>(entries_.size()));
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  size_t size() const { return entries_.size(); }
  Entry& at(int id) { return entries_[static_cast<size_t>(id)]; }
  const Entry& at(int id) const { return entries_[static_cast<size_t>(id)]; }
  Tensor& value(int id) { return entries_[static_cast<size_t>(id)].value; }
  const Tensor& value(int id) const { return entries_[static_cast<size_t>(id)].value; }

  int find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
  }

  long total_scalars() const {
    long n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  int64_t step = 0;  // optimizer step counter, serialized with the checkpoint

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

/// Per-worker gradient buffers mirroring a ParamStore. Reduction into another
/// buffer set is element-wise addition in registration order.
class GradBuffers {
 public:
  explicit GradBuffers(const ParamStore& params) {
    grads_.reserve(params.size());
    for (size_t i = 0; i < params.size(); ++i)
      grads_.push_back(Tensor::zeros(params.at(static_cast<int>(i)).value.shape));
  }

  Tensor& at(int id) { return grads_[static_cast<size_t>(id)]; }
  const Tensor& at(int id) const { return grads_[static_cast<size_t>(id)]; }
  size_t size() const { return grads_.size(); }

  void zero() {
    for (auto& g : grads_) std::fill(g.data.begin(), g.data.end(), real(0));
  }

  void add(const GradBuffers& other) {
    for (size_t i = 0; i < grads_.size(); ++i)
      for (long j = 0; j < grads_[i].numel(); ++j) grads_[i].data[j] += other.grads_[i].data[j];
  }

  void scale(real c) {
    for (auto& g : grads_)
      for (auto& x : g.data) x *= c;
  }

  double global_norm() const {
    double acc = 0;
    for (const auto& g : grads_)
      for (real x : g.data) acc += double(x) * double(x);
    return std::sqrt(acc);
  }

  /// Scales gradients so the global norm does not exceed max_norm.
  void clip_global_norm(double max_norm) {
    const double n = global_norm();
    if (n > max_norm && n > 0) scale(static_cast<real>(max_norm / n));
  }

 private:
  std::vector<Tensor> grads_;
};

/// Uniform ±1/sqrt(fan_in) weight init, zero biases.
inline Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (auto& x : t.data) x = static_cast<real>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace gstpp
