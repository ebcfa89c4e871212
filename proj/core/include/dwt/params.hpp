#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dwt/rng.hpp"
#include "dwt/tensor.hpp"

namespace dwt {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// Ordered registry of trainable tensors. A tensor bound to several use sites
/// (shared gates, tied embeddings) is registered once, under its canonical name.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(std::string name, Tensor<T> tensor);

  const std::vector<NamedTensor<T>>& entries() const { return entries_; }
  bool contains(const std::string& name) const;
  Tensor<T> find(const std::string& name) const;

  /// Total scalar count over distinct tensors.
  std::size_t element_count() const;
  void zero_grad();

 private:
  std::vector<NamedTensor<T>> entries_;
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;
};

/// Creates and registers parameters with deterministic initial values.
template <typename T>
class ParamFactory {
 public:
  ParamFactory(ParamStore<T>& store, Rng& rng) : store_(store), rng_(rng) {}

  /// Uniform fan-based init for a [fan_in, fan_out] weight:
  /// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  Tensor<T> weight(const std::string& name, std::size_t fan_in, std::size_t fan_out);
  Tensor<T> uniform(const std::string& name, Shape shape, double limit);
  Tensor<T> constant(const std::string& name, Shape shape, T value);
  /// Gain ones, bias zeros.
  LayerNormParams<T> layer_norm(const std::string& prefix, std::size_t width);

  ParamStore<T>& store() { return store_; }

 private:
  ParamStore<T>& store_;
  Rng& rng_;
};

}  // namespace dwt
