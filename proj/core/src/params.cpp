#include "dwt/params.hpp"

#include <cmath>

#include "dwt/errors.hpp"

namespace dwt {

template <typename T>
Tensor<T> ParamStore<T>::add(std::string name, Tensor<T> tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  tensor.set_requires_grad(true);
  entries_.push_back({std::move(name), tensor});
  return tensor;
}

template <typename T>
bool ParamStore<T>::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

template <typename T>
Tensor<T> ParamStore<T>::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ConfigError("unknown parameter " + name);
}

template <typename T>
std::size_t ParamStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.size();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
Tensor<T> ParamFactory<T>::weight(const std::string& name, std::size_t fan_in,
                                  std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(name, {fan_in, fan_out}, limit);
}

template <typename T>
Tensor<T> ParamFactory<T>::uniform(const std::string& name, Shape shape, double limit) {
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>(rng_.uniform(-limit, limit));
  return store_.add(name, Tensor<T>(std::move(shape), std::move(values)));
}

template <typename T>
Tensor<T> ParamFactory<T>::constant(const std::string& name, Shape shape, T value) {
  return store_.add(name, Tensor<T>::filled(std::move(shape), value));
}

template <typename T>
LayerNormParams<T> ParamFactory<T>::layer_norm(const std::string& prefix, std::size_t width) {
  return {constant(prefix + ".gain", {width}, T(1)), constant(prefix + ".bias", {width}, T(0))};
}

template class ParamStore<float>;
template class ParamStore<double>;
template class ParamFactory<float>;
template class ParamFactory<double>;

}  // namespace dwt
