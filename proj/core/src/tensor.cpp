#include "dwt/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <type_traits>
#include <unordered_set>
#include <utility>

#include "dwt/errors.hpp"

namespace dwt {

namespace {

thread_local bool grad_mode_enabled = true;
thread_local bool finite_guard_enabled = true;
std::string fault_op;  // NOLINT(cert-err58-cpp)

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool enabled) { grad_mode_enabled = enabled; }

bool FiniteGuard::enabled() { return finite_guard_enabled; }
void FiniteGuard::set_enabled(bool enabled) { finite_guard_enabled = enabled; }

void set_backward_fault(std::string op_name) { fault_op = std::move(op_name); }
const std::string& backward_fault() { return fault_op; }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  for (std::size_t e : shape) {
    if (e == 0) throw ConfigError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ConfigError("tensor of shape " + shape_to_string(shape) + " given " +
                      std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_node(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

template <typename T>
std::size_t Tensor<T>::extent(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ConfigError("axis " + std::to_string(axis) + " out of range for shape " +
                      shape_to_string(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ConfigError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->data[0];
}

template <typename T>
std::vector<Tensor<T>> Tensor<T>::inputs() const {
  std::vector<Tensor> out;
  out.reserve(node_->inputs.size());
  for (const auto& n : node_->inputs) out.push_back(from_node(n));
  return out;
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  T* seed = node_->grad_buffer();
  for (std::size_t i = 0; i < node_->data.size(); ++i) seed[i] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

namespace {

/// Branch-free scan over the exponent bits so the loop vectorises.
template <typename T>
bool all_finite(const std::vector<T>& values) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits exponent = static_cast<Bits>(sizeof(T) == 4 ? 0x7f800000ull : 0x7ff0000000000000ull);
  Bits any = 0;
  for (T v : values) {
    const Bits b = std::bit_cast<Bits>(v);
    any |= static_cast<Bits>((b & exponent) == exponent);
  }
  return any == 0;
}

}  // namespace

template <typename T>
Tensor<T> make_op_result(const char* op, Shape shape, std::vector<T> values,
                         std::vector<Tensor<T>> inputs,
                         std::function<void(detail::Node<T>&)> backward,
                         bool allow_negative_infinity) {
  if (FiniteGuard::enabled() && !all_finite(values)) {
    for (T v : values) {
      if (std::isfinite(v)) continue;
      if (allow_negative_infinity && std::isinf(v) && v < 0) continue;
      throw NumericalError(std::string("non-finite value produced by ") + op);
    }
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->op = op;

  bool needs_grad = false;
  if (GradMode::enabled()) {
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    if (!fault_op.empty() && fault_op == op) {
      node->backward = [inner = std::move(backward)](detail::Node<T>& self) {
        for (auto& g : self.grad) g *= T(1.5);
        inner(self);
      };
    } else {
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>::from_node(std::move(node));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_op_result(const char*, Shape, std::vector<float>,
                                      std::vector<Tensor<float>>,
                                      std::function<void(detail::Node<float>&)>, bool);
template Tensor<double> make_op_result(const char*, Shape, std::vector<double>,
                                       std::vector<Tensor<double>>,
                                       std::function<void(detail::Node<double>&)>, bool);

}  // namespace dwt
