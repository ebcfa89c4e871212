#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dwt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Arithmetic precision of a graph. Training runs in standard32; gradient
/// checking is only instantiated for check64.
enum class Precision { standard32, check64 };

template <typename T>
struct PrecisionOf;
template <>
struct PrecisionOf<float> {
  static constexpr Precision value = Precision::standard32;
};
template <>
struct PrecisionOf<double> {
  static constexpr Precision value = Precision::check64;
};

/// Thread-local switch controlling whether ops record backward closures.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Thread-local switch for the non-finite guard run on every op output.
/// Enabled by default; a violation throws NumericalError naming the op.
class FiniteGuard {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

/// Test hook: scales the upstream gradient seen by the named op's backward
/// rule, producing a deliberately wrong gradient. Empty string disables.
void set_backward_fault(std::string op_name);
const std::string& backward_fault();

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialised on first use.
  T* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad.data();
  }
};

}  // namespace detail

/// Dense row-major tensor participating in reverse-mode differentiation.
/// Copies share the underlying node; use detach() for a value copy.
template <typename T>
class Tensor {
 public:
  using Node = detail::Node<T>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, T value, bool requires_grad = false);
  static Tensor from_node(std::shared_ptr<Node> node);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  /// Extent of an axis; negative axes count from the end.
  std::size_t extent(int axis) const;
  std::size_t size() const { return node_->data.size(); }

  std::span<const T> values() const { return node_->data; }
  std::span<T> mutable_values() { return node_->data; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return {node_->grad_buffer(), node_->data.size()}; }
  void zero_grad() { node_->grad.clear(); }

  std::string_view op() const { return node_->op; }
  std::vector<Tensor> inputs() const;

  /// Back-propagates from this tensor, seeding its gradient with ones.
  /// Gradients accumulate into every reachable tensor with requires_grad.
  void backward() const;

  Tensor detach() const;
  bool is_same(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Creates an op result. Records inputs and the backward rule only when grad
/// mode is on and some input requires a gradient. Runs the non-finite guard.
template <typename T>
Tensor<T> make_op_result(const char* op, Shape shape, std::vector<T> values,
                         std::vector<Tensor<T>> inputs,
                         std::function<void(detail::Node<T>&)> backward,
                         bool allow_negative_infinity = false);

}  // namespace dwt
