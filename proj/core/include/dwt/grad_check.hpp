#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dwt/params.hpp"
#include "dwt/tensor.hpp"

namespace dwt {

/// central2: (L(x + h) - L(x - h)) / 2h.
/// central4: (8 (L(x + h) - L(x - h)) - (L(x + 2h) - L(x - 2h))) / 12h, whose
///           truncation error is O(h^4) instead of O(h^2).
enum class Stencil { central2, central4 };

struct GradCheckOptions {
  double step = 1e-5;
  Stencil stencil = Stencil::central2;
  /// Tensors with more elements than this are checked on a random subsample.
  std::size_t subsample_threshold = 512;
  std::size_t subsample_count = 64;
  std::uint64_t seed = 20240607;
};

struct ParamGradError {
  std::string name;
  std::size_t elements_checked = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double autodiff = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;

  double max_relative_error() const;
  bool passed(double tolerance) const { return max_relative_error() < tolerance; }
  std::vector<std::string> failing(double tolerance) const;
};

/// Relative error |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

/// Compares reverse-mode gradients against central differences
/// (loss(theta + h) - loss(theta - h)) / 2h for every listed tensor. Only the
/// check64 precision is supported. `loss_fn` must be deterministic and return
/// a single-element tensor.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                           const std::vector<NamedTensor<double>>& params,
                           const GradCheckOptions& options = {});

}  // namespace dwt
