#pragma once

#include <cstddef>

#include "dwt/rng.hpp"
#include "dwt/tensor.hpp"
#include "dwt/tokens.hpp"

namespace dwt {

/// Additive guard on the standard deviation in layer normalization.
inline constexpr double kLayerNormEpsilon = 1e-6;

/// Dropout settings threaded through a forward pass. The stream is owned by
/// the caller; a null stream disables dropout regardless of the rate.
struct DropoutContext {
  double rate = 0.0;
  bool training = false;
  Rng* rng = nullptr;

  static DropoutContext inference() { return {}; }
  bool active() const { return training && rng != nullptr && rate > 0.0; }
};

// Elementwise and structural ops. Shapes must match exactly unless stated.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// a + b where b's shape is a trailing suffix of a's shape (broadcast over the
/// leading axes).
template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);

template <typename T>
Tensor<T> mean(const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Last-axis concatenation [a | b].
template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b);

/// Affine map over the last axis: x[..., m] * w[m, n] + b[n]. `b` may be
/// undefined for a bias-free product.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// x[..., m] * e[n, m]^T, used by the tied classifier.
template <typename T>
Tensor<T> linear_transposed(const Tensor<T>& x, const Tensor<T>& e);

/// Batched product a[N, p, q] * b[N, q, r], or a * b^T with b[N, r, q].
template <typename T>
Tensor<T> batched_matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b);

/// (x - mean) / (std + eps) * gain + bias over the last axis, with the
/// population standard deviation.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias);

/// x * Phi(x) with the exact Gaussian CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Softmax along `axis`. Entries equal to -inf map to 0; a slice that is
/// entirely -inf yields all zeros.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1);

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool training);

/// Applies dropout according to a context (identity when inactive).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, const DropoutContext& ctx);

/// Row lookup: table[V, d] indexed by ids[rows, cols] -> [rows, cols, d].
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const Tokens& ids);

/// [B, L, d] -> [B * heads, L, d / heads].
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads);

/// Inverse of split_heads.
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t heads);

}  // namespace dwt
