#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "dwt/ops.hpp"
#include "dwt/params.hpp"
#include "dwt/tokens.hpp"

namespace dwt {

template <typename T>
struct AttentionParams {
  Tensor<T> w_q, b_q;
  Tensor<T> w_k, b_k;
  Tensor<T> w_v, b_v;
  Tensor<T> w_o, b_o;
  std::size_t heads = 1;
};

/// Additive attention mask with entries in {0, -inf}. Stored as
/// [batch, q_len, k_len]; batch and q_len may be 1 to broadcast.
template <typename T>
struct AttentionMask {
  std::size_t batch = 1;
  std::size_t q_len = 1;
  std::size_t k_len = 1;
  std::vector<T> values;

  static constexpr T blocked() { return -std::numeric_limits<T>::infinity(); }
  T at(std::size_t b, std::size_t q, std::size_t k) const {
    return values[((batch == 1 ? 0 : b) * q_len + (q_len == 1 ? 0 : q)) * k_len + k];
  }
};

/// Entry (i, j) is 0 when j <= i, blocked otherwise.
template <typename T>
AttentionMask<T> causal_mask(std::size_t len);

/// Blocks padded key positions of each row; broadcast over queries.
template <typename T>
AttentionMask<T> padding_mask(const Tokens& keys, int pad_id = kPadId);

/// Elementwise sum of two masks, broadcasting unit extents.
template <typename T>
AttentionMask<T> combine_masks(const AttentionMask<T>& a, const AttentionMask<T>& b);

/// Adds a mask to scores of shape [B * heads, Lq, Lk].
template <typename T>
Tensor<T> apply_mask(const Tensor<T>& scores, const AttentionMask<T>& mask, std::size_t heads);

template <typename T>
AttentionParams<T> make_attention_params(ParamFactory<T>& factory, const std::string& prefix,
                                         std::size_t d_model, std::size_t heads);

/// Parameters of one attention block: four [d, d] projections with biases.
std::size_t attention_param_count(std::size_t d_model);

/// Multi-head scaled dot-product attention. Per head:
/// softmax(Q K^T / sqrt(d / h) + mask) V; heads are concatenated and projected
/// by w_o. Dropout from `ctx` is applied to the attention weights. `mask` may
/// be null.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q_in, const Tensor<T>& k_in, const Tensor<T>& v_in,
                               const AttentionMask<T>* mask, const AttentionParams<T>& params,
                               const DropoutContext& ctx = {});

}  // namespace dwt
