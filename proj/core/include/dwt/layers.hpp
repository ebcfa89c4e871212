#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "dwt/attention.hpp"
#include "dwt/dwlstm.hpp"

namespace dwt {

/// How the decoder combines self- and cross-attention outputs into the single
/// depth-wise LSTM input.
enum class MergeMode { add, concat };

std::string_view to_string(MergeMode m);
MergeMode parse_merge_mode(std::string_view s);

/// Layer norm ahead of an attention sub-layer. An undefined gain means the
/// sub-layer reads its input un-normalized.
template <typename T>
Tensor<T> maybe_layer_norm(const Tensor<T>& x, const LayerNormParams<T>& ln);

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> attn_ln;
  AttentionParams<T> self_attn;
  GateParams<T> gates;
  HiddenParams<T> hidden;
};

template <typename T>
struct DecoderLayerParams {
  LayerNormParams<T> self_ln;
  AttentionParams<T> self_attn;
  LayerNormParams<T> cross_ln;
  AttentionParams<T> cross_attn;
  MergeMode merge = MergeMode::add;
  Tensor<T> w_m, b_m;  // concat merge only: [2d, d], [d]
  GateParams<T> gates;
  HiddenParams<T> hidden;
};

template <typename T>
struct FeedForwardParams {
  Tensor<T> w1, b1, w2, b2;
};

template <typename T>
struct ResidualEncoderLayerParams {
  LayerNormParams<T> attn_ln;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ffn_ln;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct ResidualDecoderLayerParams {
  LayerNormParams<T> self_ln;
  AttentionParams<T> self_attn;
  LayerNormParams<T> cross_ln;
  AttentionParams<T> cross_attn;
  LayerNormParams<T> ffn_ln;
  FeedForwardParams<T> ffn;
};

/// a = dropout(self_attention(LN(state.output))); returns one cell step on a.
template <typename T>
DepthState<T> encoder_layer_forward(const DepthState<T>& state, const EncoderLayerParams<T>& p,
                                    const AttentionMask<T>* pad_mask, const DropoutContext& ctx);

/// add: self_out + cross_out; concat: [self_out | cross_out] * w_m + b_m.
template <typename T>
Tensor<T> merge(const Tensor<T>& self_out, const Tensor<T>& cross_out, MergeMode mode,
                const Tensor<T>& w_m, const Tensor<T>& b_m);

/// s = dropout(self_attention(LN(output), causal));
/// x = dropout(cross_attention(LN(s + output), enc_output));
/// returns one cell step on merge(s, x).
template <typename T>
DepthState<T> decoder_layer_forward(const DepthState<T>& state, const Tensor<T>& enc_output,
                                    const DecoderLayerParams<T>& p,
                                    const AttentionMask<T>* self_mask,
                                    const AttentionMask<T>* cross_mask,
                                    const DropoutContext& ctx);

/// Position-wise gelu feed-forward with dropout before the output projection.
template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& p, const DropoutContext& ctx);

/// Pre-norm residual layers: every sub-layer computes x + dropout(sub(LN(x))).
template <typename T>
Tensor<T> residual_encoder_layer_forward(const Tensor<T>& x, const ResidualEncoderLayerParams<T>& p,
                                         const AttentionMask<T>* pad_mask,
                                         const DropoutContext& ctx);

template <typename T>
Tensor<T> residual_decoder_layer_forward(const Tensor<T>& x, const Tensor<T>& enc_output,
                                         const ResidualDecoderLayerParams<T>& p,
                                         const AttentionMask<T>* self_mask,
                                         const AttentionMask<T>* cross_mask,
                                         const DropoutContext& ctx);

template <typename T>
FeedForwardParams<T> make_feed_forward_params(ParamFactory<T>& factory, const std::string& prefix,
                                              std::size_t d_model, std::size_t d_ff);

/// Initialises w_m to [I / 2; I / 2] so the concat merge starts as the mean.
template <typename T>
void make_concat_merge_params(ParamFactory<T>& factory, const std::string& prefix,
                              std::size_t d_model, Tensor<T>& w_m, Tensor<T>& b_m);

std::size_t layer_norm_param_count(std::size_t width);
std::size_t feed_forward_param_count(std::size_t d_model, std::size_t d_ff);
std::size_t merge_param_count(MergeMode mode, std::size_t d_model);

}  // namespace dwt
