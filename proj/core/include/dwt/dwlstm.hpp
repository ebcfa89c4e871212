#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "dwt/ops.hpp"
#include "dwt/params.hpp"

namespace dwt {

/// Output and cell carried from layer to layer by the depth-wise LSTM.
template <typename T>
struct DepthState {
  Tensor<T> output;
  Tensor<T> cell;
};

/// Gate projections over the concatenated [input | previous output] vector.
/// Each gate is sigmoid(LN(c * W + b)).
template <typename T>
struct GateParams {
  Tensor<T> w_ig, b_ig;
  Tensor<T> w_fg, b_fg;
  Tensor<T> w_og, b_og;
  LayerNormParams<T> ln_ig, ln_fg, ln_og;
};

/// single: h = gelu(LN(c * W_h + b_h)).
/// ffn2:   h = gelu(LN(c * W_h1 + b_h1)) * W_h2 + b_h2, with dropout before
///         the second affine map.
enum class HiddenVariant { single, ffn2 };

template <typename T>
struct HiddenParams {
  HiddenVariant variant = HiddenVariant::ffn2;
  Tensor<T> w_h, b_h;
  LayerNormParams<T> ln_h;
  Tensor<T> w_h1, b_h1;
  LayerNormParams<T> ln_h1;
  Tensor<T> w_h2, b_h2;
};

/// Which depth-wise LSTM parameters are bound across the layers of a stack.
enum class SharingMode { all, gate, none };

template <typename T>
struct Gates {
  Tensor<T> input;
  Tensor<T> forget;
  Tensor<T> output;
};

std::string_view to_string(HiddenVariant v);
std::string_view to_string(SharingMode m);
HiddenVariant parse_hidden_variant(std::string_view s);
SharingMode parse_sharing_mode(std::string_view s);

/// [lstm_input | prev_output] along the last axis.
template <typename T>
Tensor<T> concat_input(const Tensor<T>& lstm_input, const Tensor<T>& prev_output);

template <typename T>
Gates<T> compute_gates(const Tensor<T>& c, const GateParams<T>& params);

template <typename T>
Tensor<T> compute_hidden(const Tensor<T>& c, const HiddenParams<T>& params,
                         const DropoutContext& ctx = {});

/// One depth step:
///   cell'   = prev.cell * f + h * i
///   output' = cell' * o
template <typename T>
DepthState<T> dwlstm_step(const Tensor<T>& lstm_input, const DepthState<T>& prev,
                          const GateParams<T>& gates, const HiddenParams<T>& hidden,
                          const DropoutContext& ctx = {});

/// Output_0 is the stack input; Cell_0 is zero.
template <typename T>
DepthState<T> init_state(const Tensor<T>& stack_input);

/// The forget gate's layer-norm bias starts at `forget_bias`; it is the
/// effective pre-sigmoid offset, since the mean of a pre-norm bias is removed.
template <typename T>
GateParams<T> make_gate_params(ParamFactory<T>& factory, const std::string& prefix,
                               std::size_t d_model, double forget_bias);

template <typename T>
HiddenParams<T> make_hidden_params(ParamFactory<T>& factory, const std::string& prefix,
                                   HiddenVariant variant, std::size_t d_model, std::size_t d_ff);

/// 3 * (2d * d + d + 2d)
std::size_t gate_param_count(std::size_t d_model);
/// single: 2d * d + d + 2d; ffn2: 2d * d_ff + d_ff + 2 d_ff + d_ff * d + d
std::size_t hidden_param_count(HiddenVariant variant, std::size_t d_model, std::size_t d_ff);

}  // namespace dwt
