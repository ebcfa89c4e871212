#include "dwt/layers.hpp"

#include "dwt/errors.hpp"

namespace dwt {

std::string_view to_string(MergeMode m) { return m == MergeMode::add ? "add" : "concat"; }

MergeMode parse_merge_mode(std::string_view s) {
  if (s == "add") return MergeMode::add;
  if (s == "concat") return MergeMode::concat;
  throw ConfigError("merge_mode must be add or concat, got '" + std::string(s) + "'");
}

template <typename T>
Tensor<T> maybe_layer_norm(const Tensor<T>& x, const LayerNormParams<T>& ln) {
  if (!ln.gain.defined()) return x;
  return layer_norm(x, ln.gain, ln.bias);
}

template <typename T>
DepthState<T> encoder_layer_forward(const DepthState<T>& state, const EncoderLayerParams<T>& p,
                                    const AttentionMask<T>* pad_mask, const DropoutContext& ctx) {
  const Tensor<T> q = maybe_layer_norm(state.output, p.attn_ln);
  const Tensor<T> a = dropout(multi_head_attention(q, q, q, pad_mask, p.self_attn, ctx), ctx);
  return dwlstm_step(a, state, p.gates, p.hidden, ctx);
}

template <typename T>
Tensor<T> merge(const Tensor<T>& self_out, const Tensor<T>& cross_out, MergeMode mode,
                const Tensor<T>& w_m, const Tensor<T>& b_m) {
  if (mode == MergeMode::add) return add(self_out, cross_out);
  if (!w_m.defined()) throw ConfigError("concat merge requires a projection");
  return linear(concat_last(self_out, cross_out), w_m, b_m);
}

template <typename T>
DepthState<T> decoder_layer_forward(const DepthState<T>& state, const Tensor<T>& enc_output,
                                    const DecoderLayerParams<T>& p,
                                    const AttentionMask<T>* self_mask,
                                    const AttentionMask<T>* cross_mask,
                                    const DropoutContext& ctx) {
  const Tensor<T> q = maybe_layer_norm(state.output, p.self_ln);
  const Tensor<T> s = dropout(multi_head_attention(q, q, q, self_mask, p.self_attn, ctx), ctx);
  const Tensor<T> cross_query = maybe_layer_norm(add(s, state.output), p.cross_ln);
  const Tensor<T> x = dropout(
      multi_head_attention(cross_query, enc_output, enc_output, cross_mask, p.cross_attn, ctx), ctx);
  const Tensor<T> m = merge(s, x, p.merge, p.w_m, p.b_m);
  return dwlstm_step(m, state, p.gates, p.hidden, ctx);
}

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& p, const DropoutContext& ctx) {
  return linear(dropout(gelu(linear(x, p.w1, p.b1)), ctx), p.w2, p.b2);
}

template <typename T>
Tensor<T> residual_encoder_layer_forward(const Tensor<T>& x, const ResidualEncoderLayerParams<T>& p,
                                         const AttentionMask<T>* pad_mask,
                                         const DropoutContext& ctx) {
  const Tensor<T> q = layer_norm(x, p.attn_ln.gain, p.attn_ln.bias);
  const Tensor<T> x1 = add(x, dropout(multi_head_attention(q, q, q, pad_mask, p.self_attn, ctx), ctx));
  const Tensor<T> f = layer_norm(x1, p.ffn_ln.gain, p.ffn_ln.bias);
  return add(x1, dropout(feed_forward(f, p.ffn, ctx), ctx));
}

template <typename T>
Tensor<T> residual_decoder_layer_forward(const Tensor<T>& x, const Tensor<T>& enc_output,
                                         const ResidualDecoderLayerParams<T>& p,
                                         const AttentionMask<T>* self_mask,
                                         const AttentionMask<T>* cross_mask,
                                         const DropoutContext& ctx) {
  const Tensor<T> q = layer_norm(x, p.self_ln.gain, p.self_ln.bias);
  const Tensor<T> x1 = add(x, dropout(multi_head_attention(q, q, q, self_mask, p.self_attn, ctx), ctx));
  const Tensor<T> c = layer_norm(x1, p.cross_ln.gain, p.cross_ln.bias);
  const Tensor<T> x2 = add(
      x1, dropout(multi_head_attention(c, enc_output, enc_output, cross_mask, p.cross_attn, ctx), ctx));
  const Tensor<T> f = layer_norm(x2, p.ffn_ln.gain, p.ffn_ln.bias);
  return add(x2, dropout(feed_forward(f, p.ffn, ctx), ctx));
}

template <typename T>
FeedForwardParams<T> make_feed_forward_params(ParamFactory<T>& factory, const std::string& prefix,
                                              std::size_t d_model, std::size_t d_ff) {
  FeedForwardParams<T> p;
  p.w1 = factory.weight(prefix + ".w1", d_model, d_ff);
  p.b1 = factory.constant(prefix + ".b1", {d_ff}, T(0));
  p.w2 = factory.weight(prefix + ".w2", d_ff, d_model);
  p.b2 = factory.constant(prefix + ".b2", {d_model}, T(0));
  return p;
}

template <typename T>
void make_concat_merge_params(ParamFactory<T>& factory, const std::string& prefix,
                              std::size_t d_model, Tensor<T>& w_m, Tensor<T>& b_m) {
  std::vector<T> w(2 * d_model * d_model, T(0));
  for (std::size_t i = 0; i < d_model; ++i) {
    w[i * d_model + i] = T(0.5);
    w[(d_model + i) * d_model + i] = T(0.5);
  }
  w_m = factory.store().add(prefix + ".w_m", Tensor<T>({2 * d_model, d_model}, std::move(w)));
  b_m = factory.constant(prefix + ".b_m", {d_model}, T(0));
}

std::size_t layer_norm_param_count(std::size_t width) { return 2 * width; }

std::size_t feed_forward_param_count(std::size_t d, std::size_t d_ff) {
  return d * d_ff + d_ff + d_ff * d + d;
}

std::size_t merge_param_count(MergeMode mode, std::size_t d) {
  return mode == MergeMode::concat ? 2 * d * d + d : 0;
}

#define DWT_INSTANTIATE_LAYERS(T)                                                                \
  template Tensor<T> maybe_layer_norm(const Tensor<T>&, const LayerNormParams<T>&);              \
  template DepthState<T> encoder_layer_forward(const DepthState<T>&, const EncoderLayerParams<T>&, \
                                               const AttentionMask<T>*, const DropoutContext&);  \
  template Tensor<T> merge(const Tensor<T>&, const Tensor<T>&, MergeMode, const Tensor<T>&,      \
                           const Tensor<T>&);                                                    \
  template DepthState<T> decoder_layer_forward(const DepthState<T>&, const Tensor<T>&,           \
                                               const DecoderLayerParams<T>&,                     \
                                               const AttentionMask<T>*, const AttentionMask<T>*, \
                                               const DropoutContext&);                           \
  template Tensor<T> feed_forward(const Tensor<T>&, const FeedForwardParams<T>&,                 \
                                  const DropoutContext&);                                        \
  template Tensor<T> residual_encoder_layer_forward(const Tensor<T>&,                            \
                                                    const ResidualEncoderLayerParams<T>&,        \
                                                    const AttentionMask<T>*,                     \
                                                    const DropoutContext&);                      \
  template Tensor<T> residual_decoder_layer_forward(                                             \
      const Tensor<T>&, const Tensor<T>&, const ResidualDecoderLayerParams<T>&,                  \
      const AttentionMask<T>*, const AttentionMask<T>*, const DropoutContext&);                  \
  template FeedForwardParams<T> make_feed_forward_params(ParamFactory<T>&, const std::string&,   \
                                                         std::size_t, std::size_t);              \
  template void make_concat_merge_params(ParamFactory<T>&, const std::string&, std::size_t,      \
                                         Tensor<T>&, Tensor<T>&);

DWT_INSTANTIATE_LAYERS(float)
DWT_INSTANTIATE_LAYERS(double)

#undef DWT_INSTANTIATE_LAYERS

}  // namespace dwt
