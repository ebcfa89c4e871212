#include "dwt/dwlstm.hpp"

#include "dwt/errors.hpp"

namespace dwt {

std::string_view to_string(HiddenVariant v) { return v == HiddenVariant::single ? "single" : "ffn2"; }

std::string_view to_string(SharingMode m) {
  switch (m) {
    case SharingMode::all:
      return "all";
    case SharingMode::gate:
      return "gate";
    case SharingMode::none:
      break;
  }
  return "none";
}

HiddenVariant parse_hidden_variant(std::string_view s) {
  if (s == "single") return HiddenVariant::single;
  if (s == "ffn2") return HiddenVariant::ffn2;
  throw ConfigError("hidden_variant must be single or ffn2, got '" + std::string(s) + "'");
}

SharingMode parse_sharing_mode(std::string_view s) {
  if (s == "all") return SharingMode::all;
  if (s == "gate") return SharingMode::gate;
  if (s == "none") return SharingMode::none;
  throw ConfigError("sharing must be all, gate or none, got '" + std::string(s) + "'");
}

template <typename T>
Tensor<T> concat_input(const Tensor<T>& lstm_input, const Tensor<T>& prev_output) {
  if (lstm_input.shape() != prev_output.shape()) {
    throw ConfigError("concat_input: shape mismatch " + shape_to_string(lstm_input.shape()) +
                      " vs " + shape_to_string(prev_output.shape()));
  }
  return concat_last(lstm_input, prev_output);
}

template <typename T>
Gates<T> compute_gates(const Tensor<T>& c, const GateParams<T>& p) {
  if (c.extent(-1) != p.w_ig.extent(0)) {
    throw ConfigError("compute_gates: input width " + std::to_string(c.extent(-1)) +
                      " does not match gate weights " + shape_to_string(p.w_ig.shape()));
  }
  auto gate = [&c](const Tensor<T>& w, const Tensor<T>& b, const LayerNormParams<T>& ln) {
    return sigmoid(layer_norm(linear(c, w, b), ln.gain, ln.bias));
  };
  return {gate(p.w_ig, p.b_ig, p.ln_ig), gate(p.w_fg, p.b_fg, p.ln_fg), gate(p.w_og, p.b_og, p.ln_og)};
}

template <typename T>
Tensor<T> compute_hidden(const Tensor<T>& c, const HiddenParams<T>& p, const DropoutContext& ctx) {
  if (p.variant == HiddenVariant::single) {
    return gelu(layer_norm(linear(c, p.w_h, p.b_h), p.ln_h.gain, p.ln_h.bias));
  }
  const Tensor<T> inner = gelu(layer_norm(linear(c, p.w_h1, p.b_h1), p.ln_h1.gain, p.ln_h1.bias));
  return linear(dropout(inner, ctx), p.w_h2, p.b_h2);
}

template <typename T>
DepthState<T> dwlstm_step(const Tensor<T>& lstm_input, const DepthState<T>& prev,
                          const GateParams<T>& gates, const HiddenParams<T>& hidden,
                          const DropoutContext& ctx) {
  const Tensor<T> c = concat_input(lstm_input, prev.output);
  const Gates<T> g = compute_gates(c, gates);
  const Tensor<T> h = compute_hidden(c, hidden, ctx);
  Tensor<T> cell = add(mul(prev.cell, g.forget), mul(h, g.input));
  Tensor<T> output = mul(cell, g.output);
  return {std::move(output), std::move(cell)};
}

template <typename T>
DepthState<T> init_state(const Tensor<T>& stack_input) {
  return {stack_input, Tensor<T>::zeros(stack_input.shape())};
}

template <typename T>
GateParams<T> make_gate_params(ParamFactory<T>& factory, const std::string& prefix,
                               std::size_t d_model, double forget_bias) {
  GateParams<T> p;
  const std::size_t in = 2 * d_model;
  p.w_ig = factory.weight(prefix + ".w_ig", in, d_model);
  p.b_ig = factory.constant(prefix + ".b_ig", {d_model}, T(0));
  p.w_fg = factory.weight(prefix + ".w_fg", in, d_model);
  p.b_fg = factory.constant(prefix + ".b_fg", {d_model}, T(0));
  p.w_og = factory.weight(prefix + ".w_og", in, d_model);
  p.b_og = factory.constant(prefix + ".b_og", {d_model}, T(0));
  p.ln_ig = factory.layer_norm(prefix + ".ln_ig", d_model);
  p.ln_fg = {factory.constant(prefix + ".ln_fg.gain", {d_model}, T(1)),
             factory.constant(prefix + ".ln_fg.bias", {d_model}, static_cast<T>(forget_bias))};
  p.ln_og = factory.layer_norm(prefix + ".ln_og", d_model);
  return p;
}

template <typename T>
HiddenParams<T> make_hidden_params(ParamFactory<T>& factory, const std::string& prefix,
                                   HiddenVariant variant, std::size_t d_model, std::size_t d_ff) {
  HiddenParams<T> p;
  p.variant = variant;
  const std::size_t in = 2 * d_model;
  if (variant == HiddenVariant::single) {
    p.w_h = factory.weight(prefix + ".w_h", in, d_model);
    p.b_h = factory.constant(prefix + ".b_h", {d_model}, T(0));
    p.ln_h = factory.layer_norm(prefix + ".ln_h", d_model);
  } else {
    p.w_h1 = factory.weight(prefix + ".w_h1", in, d_ff);
    p.b_h1 = factory.constant(prefix + ".b_h1", {d_ff}, T(0));
    p.ln_h1 = factory.layer_norm(prefix + ".ln_h1", d_ff);
    p.w_h2 = factory.weight(prefix + ".w_h2", d_ff, d_model);
    p.b_h2 = factory.constant(prefix + ".b_h2", {d_model}, T(0));
  }
  return p;
}

std::size_t gate_param_count(std::size_t d) { return 3 * (2 * d * d + d + 2 * d); }

std::size_t hidden_param_count(HiddenVariant variant, std::size_t d, std::size_t d_ff) {
  if (variant == HiddenVariant::single) return 2 * d * d + d + 2 * d;
  return 2 * d * d_ff + d_ff + 2 * d_ff + d_ff * d + d;
}

#define DWT_INSTANTIATE_DWLSTM(T)                                                                \
  template Tensor<T> concat_input(const Tensor<T>&, const Tensor<T>&);                           \
  template Gates<T> compute_gates(const Tensor<T>&, const GateParams<T>&);                       \
  template Tensor<T> compute_hidden(const Tensor<T>&, const HiddenParams<T>&,                    \
                                    const DropoutContext&);                                      \
  template DepthState<T> dwlstm_step(const Tensor<T>&, const DepthState<T>&,                     \
                                     const GateParams<T>&, const HiddenParams<T>&,               \
                                     const DropoutContext&);                                     \
  template DepthState<T> init_state(const Tensor<T>&);                                           \
  template GateParams<T> make_gate_params(ParamFactory<T>&, const std::string&, std::size_t,     \
                                          double);                                               \
  template HiddenParams<T> make_hidden_params(ParamFactory<T>&, const std::string&,              \
                                              HiddenVariant, std::size_t, std::size_t);

DWT_INSTANTIATE_DWLSTM(float)
DWT_INSTANTIATE_DWLSTM(double)

#undef DWT_INSTANTIATE_DWLSTM

}  // namespace dwt
