#include "dwt/model.hpp"

#include <cmath>
#include <map>
#include <string>

#include "dwt/errors.hpp"

namespace dwt {

std::string_view to_string(Variant v) { return v == Variant::residual ? "residual" : "dwlstm"; }

Variant parse_variant(std::string_view s) {
  if (s == "residual") return Variant::residual;
  if (s == "dwlstm") return Variant::dwlstm;
  throw ConfigError("variant must be residual or dwlstm, got '" + std::string(s) + "'");
}

std::string_view to_string(Side s) { return s == Side::encoder ? "encoder" : "decoder"; }

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(n_enc_layers, "n_enc_layers");
  positive(n_dec_layers, "n_dec_layers");
  positive(d_model, "d_model");
  positive(d_ff, "d_ff");
  positive(heads, "heads");
  if (d_model % heads != 0) {
    throw ConfigError("heads: d_model " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(heads));
  }
  if (vocab_size <= static_cast<std::size_t>(kFirstPayloadId)) {
    throw ConfigError("vocab_size must exceed the " + std::to_string(kFirstPayloadId) +
                      " reserved ids");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

bool ModelConfig::set(std::string_view key, std::string_view value) {
  if (key == "variant") {
    variant = parse_variant(value);
  } else if (key == "n_enc_layers") {
    n_enc_layers = parse_size(key, value);
  } else if (key == "n_dec_layers") {
    n_dec_layers = parse_size(key, value);
  } else if (key == "d_model") {
    d_model = parse_size(key, value);
  } else if (key == "d_ff") {
    d_ff = parse_size(key, value);
  } else if (key == "heads") {
    heads = parse_size(key, value);
  } else if (key == "vocab_size") {
    vocab_size = parse_size(key, value);
  } else if (key == "dropout") {
    dropout = parse_real(key, value);
  } else if (key == "hidden_variant") {
    hidden_variant = parse_hidden_variant(value);
  } else if (key == "sharing") {
    sharing = parse_sharing_mode(value);
  } else if (key == "merge_mode") {
    merge_mode = parse_merge_mode(value);
  } else if (key == "tie_embeddings") {
    tie_embeddings = parse_bool(key, value);
  } else if (key == "final_ln") {
    final_ln = parse_bool(key, value);
  } else if (key == "pre_attention_ln") {
    pre_attention_ln = parse_bool(key, value);
  } else if (key == "forget_bias") {
    forget_bias = parse_real(key, value);
  } else {
    return false;
  }
  return true;
}

KeyValues ModelConfig::to_key_values() const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"variant", std::string(to_string(variant))},
      {"n_enc_layers", std::to_string(n_enc_layers)},
      {"n_dec_layers", std::to_string(n_dec_layers)},
      {"d_model", std::to_string(d_model)},
      {"d_ff", std::to_string(d_ff)},
      {"heads", std::to_string(heads)},
      {"vocab_size", std::to_string(vocab_size)},
      {"dropout", format_real(dropout)},
      {"hidden_variant", std::string(to_string(hidden_variant))},
      {"sharing", std::string(to_string(sharing))},
      {"merge_mode", std::string(to_string(merge_mode))},
      {"tie_embeddings", b(tie_embeddings)},
      {"final_ln", b(final_ln)},
      {"pre_attention_ln", b(pre_attention_ln)},
      {"forget_bias", format_real(forget_bias)},
  };
}

ModelConfig ModelConfig::from_key_values(const KeyValues& pairs) {
  ModelConfig cfg;
  for (const auto& [k, v] : pairs) {
    if (!cfg.set(k, v)) throw ConfigError("unknown model key " + k);
  }
  cfg.validate();
  return cfg;
}

template <typename T>
Tensor<T> apply_probe(const AffineProbe<T>& probe, const Tensor<T>& x) {
  return linear(x, probe.weight, probe.bias);
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d_model;
  const std::size_t att = attention_param_count(d);
  std::size_t total = 2 * c.vocab_size * d;
  if (!c.tie_embeddings) total += d * c.vocab_size + c.vocab_size;
  if (c.final_ln) total += 2 * layer_norm_param_count(d);
  if (c.variant == Variant::residual) {
    total += c.n_enc_layers * (2 * layer_norm_param_count(d) + att + feed_forward_param_count(d, c.d_ff));
    total += c.n_dec_layers * (3 * layer_norm_param_count(d) + 2 * att + feed_forward_param_count(d, c.d_ff));
    return total;
  }
  const std::size_t ln = c.pre_attention_ln ? layer_norm_param_count(d) : 0;
  total += c.n_enc_layers * (ln + att);
  total += c.n_dec_layers * (2 * ln + 2 * att + merge_param_count(c.merge_mode, d));
  const std::size_t gates = gate_param_count(d);
  const std::size_t hidden = hidden_param_count(c.hidden_variant, d, c.d_ff);
  for (std::size_t n : {c.n_enc_layers, c.n_dec_layers}) {
    total += (c.sharing == SharingMode::none ? n : 1) * gates;
    total += (c.sharing == SharingMode::all ? 1 : n) * hidden;
  }
  return total;
}

template <typename T>
Model<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model<T> m;
  m.config = config;
  Rng rng(seed);
  ParamFactory<T> f(m.params, rng);
  const std::size_t d = config.d_model;
  const double embed_limit = std::sqrt(3.0 / static_cast<double>(d));
  m.src_embedding = f.uniform("src_embedding", {config.vocab_size, d}, embed_limit);
  m.tgt_embedding = f.uniform("tgt_embedding", {config.vocab_size, d}, embed_limit);
  if (!config.tie_embeddings) {
    m.classifier_w = f.weight("classifier.w", d, config.vocab_size);
    m.classifier_b = f.constant("classifier.b", {config.vocab_size}, T(0));
  }

  if (config.variant == Variant::residual) {
    for (std::size_t i = 0; i < config.n_enc_layers; ++i) {
      const std::string p = "encoder.layer" + std::to_string(i);
      ResidualEncoderLayerParams<T> l;
      l.attn_ln = f.layer_norm(p + ".attn_ln", d);
      l.self_attn = make_attention_params(f, p + ".self_attn", d, config.heads);
      l.ffn_ln = f.layer_norm(p + ".ffn_ln", d);
      l.ffn = make_feed_forward_params(f, p + ".ffn", d, config.d_ff);
      m.residual_encoder.push_back(std::move(l));
    }
    for (std::size_t i = 0; i < config.n_dec_layers; ++i) {
      const std::string p = "decoder.layer" + std::to_string(i);
      ResidualDecoderLayerParams<T> l;
      l.self_ln = f.layer_norm(p + ".self_ln", d);
      l.self_attn = make_attention_params(f, p + ".self_attn", d, config.heads);
      l.cross_ln = f.layer_norm(p + ".cross_ln", d);
      l.cross_attn = make_attention_params(f, p + ".cross_attn", d, config.heads);
      l.ffn_ln = f.layer_norm(p + ".ffn_ln", d);
      l.ffn = make_feed_forward_params(f, p + ".ffn", d, config.d_ff);
      m.residual_decoder.push_back(std::move(l));
    }
  } else {
    // Stack-level LSTM parameters, bound to every layer when shared.
    auto lstm_for = [&](const std::string& stack, std::size_t n, auto assign) {
      GateParams<T> shared_gates;
      HiddenParams<T> shared_hidden;
      if (config.sharing != SharingMode::none) {
        shared_gates = make_gate_params(f, stack + ".lstm.gates", d, config.forget_bias);
      }
      if (config.sharing == SharingMode::all) {
        shared_hidden = make_hidden_params(f, stack + ".lstm.hidden", config.hidden_variant, d, config.d_ff);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const std::string p = stack + ".layer" + std::to_string(i);
        GateParams<T> g = config.sharing == SharingMode::none
                              ? make_gate_params(f, p + ".lstm.gates", d, config.forget_bias)
                              : shared_gates;
        HiddenParams<T> h = config.sharing == SharingMode::all
                                ? shared_hidden
                                : make_hidden_params(f, p + ".lstm.hidden", config.hidden_variant, d, config.d_ff);
        assign(i, p, std::move(g), std::move(h));
      }
    };
    m.encoder.resize(config.n_enc_layers);
    m.decoder.resize(config.n_dec_layers);
    for (std::size_t i = 0; i < config.n_enc_layers; ++i) {
      const std::string p = "encoder.layer" + std::to_string(i);
      if (config.pre_attention_ln) m.encoder[i].attn_ln = f.layer_norm(p + ".attn_ln", d);
      m.encoder[i].self_attn = make_attention_params(f, p + ".self_attn", d, config.heads);
    }
    lstm_for("encoder", config.n_enc_layers,
             [&](std::size_t i, const std::string&, GateParams<T> g, HiddenParams<T> h) {
               m.encoder[i].gates = std::move(g);
               m.encoder[i].hidden = std::move(h);
             });
    for (std::size_t i = 0; i < config.n_dec_layers; ++i) {
      const std::string p = "decoder.layer" + std::to_string(i);
      auto& l = m.decoder[i];
      if (config.pre_attention_ln) l.self_ln = f.layer_norm(p + ".self_ln", d);
      l.self_attn = make_attention_params(f, p + ".self_attn", d, config.heads);
      if (config.pre_attention_ln) l.cross_ln = f.layer_norm(p + ".cross_ln", d);
      l.cross_attn = make_attention_params(f, p + ".cross_attn", d, config.heads);
      l.merge = config.merge_mode;
      if (config.merge_mode == MergeMode::concat) make_concat_merge_params(f, p + ".merge", d, l.w_m, l.b_m);
    }
    lstm_for("decoder", config.n_dec_layers,
             [&](std::size_t i, const std::string&, GateParams<T> g, HiddenParams<T> h) {
               m.decoder[i].gates = std::move(g);
               m.decoder[i].hidden = std::move(h);
             });
  }
  if (config.final_ln) {
    m.encoder_final_ln = f.layer_norm("encoder.final_ln", d);
    m.decoder_final_ln = f.layer_norm("decoder.final_ln", d);
  }

  const std::size_t expected = expected_parameter_count(config);
  if (m.parameter_count() != expected) {
    throw std::logic_error("parameter count " + std::to_string(m.parameter_count()) +
                           " differs from closed form " + std::to_string(expected));
  }
  return m;
}

template <typename T, typename U>
void copy_parameters(const ParamStore<U>& from, ParamStore<T>& to) {
  if (from.entries().size() != to.entries().size()) {
    throw InputError("parameter schema mismatch: " + std::to_string(from.entries().size()) + " vs " +
                     std::to_string(to.entries().size()) + " tensors");
  }
  for (const auto& dst : to.entries()) {
    const Tensor<U> src = from.find(dst.name);
    if (src.shape() != dst.tensor.shape()) {
      throw InputError("parameter " + dst.name + " has shape " + shape_to_string(src.shape()) +
                       ", expected " + shape_to_string(dst.tensor.shape()));
    }
    Tensor<T> target = dst.tensor;
    auto out = target.mutable_values();
    const auto in = src.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(in[i]);
  }
}

template <typename T>
Model<T> clone_model(const Model<T>& model) {
  Model<T> copy = build_model<T>(model.config, 0);
  copy_parameters(model.params, copy.params);
  return copy;
}

template <typename T>
Tensor<T> positional_encoding(std::size_t len, std::size_t d_model) {
  std::vector<T> table(len * d_model);
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
      table[pos * d_model + i] = static_cast<T>(std::sin(angle));
      if (i + 1 < d_model) table[pos * d_model + i + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return Tensor<T>({len, d_model}, std::move(table));
}

namespace {

template <typename T>
Tensor<T> embed(const Tensor<T>& table, const Tokens& ids, std::size_t d, const DropoutContext& ctx) {
  const Tensor<T> scaled = scale(embedding(table, ids), static_cast<T>(std::sqrt(static_cast<double>(d))));
  return dropout(add_broadcast(scaled, positional_encoding<T>(ids.cols, d)), ctx);
}

template <typename T>
const AffineProbe<T>* probe_at(const AffineProbe<T>* probe, Side side, std::size_t index0) {
  if (probe != nullptr && probe->side == side && probe->layer == index0 + 1) return probe;
  return nullptr;
}

}  // namespace

template <typename T>
EncoderOutput<T> encode(const Model<T>& model, const Tokens& src, const DropoutContext& ctx,
                        const AffineProbe<T>* probe) {
  const ModelConfig& c = model.config;
  EncoderOutput<T> out;
  out.pad_mask = padding_mask<T>(src);
  Tensor<T> x = embed(model.src_embedding, src, c.d_model, ctx);
  if (c.variant == Variant::residual) {
    for (std::size_t i = 0; i < model.residual_encoder.size(); ++i) {
      if (const auto* p = probe_at(probe, Side::encoder, i)) {
        x = apply_probe(*p, x);
      } else {
        x = residual_encoder_layer_forward(x, model.residual_encoder[i], &out.pad_mask, ctx);
      }
    }
  } else {
    DepthState<T> state = init_state(x);
    for (std::size_t i = 0; i < model.encoder.size(); ++i) {
      if (const auto* p = probe_at(probe, Side::encoder, i)) {
        state.output = apply_probe(*p, state.output);
      } else {
        state = encoder_layer_forward(state, model.encoder[i], &out.pad_mask, ctx);
      }
    }
    x = state.output;
  }
  if (c.final_ln) x = layer_norm(x, model.encoder_final_ln.gain, model.encoder_final_ln.bias);
  out.states = x;
  return out;
}

template <typename T>
Tensor<T> decode(const Model<T>& model, const EncoderOutput<T>& enc, const Tokens& tgt_in,
                 const DropoutContext& ctx, const AffineProbe<T>* probe) {
  const ModelConfig& c = model.config;
  if (enc.states.extent(0) != tgt_in.rows) throw InputError("decode: batch size mismatch");
  const AttentionMask<T> self_mask = combine_masks(causal_mask<T>(tgt_in.cols), padding_mask<T>(tgt_in));
  Tensor<T> y = embed(model.tgt_embedding, tgt_in, c.d_model, ctx);
  if (c.variant == Variant::residual) {
    for (std::size_t i = 0; i < model.residual_decoder.size(); ++i) {
      if (const auto* p = probe_at(probe, Side::decoder, i)) {
        y = apply_probe(*p, y);
      } else {
        y = residual_decoder_layer_forward(y, enc.states, model.residual_decoder[i], &self_mask,
                                           &enc.pad_mask, ctx);
      }
    }
  } else {
    DepthState<T> state = init_state(y);
    for (std::size_t i = 0; i < model.decoder.size(); ++i) {
      if (const auto* p = probe_at(probe, Side::decoder, i)) {
        state.output = apply_probe(*p, state.output);
      } else {
        state = decoder_layer_forward(state, enc.states, model.decoder[i], &self_mask, &enc.pad_mask, ctx);
      }
    }
    y = state.output;
  }
  if (c.final_ln) y = layer_norm(y, model.decoder_final_ln.gain, model.decoder_final_ln.bias);
  if (c.tie_embeddings) return linear_transposed(y, model.tgt_embedding);
  return linear(y, model.classifier_w, model.classifier_b);
}

template <typename T>
Tensor<T> forward(const Model<T>& model, const Tokens& src, const Tokens& tgt_in,
                  const DropoutContext& ctx, const AffineProbe<T>* probe) {
  if (src.rows != tgt_in.rows) throw InputError("forward: source and target batch sizes differ");
  return decode(model, encode(model, src, ctx, probe), tgt_in, ctx, probe);
}

#define DWT_INSTANTIATE_MODEL(T)                                                                  \
  template Tensor<T> apply_probe(const AffineProbe<T>&, const Tensor<T>&);                        \
  template Model<T> build_model<T>(const ModelConfig&, std::uint64_t);                            \
  template Model<T> clone_model(const Model<T>&);                                                 \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                            \
  template EncoderOutput<T> encode(const Model<T>&, const Tokens&, const DropoutContext&,         \
                                   const AffineProbe<T>*);                                        \
  template Tensor<T> decode(const Model<T>&, const EncoderOutput<T>&, const Tokens&,              \
                            const DropoutContext&, const AffineProbe<T>*);                        \
  template Tensor<T> forward(const Model<T>&, const Tokens&, const Tokens&, const DropoutContext&, \
                             const AffineProbe<T>*);

DWT_INSTANTIATE_MODEL(float)
DWT_INSTANTIATE_MODEL(double)

template void copy_parameters(const ParamStore<float>&, ParamStore<float>&);
template void copy_parameters(const ParamStore<double>&, ParamStore<double>&);
template void copy_parameters(const ParamStore<float>&, ParamStore<double>&);
template void copy_parameters(const ParamStore<double>&, ParamStore<float>&);

#undef DWT_INSTANTIATE_MODEL

}  // namespace dwt
