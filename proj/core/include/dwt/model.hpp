#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "dwt/key_values.hpp"
#include "dwt/layers.hpp"
#include "dwt/tokens.hpp"

namespace dwt {

/// residual: pre-norm Transformer layers. dwlstm: depth-wise LSTM in place of
/// residual connections and the feed-forward sub-layer.
enum class Variant { residual, dwlstm };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct ModelConfig {
  Variant variant = Variant::dwlstm;
  std::size_t n_enc_layers = 6;
  std::size_t n_dec_layers = 6;
  std::size_t d_model = 512;
  std::size_t d_ff = 2048;
  std::size_t heads = 8;
  std::size_t vocab_size = 32;
  double dropout = 0.1;
  HiddenVariant hidden_variant = HiddenVariant::ffn2;
  SharingMode sharing = SharingMode::gate;
  MergeMode merge_mode = MergeMode::add;
  bool tie_embeddings = true;
  bool final_ln = true;
  /// dwlstm only: layer norm ahead of the attention sub-layers.
  bool pre_attention_ln = true;
  /// dwlstm only: initial forget-gate offset.
  double forget_bias = 1.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Applies one key; returns false when the key is not a model key.
  bool set(std::string_view key, std::string_view value);
  KeyValues to_key_values() const;
  static ModelConfig from_key_values(const KeyValues& pairs);

  bool operator==(const ModelConfig&) const = default;
};

/// Replaces one layer's function with y = x * W + b during forward. For the
/// dwlstm variant x is the previous layer's output and the cell passes through
/// unchanged. `layer` is 1-based.
enum class Side { encoder, decoder };

std::string_view to_string(Side s);

template <typename T>
struct AffineProbe {
  Side side = Side::encoder;
  std::size_t layer = 1;
  Tensor<T> weight;  // [d, d]
  Tensor<T> bias;    // [d]
};

template <typename T>
Tensor<T> apply_probe(const AffineProbe<T>& probe, const Tensor<T>& x);

template <typename T>
struct Model {
  ModelConfig config;
  ParamStore<T> params;
  Tensor<T> src_embedding;
  Tensor<T> tgt_embedding;
  Tensor<T> classifier_w;  // undefined when tied to tgt_embedding
  Tensor<T> classifier_b;
  std::vector<EncoderLayerParams<T>> encoder;
  std::vector<DecoderLayerParams<T>> decoder;
  std::vector<ResidualEncoderLayerParams<T>> residual_encoder;
  std::vector<ResidualDecoderLayerParams<T>> residual_decoder;
  LayerNormParams<T> encoder_final_ln;
  LayerNormParams<T> decoder_final_ln;

  std::size_t parameter_count() const { return params.element_count(); }
};

/// Closed-form parameter count of a configuration.
std::size_t expected_parameter_count(const ModelConfig& config);

/// Deterministic initialisation from `seed`; sharing and tied embeddings are
/// realised by binding one tensor at several use sites.
template <typename T>
Model<T> build_model(const ModelConfig& config, std::uint64_t seed);

/// Deep copy with the same aliasing structure.
template <typename T>
Model<T> clone_model(const Model<T>& model);

/// Copies values by parameter name; schemas must match.
template <typename T, typename U>
void copy_parameters(const ParamStore<U>& from, ParamStore<T>& to);

template <typename T>
struct EncoderOutput {
  Tensor<T> states;
  AttentionMask<T> pad_mask;
};

template <typename T>
EncoderOutput<T> encode(const Model<T>& model, const Tokens& src, const DropoutContext& ctx,
                        const AffineProbe<T>* probe = nullptr);

/// Decoder logits [B, Lt, vocab] for the shifted target `tgt_in`.
template <typename T>
Tensor<T> decode(const Model<T>& model, const EncoderOutput<T>& enc, const Tokens& tgt_in,
                 const DropoutContext& ctx, const AffineProbe<T>* probe = nullptr);

template <typename T>
Tensor<T> forward(const Model<T>& model, const Tokens& src, const Tokens& tgt_in,
                  const DropoutContext& ctx, const AffineProbe<T>* probe = nullptr);

/// Sinusoidal position table [len, d].
template <typename T>
Tensor<T> positional_encoding(std::size_t len, std::size_t d_model);

}  // namespace dwt
