#include "dwt/attention.hpp"

#include <algorithm>
#include <cmath>

#include "dwt/errors.hpp"

namespace dwt {

template <typename T>
AttentionMask<T> causal_mask(std::size_t len) {
  if (len == 0) throw ConfigError("causal_mask: length must be positive");
  AttentionMask<T> mask{1, len, len, std::vector<T>(len * len, T(0))};
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = i + 1; j < len; ++j) mask.values[i * len + j] = AttentionMask<T>::blocked();
  return mask;
}

template <typename T>
AttentionMask<T> padding_mask(const Tokens& keys, int pad_id) {
  AttentionMask<T> mask{keys.rows, 1, keys.cols, std::vector<T>(keys.rows * keys.cols, T(0))};
  for (std::size_t i = 0; i < keys.ids.size(); ++i)
    if (keys.ids[i] == pad_id) mask.values[i] = AttentionMask<T>::blocked();
  return mask;
}

template <typename T>
AttentionMask<T> combine_masks(const AttentionMask<T>& a, const AttentionMask<T>& b) {
  auto merge = [](std::size_t x, std::size_t y, const char* what) {
    if (x != y && x != 1 && y != 1) throw ConfigError(std::string("combine_masks: ") + what + " mismatch");
    return std::max(x, y);
  };
  if (a.k_len != b.k_len) throw ConfigError("combine_masks: key length mismatch");
  AttentionMask<T> out;
  out.batch = merge(a.batch, b.batch, "batch");
  out.q_len = merge(a.q_len, b.q_len, "query length");
  out.k_len = a.k_len;
  out.values.resize(out.batch * out.q_len * out.k_len);
  for (std::size_t bi = 0; bi < out.batch; ++bi)
    for (std::size_t q = 0; q < out.q_len; ++q)
      for (std::size_t k = 0; k < out.k_len; ++k)
        out.values[(bi * out.q_len + q) * out.k_len + k] = a.at(bi, q, k) + b.at(bi, q, k);
  return out;
}

template <typename T>
Tensor<T> apply_mask(const Tensor<T>& scores, const AttentionMask<T>& mask, std::size_t heads) {
  const std::size_t n = scores.extent(0);
  const std::size_t lq = scores.extent(1);
  const std::size_t lk = scores.extent(2);
  const std::size_t batch = n / heads;
  if (mask.k_len != lk || (mask.q_len != 1 && mask.q_len != lq) ||
      (mask.batch != 1 && mask.batch != batch)) {
    throw ConfigError("attention mask does not cover scores of shape " +
                      shape_to_string(scores.shape()));
  }
  std::vector<T> out(scores.values().begin(), scores.values().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t q = 0; q < lq; ++q)
      for (std::size_t k = 0; k < lk; ++k) out[(i * lq + q) * lk + k] += mask.at(i / heads, q, k);
  return make_op_result<T>(
      "apply_mask", scores.shape(), std::move(out), {scores},
      [](detail::Node<T>& self) {
        T* g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      },
      /*allow_negative_infinity=*/true);
}

std::size_t attention_param_count(std::size_t d_model) { return 4 * (d_model * d_model + d_model); }

template <typename T>
AttentionParams<T> make_attention_params(ParamFactory<T>& factory, const std::string& prefix,
                                         std::size_t d_model, std::size_t heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  AttentionParams<T> p;
  p.heads = heads;
  p.w_q = factory.weight(prefix + ".w_q", d_model, d_model);
  p.b_q = factory.constant(prefix + ".b_q", {d_model}, T(0));
  p.w_k = factory.weight(prefix + ".w_k", d_model, d_model);
  p.b_k = factory.constant(prefix + ".b_k", {d_model}, T(0));
  p.w_v = factory.weight(prefix + ".w_v", d_model, d_model);
  p.b_v = factory.constant(prefix + ".b_v", {d_model}, T(0));
  p.w_o = factory.weight(prefix + ".w_o", d_model, d_model);
  p.b_o = factory.constant(prefix + ".b_o", {d_model}, T(0));
  return p;
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q_in, const Tensor<T>& k_in, const Tensor<T>& v_in,
                               const AttentionMask<T>* mask, const AttentionParams<T>& params,
                               const DropoutContext& ctx) {
  const std::size_t d = q_in.extent(-1);
  const std::size_t heads = params.heads;
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (q_in.rank() != 3 || k_in.rank() != 3 || k_in.shape() != v_in.shape() ||
      q_in.extent(0) != k_in.extent(0) || k_in.extent(2) != d) {
    throw ConfigError("attention: inconsistent input shapes");
  }
  const Tensor<T> q = split_heads(linear(q_in, params.w_q, params.b_q), heads);
  // The key bias adds q . b_k to every score of a query row, which the softmax
  // cancels exactly, so it is left out of the product. The parameter stays in
  // the schema and its gradient is identically zero.
  const Tensor<T> k = split_heads(linear(k_in, params.w_k, Tensor<T>{}), heads);
  const Tensor<T> v = split_heads(linear(v_in, params.w_v, params.b_v), heads);
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(d / heads));
  Tensor<T> scores = scale(batched_matmul(q, k, true), inv_scale);
  if (mask != nullptr) scores = apply_mask(scores, *mask, heads);
  Tensor<T> weights = dropout(softmax(scores, -1), ctx);
  Tensor<T> context = merge_heads(batched_matmul(weights, v, false), heads);
  return linear(context, params.w_o, params.b_o);
}

#define DWT_INSTANTIATE_ATTENTION(T)                                                             \
  template AttentionMask<T> causal_mask<T>(std::size_t);                                         \
  template AttentionMask<T> padding_mask<T>(const Tokens&, int);                                 \
  template AttentionMask<T> combine_masks(const AttentionMask<T>&, const AttentionMask<T>&);     \
  template Tensor<T> apply_mask(const Tensor<T>&, const AttentionMask<T>&, std::size_t);         \
  template AttentionParams<T> make_attention_params(ParamFactory<T>&, const std::string&,        \
                                                    std::size_t, std::size_t);                   \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                          const AttentionMask<T>*, const AttentionParams<T>&,    \
                                          const DropoutContext&);

DWT_INSTANTIATE_ATTENTION(float)
DWT_INSTANTIATE_ATTENTION(double)

#undef DWT_INSTANTIATE_ATTENTION

}  // namespace dwt
