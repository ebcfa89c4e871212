#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "dwt/attention.hpp"
#include "dwt/dwlstm.hpp"
#include "dwt/tensor.hpp"

/// Naive scalar re-implementations used as independent references.
namespace dwt::oracle {

using Row = std::vector<double>;
using Mat = std::vector<Row>;

/// Rows of the trailing [rows, cols] block starting at `offset` elements.
inline Mat rows_of(const Tensor<double>& t, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
  Mat m(rows, Row(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m[r][c] = t.values()[offset + r * cols + c];
  return m;
}

inline Mat affine(const Mat& x, const Tensor<double>& w, const Tensor<double>* b) {
  const std::size_t in = w.extent(0);
  const std::size_t out = w.extent(1);
  Mat y(x.size(), Row(out, 0.0));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t j = 0; j < out; ++j) {
      double acc = b != nullptr && b->defined() ? b->values()[j] : 0.0;
      for (std::size_t k = 0; k < in; ++k) acc += x[r][k] * w.values()[k * out + j];
      y[r][j] = acc;
    }
  return y;
}

inline Mat affine(const Mat& x, const Tensor<double>& w, const Tensor<double>& b) { return affine(x, w, &b); }

inline Mat layer_norm(const Mat& x, const Tensor<double>& gain, const Tensor<double>& bias) {
  Mat y = x;
  for (auto& row : y) {
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    const double sigma = std::sqrt(var / static_cast<double>(row.size()));
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = gain.values()[j] * (row[j] - mu) / (sigma + 1e-6) + bias.values()[j];
  }
  return y;
}

inline Mat map(Mat x, const std::function<double(double)>& f) {
  for (auto& row : x)
    for (auto& v : row) v = f(v);
  return x;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline Mat add(Mat a, const Mat& b) {
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) a[r][c] += b[r][c];
  return a;
}

inline Mat hadamard(Mat a, const Mat& b) {
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) a[r][c] *= b[r][c];
  return a;
}

inline Mat concat(const Mat& a, const Mat& b) {
  Mat y = a;
  for (std::size_t r = 0; r < a.size(); ++r) y[r].insert(y[r].end(), b[r].begin(), b[r].end());
  return y;
}

/// One batch row of multi-head attention, including the key bias. `blocked(i, j)`
/// removes key j from query i.
inline Mat attention(const Mat& q_in, const Mat& kv_in, const AttentionParams<double>& p,
                     const std::function<bool(std::size_t, std::size_t)>& blocked = {}) {
  const Mat q = affine(q_in, p.w_q, p.b_q);
  const Mat k = affine(kv_in, p.w_k, p.b_k);
  const Mat v = affine(kv_in, p.w_v, p.b_v);
  const std::size_t d = q[0].size();
  const std::size_t dh = d / p.heads;
  Mat context(q.size(), Row(d, 0.0));
  for (std::size_t h = 0; h < p.heads; ++h) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> score(k.size(), -std::numeric_limits<double>::infinity());
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (blocked && blocked(i, j)) continue;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += q[i][h * dh + c] * k[j][h * dh + c];
        score[j] = s / std::sqrt(static_cast<double>(dh));
        top = std::max(top, score[j]);
      }
      double total = 0.0;
      for (auto& s : score) {
        s = std::isinf(s) ? 0.0 : std::exp(s - top);
        total += s;
      }
      for (std::size_t j = 0; j < k.size(); ++j)
        for (std::size_t c = 0; c < dh; ++c) context[i][h * dh + c] += score[j] / total * v[j][h * dh + c];
    }
  }
  return affine(context, p.w_o, p.b_o);
}

inline Mat gate(const Mat& c, const Tensor<double>& w, const Tensor<double>& b, const LayerNormParams<double>& ln) {
  return map(layer_norm(affine(c, w, b), ln.gain, ln.bias), sigmoid);
}

inline Mat hidden(const Mat& c, const HiddenParams<double>& p) {
  if (p.variant == HiddenVariant::single) return map(layer_norm(affine(c, p.w_h, p.b_h), p.ln_h.gain, p.ln_h.bias), gelu);
  return affine(map(layer_norm(affine(c, p.w_h1, p.b_h1), p.ln_h1.gain, p.ln_h1.bias), gelu), p.w_h2, p.b_h2);
}

struct State {
  Mat output;
  Mat cell;
};

inline State lstm_step(const Mat& input, const State& prev, const GateParams<double>& g,
                       const HiddenParams<double>& hp) {
  const Mat c = concat(input, prev.output);
  const Mat i = gate(c, g.w_ig, g.b_ig, g.ln_ig);
  const Mat f = gate(c, g.w_fg, g.b_fg, g.ln_fg);
  const Mat o = gate(c, g.w_og, g.b_og, g.ln_og);
  const Mat cell = add(hadamard(prev.cell, f), hadamard(hidden(c, hp), i));
  return {hadamard(cell, o), cell};
}

inline double max_abs_diff(const Mat& a, const Tensor<double>& t, std::size_t offset = 0) {
  double worst = 0.0;
  std::size_t k = offset;
  for (const auto& row : a)
    for (double v : row) worst = std::max(worst, std::abs(v - t.values()[k++]));
  return worst;
}

}  // namespace dwt::oracle
