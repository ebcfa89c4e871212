#include "dwt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dwt/errors.hpp"
#include "gemm.hpp"

namespace dwt {

namespace {

template <typename T>
using NodeT = detail::Node<T>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                      " vs " + shape_to_string(b.shape()));
  }
}

template <typename T>
Shape with_last(const Shape& shape, std::size_t last) {
  Shape out = shape;
  out.back() = last;
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op_result<T>("add", a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      T* g = in->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> add_broadcast(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    throw ConfigError("add_broadcast: " + shape_to_string(bs) + " is not a suffix of " +
                      shape_to_string(as));
  }
  const std::size_t inner = b.size();
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % inner];
  return make_op_result<T>("add_broadcast", as, std::move(out), {a, b},
                           [inner](NodeT<T>& self) {
                             auto& a_node = *self.inputs[0];
                             auto& b_node = *self.inputs[1];
                             if (a_node.requires_grad) {
                               T* g = a_node.grad_buffer();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                             }
                             if (b_node.requires_grad) {
                               T* g = b_node.grad_buffer();
                               for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % inner] += self.grad[i];
                             }
                           });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op_result<T>("sub", a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    if (self.inputs[0]->requires_grad) {
      T* g = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (self.inputs[1]->requires_grad) {
      T* g = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op_result<T>("mul", a.shape(), std::move(out), {a, b}, [](NodeT<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (an.requires_grad) {
      T* g = an.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bn.data[i];
    }
    if (bn.requires_grad) {
      T* g = bn.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * an.data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_op_result<T>("scale", a.shape(), std::move(out), {a}, [factor](NodeT<T>& self) {
    T* g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.values()) total += v;
  return make_op_result<T>("sum", {1}, {total}, {a}, [](NodeT<T>& self) {
    auto& in = *self.inputs[0];
    T* g = in.grad_buffer();
    for (std::size_t i = 0; i < in.data.size(); ++i) g[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw ConfigError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                      shape_to_string(shape));
  }
  std::vector<T> out(a.values().begin(), a.values().end());
  return make_op_result<T>("reshape", std::move(shape), std::move(out), {a}, [](NodeT<T>& self) {
    T* g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw ConfigError("concat_last: leading shapes differ " + shape_to_string(a.shape()) +
                      " vs " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.extent(-1);
  const std::size_t n = b.extent(-1);
  const std::size_t rows = a.size() / m;
  std::vector<T> out(rows * (m + n));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + r * m, m, out.begin() + r * (m + n));
    std::copy_n(bv.begin() + r * n, n, out.begin() + r * (m + n) + m);
  }
  return make_op_result<T>(
      "concat_last", with_last<T>(a.shape(), m + n), std::move(out), {a, b},
      [rows, m, n](NodeT<T>& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        if (an.requires_grad) {
          T* g = an.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < m; ++j) g[r * m + j] += self.grad[r * (m + n) + j];
        }
        if (bn.requires_grad) {
          T* g = bn.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) g[r * n + j] += self.grad[r * (m + n) + m + j];
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.rank() != 2 || x.extent(-1) != w.extent(0)) {
    throw ConfigError("linear: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                      shape_to_string(w.shape()));
  }
  const std::size_t m = w.extent(0);
  const std::size_t n = w.extent(1);
  if (b.defined() && (b.rank() != 1 || b.extent(0) != n)) {
    throw ConfigError("linear: bias " + shape_to_string(b.shape()) + " does not match output width " +
                      std::to_string(n));
  }
  const std::size_t rows = x.size() / m;
  std::vector<T> out(rows * n);
  detail::gemm(x.values().data(), false, w.values().data(), false, out.data(), rows, m, n, false);
  if (b.defined()) {
    const auto bv = b.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  }
  std::vector<Tensor<T>> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  return make_op_result<T>(
      "linear", with_last<T>(x.shape(), n), std::move(out), std::move(inputs),
      [rows, m, n](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        const T* dy = self.grad.data();
        if (xn.requires_grad) {
          detail::gemm(dy, false, wn.data.data(), true, xn.grad_buffer(), rows, n, m, true);
        }
        if (wn.requires_grad) {
          detail::gemm(xn.data.data(), true, dy, false, wn.grad_buffer(), m, rows, n, true);
        }
        if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
          T* gb = self.inputs[2]->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) gb[j] += dy[r * n + j];
        }
      });
}

template <typename T>
Tensor<T> linear_transposed(const Tensor<T>& x, const Tensor<T>& e) {
  if (e.rank() != 2 || x.extent(-1) != e.extent(1)) {
    throw ConfigError("linear_transposed: input " + shape_to_string(x.shape()) +
                      " incompatible with table " + shape_to_string(e.shape()));
  }
  const std::size_t n = e.extent(0);
  const std::size_t m = e.extent(1);
  const std::size_t rows = x.size() / m;
  std::vector<T> out(rows * n);
  detail::gemm(x.values().data(), false, e.values().data(), true, out.data(), rows, m, n, false);
  return make_op_result<T>(
      "linear_transposed", with_last<T>(x.shape(), n), std::move(out), {x, e},
      [rows, m, n](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        auto& en = *self.inputs[1];
        const T* dy = self.grad.data();
        if (xn.requires_grad) {
          detail::gemm(dy, false, en.data.data(), false, xn.grad_buffer(), rows, n, m, true);
        }
        if (en.requires_grad) {
          detail::gemm(dy, true, xn.data.data(), false, en.grad_buffer(), n, rows, m, true);
        }
      });
}

template <typename T>
Tensor<T> batched_matmul(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.extent(0) != b.extent(0)) {
    throw ConfigError("batched_matmul: incompatible " + shape_to_string(a.shape()) + " and " +
                      shape_to_string(b.shape()));
  }
  const std::size_t batch = a.extent(0);
  const std::size_t p = a.extent(1);
  const std::size_t q = a.extent(2);
  const std::size_t bq = transpose_b ? b.extent(2) : b.extent(1);
  const std::size_t r = transpose_b ? b.extent(1) : b.extent(2);
  if (bq != q) {
    throw ConfigError("batched_matmul: inner extents differ " + shape_to_string(a.shape()) +
                      " and " + shape_to_string(b.shape()));
  }
  std::vector<T> out(batch * p * r);
  for (std::size_t i = 0; i < batch; ++i) {
    detail::gemm(a.values().data() + i * p * q, false, b.values().data() + i * q * r, transpose_b,
                 out.data() + i * p * r, p, q, r, false);
  }
  return make_op_result<T>(
      "batched_matmul", {batch, p, r}, std::move(out), {a, b},
      [batch, p, q, r, transpose_b](NodeT<T>& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        for (std::size_t i = 0; i < batch; ++i) {
          const T* dc = self.grad.data() + i * p * r;
          const T* bd = bn.data.data() + i * q * r;
          const T* ad = an.data.data() + i * p * q;
          if (an.requires_grad) {
            // dA[p, q] = dC[p, r] * B^T, where B is [q, r] (or stored [r, q]).
            detail::gemm(dc, false, bd, !transpose_b, an.grad_buffer() + i * p * q, p, r, q, true);
          }
          if (bn.requires_grad) {
            if (transpose_b) {
              // B stored [r, q]: dB = dC^T * A.
              detail::gemm(dc, true, ad, false, bn.grad_buffer() + i * q * r, r, p, q, true);
            } else {
              detail::gemm(ad, true, dc, false, bn.grad_buffer() + i * q * r, q, p, r, true);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias) {
  const std::size_t d = x.extent(-1);
  if (gain.rank() != 1 || bias.rank() != 1 || gain.extent(0) != d || bias.extent(0) != d) {
    throw ConfigError("layer_norm: affine parameters " + shape_to_string(gain.shape()) + "/" +
                      shape_to_string(bias.shape()) + " do not match last axis " +
                      std::to_string(d));
  }
  const std::size_t rows = x.size() / d;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<T> out(x.size());
  std::vector<T> normalized(x.size());
  std::vector<T> stddev(rows);
  const T eps = static_cast<T>(kLayerNormEpsilon);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T sigma = std::sqrt(var);
    stddev[r] = sigma;
    const T inv = T(1) / (sigma + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T n = (row[j] - mu) * inv;
      normalized[r * d + j] = n;
      out[r * d + j] = n * gv[j] + bv[j];
    }
  }
  return make_op_result<T>(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, d, eps, normalized = std::move(normalized), stddev = std::move(stddev)](NodeT<T>& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const T* dy = self.grad.data();
        if (gn.requires_grad) {
          T* g = gn.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += dy[r * d + j] * normalized[r * d + j];
        }
        if (bn.requires_grad) {
          T* g = bn.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += dy[r * d + j];
        }
        if (!xn.requires_grad) return;
        T* gx = xn.grad_buffer();
        const T* gain_v = gn.data.data();
        const T dn = static_cast<T>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T sigma = stddev[r];
          const T s = sigma + eps;
          // g = dL/d(normalized); normalized = xc / s with s = sigma + eps.
          T g_mean = 0;
          T g_dot_n = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const T g = dy[r * d + j] * gain_v[j];
            g_mean += g;
            g_dot_n += g * normalized[r * d + j];
          }
          g_mean /= dn;
          // d sigma / d x_j = xc_j / (d * sigma); xc_j = normalized_j * s.
          const T coeff = sigma > T(0) ? g_dot_n / (dn * sigma) : T(0);
          for (std::size_t j = 0; j < d; ++j) {
            const T g = dy[r * d + j] * gain_v[j];
            gx[r * d + j] += (g - g_mean) / s - coeff * normalized[r * d + j];
          }
        }
      });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  const auto xv = x.values();
  std::vector<T> out(x.size());
  const T inv_sqrt2 = static_cast<T>(1.0 / std::numbers::sqrt2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = xv[i] * T(0.5) * (T(1) + std::erf(xv[i] * inv_sqrt2));
  }
  return make_op_result<T>("gelu", x.shape(), std::move(out), {x}, [inv_sqrt2](NodeT<T>& self) {
    auto& xn = *self.inputs[0];
    T* g = xn.grad_buffer();
    const T inv_sqrt_2pi = static_cast<T>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T v = xn.data[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  const auto xv = x.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xv[i];
    if (v >= 0) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  return make_op_result<T>("sigmoid", x.shape(), std::move(out), {x}, [](NodeT<T>& self) {
    T* g = self.inputs[0]->grad_buffer();
    // The node's own data holds the forward output y; dy/dx = y (1 - y).
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T y = self.data[i];
      g[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int r = static_cast<int>(x.rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ConfigError("softmax: axis out of range");
  const Shape& s = x.shape();
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (int i = 0; i < a; ++i) outer *= s[static_cast<std::size_t>(i)];
  for (int i = a + 1; i < r; ++i) inner *= s[static_cast<std::size_t>(i)];
  const std::size_t n = s[static_cast<std::size_t>(a)];
  const auto xv = x.values();
  std::vector<T> out(x.size(), T(0));
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = neg_inf;
      for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, xv[base + k * inner]);
      if (mx == neg_inf) continue;  // fully masked slice stays zero
      T total = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const T v = xv[base + k * inner];
        const T e = v == neg_inf ? T(0) : std::exp(v - mx);
        out[base + k * inner] = e;
        total += e;
      }
      const T inv = T(1) / total;
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] *= inv;
    }
  }
  return make_op_result<T>("softmax", s, std::move(out), {x}, [outer, inner, n](NodeT<T>& self) {
    T* g = self.inputs[0]->grad_buffer();
    const T* y = self.data.data();
    const T* dy = self.grad.data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        T dot = 0;
        for (std::size_t k = 0; k < n; ++k) dot += y[base + k * inner] * dy[base + k * inner];
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t idx = base + k * inner;
          g[idx] += y[idx] * (dy[idx] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: rate must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.size());
  std::vector<T> out(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? T(0) : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  return make_op_result<T>("dropout", x.shape(), std::move(out), {x},
                           [mask = std::move(mask)](NodeT<T>& self) {
                             T* g = self.inputs[0]->grad_buffer();
                             for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * mask[i];
                           });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, const DropoutContext& ctx) {
  if (!ctx.active()) return x;
  return dropout(x, ctx.rate, *ctx.rng, true);
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const Tokens& ids) {
  if (table.rank() != 2) throw ConfigError("embedding: table must be rank 2");
  const std::size_t vocab = table.extent(0);
  const std::size_t d = table.extent(1);
  if (ids.ids.size() != ids.rows * ids.cols || ids.ids.empty()) {
    throw InputError("embedding: malformed token matrix");
  }
  for (int id : ids.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw InputError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                       std::to_string(vocab));
    }
  }
  std::vector<T> out(ids.ids.size() * d);
  const auto tv = table.values();
  for (std::size_t i = 0; i < ids.ids.size(); ++i) {
    std::copy_n(tv.begin() + static_cast<std::size_t>(ids.ids[i]) * d, d, out.begin() + i * d);
  }
  return make_op_result<T>("embedding", {ids.rows, ids.cols, d}, std::move(out), {table},
                           [index = ids.ids, d](NodeT<T>& self) {
                             T* g = self.inputs[0]->grad_buffer();
                             for (std::size_t i = 0; i < index.size(); ++i) {
                               T* row = g + static_cast<std::size_t>(index[i]) * d;
                               for (std::size_t j = 0; j < d; ++j) row[j] += self.grad[i * d + j];
                             }
                           });
}

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads) {
  if (x.rank() != 3 || x.extent(2) % heads != 0) {
    throw ConfigError("split_heads: width " + std::to_string(x.extent(-1)) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t b = x.extent(0);
  const std::size_t l = x.extent(1);
  const std::size_t d = x.extent(2);
  const std::size_t dh = d / heads;
  const auto xv = x.values();
  std::vector<T> out(x.size());
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t li = 0; li < l; ++li)
        std::copy_n(xv.begin() + (bi * l + li) * d + h * dh, dh,
                    out.begin() + ((bi * heads + h) * l + li) * dh);
  return make_op_result<T>("split_heads", {b * heads, l, dh}, std::move(out), {x},
                           [b, l, d, dh, heads](NodeT<T>& self) {
                             T* g = self.inputs[0]->grad_buffer();
                             for (std::size_t bi = 0; bi < b; ++bi)
                               for (std::size_t h = 0; h < heads; ++h)
                                 for (std::size_t li = 0; li < l; ++li) {
                                   const T* src = self.grad.data() + ((bi * heads + h) * l + li) * dh;
                                   T* dst = g + (bi * l + li) * d + h * dh;
                                   for (std::size_t j = 0; j < dh; ++j) dst[j] += src[j];
                                 }
                           });
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t heads) {
  if (x.rank() != 3 || x.extent(0) % heads != 0) {
    throw ConfigError("merge_heads: leading extent not divisible by head count");
  }
  const std::size_t b = x.extent(0) / heads;
  const std::size_t l = x.extent(1);
  const std::size_t dh = x.extent(2);
  const std::size_t d = dh * heads;
  const auto xv = x.values();
  std::vector<T> out(x.size());
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t li = 0; li < l; ++li)
        std::copy_n(xv.begin() + ((bi * heads + h) * l + li) * dh, dh,
                    out.begin() + (bi * l + li) * d + h * dh);
  return make_op_result<T>("merge_heads", {b, l, d}, std::move(out), {x},
                           [b, l, d, dh, heads](NodeT<T>& self) {
                             T* g = self.inputs[0]->grad_buffer();
                             for (std::size_t bi = 0; bi < b; ++bi)
                               for (std::size_t h = 0; h < heads; ++h)
                                 for (std::size_t li = 0; li < l; ++li) {
                                   const T* src = self.grad.data() + (bi * l + li) * d + h * dh;
                                   T* dst = g + ((bi * heads + h) * l + li) * dh;
                                   for (std::size_t j = 0; j < dh; ++j) dst[j] += src[j];
                                 }
                           });
}

#define DWT_INSTANTIATE_OPS(T)                                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> add_broadcast(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                   \
  template Tensor<T> sum(const Tensor<T>&);                                        \
  template Tensor<T> mean(const Tensor<T>&);                                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                             \
  template Tensor<T> concat_last(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> linear_transposed(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> batched_matmul(const Tensor<T>&, const Tensor<T>&, bool);     \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> gelu(const Tensor<T>&);                                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                    \
  template Tensor<T> softmax(const Tensor<T>&, int);                               \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&, bool);                \
  template Tensor<T> dropout(const Tensor<T>&, const DropoutContext&);             \
  template Tensor<T> embedding(const Tensor<T>&, const Tokens&);                   \
  template Tensor<T> split_heads(const Tensor<T>&, std::size_t);                   \
  template Tensor<T> merge_heads(const Tensor<T>&, std::size_t);

DWT_INSTANTIATE_OPS(float)
DWT_INSTANTIATE_OPS(double)

#undef DWT_INSTANTIATE_OPS

}  // namespace dwt
