#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace dwt::detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// c[m, n] (+)= op(a) * op(b) on row-major buffers, where op(a) is [m, k] and
/// op(b) is [k, n]. Transposed operands are stored as [k, m] / [n, k].
template <typename T>
void gemm(const T* a, bool transpose_a, const T* b, bool transpose_b, T* c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate) {
  using Index = Eigen::Index;
  const auto mi = static_cast<Index>(m);
  const auto ki = static_cast<Index>(k);
  const auto ni = static_cast<Index>(n);
  MatrixMap<T> cm(c, mi, ni);
  auto run = [&](const auto& product) {
    if (accumulate) {
      cm.noalias() += product;
    } else {
      cm.noalias() = product;
    }
  };
  if (!transpose_a && !transpose_b) {
    run(ConstMatrixMap<T>(a, mi, ki) * ConstMatrixMap<T>(b, ki, ni));
  } else if (!transpose_a && transpose_b) {
    run(ConstMatrixMap<T>(a, mi, ki) * ConstMatrixMap<T>(b, ni, ki).transpose());
  } else if (transpose_a && !transpose_b) {
    run(ConstMatrixMap<T>(a, ki, mi).transpose() * ConstMatrixMap<T>(b, ki, ni));
  } else {
    run(ConstMatrixMap<T>(a, ki, mi).transpose() * ConstMatrixMap<T>(b, ni, ki).transpose());
  }
}

}  // namespace dwt::detail
