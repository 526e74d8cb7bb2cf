#pragma once

#include <Eigen/Core>

#include "stnet/tensor.hpp"

namespace stnet::linalg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

inline ConstMap view(const Tensor &t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
inline MutMap view(Tensor &t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

// Row block [row0, row0 + nrows) of a row-major matrix is contiguous.
inline ConstMap row_block(const Tensor &t, std::size_t row0, std::size_t nrows) {
  return ConstMap(t.data().data() + row0 * t.cols(), static_cast<Eigen::Index>(nrows),
                  static_cast<Eigen::Index>(t.cols()));
}
inline MutMap row_block(Tensor &t, std::size_t row0, std::size_t nrows) {
  return MutMap(t.data().data() + row0 * t.cols(), static_cast<Eigen::Index>(nrows),
                static_cast<Eigen::Index>(t.cols()));
}

/// a (m x k) * b (k x n).
inline Tensor matmul(const Tensor &a, const Tensor &b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros(a.rows(), b.cols());
  if (a.cols() > 0) view(out).noalias() = view(a) * view(b);
  return out;
}

/// out += a^T (k x m)^T * b (k x n).
inline void add_matmul_tn(Tensor &out, const Tensor &a, const Tensor &b) {
  view(out).noalias() += view(a).transpose() * view(b);
}

/// out += a (m x k) * b^T.
inline void add_matmul_nt(Tensor &out, const Tensor &a, const Tensor &b) {
  view(out).noalias() += view(a) * view(b).transpose();
}

}  // namespace stnet::linalg
