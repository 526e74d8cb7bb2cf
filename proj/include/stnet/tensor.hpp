#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stnet/error.hpp"

namespace stnet {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles with shape metadata.
///
/// Rank-2 is the working rank of the autodiff tape; higher ranks appear only in
/// the data pipeline (T x N x C signals, P x N x C windows). A rank-1 tensor of
/// length n behaves as a 1 x n row wherever a matrix is expected.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    cache_matrix_view();
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
    }
    cache_matrix_view();
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor ones(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}, 1.0); }
  static Tensor filled(std::size_t rows, std::size_t cols, double v) { return Tensor({rows, cols}, v); }

  static Tensor identity(std::size_t n) {
    Tensor t = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  /// Builds a matrix from nested rows, e.g. `Tensor::matrix({{1, 2}, {3, 4}})`.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto &row : rows) {
      if (row.size() != n) throw DimensionError("ragged rows in Tensor::matrix");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({m, n}, std::move(data));
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  const Shape &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  /// Rows when viewed as a matrix.
  std::size_t rows() const noexcept { return rows_; }
  /// Columns when viewed as a matrix (product of all trailing axes).
  std::size_t cols() const noexcept { return cols_; }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double> &values() const noexcept { return data_; }

  /// Slice along the leading axis; the result has the remaining axes.
  Tensor slice0(std::size_t index) const {
    if (shape_.size() < 2) throw DimensionError("slice0 needs rank >= 2, got " + shape_str(shape_));
    if (index >= shape_[0]) {
      throw DimensionError("slice0 index " + std::to_string(index) + " out of range for " + shape_str(shape_));
    }
    Shape sub(shape_.begin() + 1, shape_.end());
    const std::size_t stride = shape_numel(sub);
    std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(index * stride),
                            data_.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
    return Tensor(std::move(sub), std::move(out));
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  Tensor transposed() const {
    const std::size_t m = rows(), n = cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out(j, i) = (*this)(i, j);
    return out;
  }

  bool same_shape(const Tensor &other) const noexcept { return shape_ == other.shape_; }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double sum() const noexcept {
    double acc = 0.0;
    for (double v : data_) acc += v;
    return acc;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor &operator+=(const Tensor &other) {
    if (other.size() != size()) {
      throw DimensionError("+= between " + shape_str(shape_) + " and " + shape_str(other.shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void cache_matrix_view() {
    if (shape_.size() < 2) {
      rows_ = 1;
      cols_ = shape_.empty() ? 1 : shape_[0];
    } else {
      rows_ = shape_[0];
      cols_ = shape_numel(Shape(shape_.begin() + 1, shape_.end()));
    }
  }

  Shape shape_;
  std::vector<double> data_;
  std::size_t rows_ = 1;
  std::size_t cols_ = 0;
};

inline std::ostream &operator<<(std::ostream &os, const Tensor &t) {
  os << "Tensor" << shape_str(t.shape()) << '{';
  for (std::size_t i = 0; i < t.size() && i < 16; ++i) os << (i ? ", " : "") << t[i];
  if (t.size() > 16) os << ", ...";
  return os << '}';
}

/// Largest absolute entry-wise difference; shapes must agree.
inline double max_abs_diff(const Tensor &a, const Tensor &b) {
  if (a.size() != b.size()) {
    throw DimensionError("max_abs_diff between " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace stnet
