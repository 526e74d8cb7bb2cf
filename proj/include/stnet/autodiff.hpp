#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stnet/error.hpp"
#include "stnet/linalg.hpp"
#include "stnet/tensor.hpp"

namespace stnet {

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Named, insertion-ordered collection of parameters.
///
/// Parameters live in a deque so that references handed to a tape stay valid
/// while more parameters are added.
class ParamStore {
 public:
  Parameter &add(std::string name, Tensor init) {
    if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    Tensor grad(init.shape());
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
    return params_.back();
  }

  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  Parameter &get(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
    return params_[it->second];
  }
  const Parameter &get(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
    return params_[it->second];
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter &operator[](std::size_t i) { return params_[i]; }
  const Parameter &operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto &p : params_) p.grad.fill(0.0);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto &p : params_) n += p.value.size();
    return n;
  }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

using NodeId = std::size_t;

enum class OpKind {
  Leaf,
  MatMul,
  Add,
  Sub,
  Hadamard,
  Relu,
  Sigmoid,
  Tanh,
  SoftmaxRows,
  ConcatCols,
  SliceCols,
  Transpose,
  SymNormalize,
  AddBias,
  TileRows,
  RepeatRows,
  BlockLeftMatMul,
  Sum,
  Scale,
  MseLoss,
};

struct TapeNode {
  OpKind op = OpKind::Leaf;
  std::vector<NodeId> inputs;
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  Parameter *param = nullptr;
  std::size_t arg0 = 0;
  std::size_t arg1 = 0;
  double scalar = 0.0;
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// D^{-1/2} A D^{-1/2} with D from row sums; zero-degree rows get a zero scale.
inline Tensor sym_normalize_value(const Tensor &a, bool add_self_loops, std::vector<double> *inv_sqrt_deg = nullptr) {
  const std::size_t n = a.rows();
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = add_self_loops ? 1.0 : 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    s[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Tensor out = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = a(i, j) + (add_self_loops && i == j ? 1.0 : 0.0);
      out(i, j) = (s[i] * s[j]) * v;
    }
  if (inv_sqrt_deg) *inv_sqrt_deg = std::move(s);
  return out;
}

}  // namespace detail

/// Define-by-run reverse-mode tape over dense matrices.
///
/// Every op appends a node whose inputs are strictly earlier nodes, so the node
/// order is a topological order and backward is a single reverse sweep.
class Tape {
 public:
  NodeId constant(Tensor value) { return push_leaf(std::move(value), false, nullptr); }
  /// Leaf that receives gradients but is not bound to a parameter.
  NodeId variable(Tensor value) { return push_leaf(std::move(value), true, nullptr); }
  NodeId param(Parameter &p) { return push_leaf(p.value, true, &p); }

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor &x = value(a), &y = value(b);
    if (x.cols() != y.rows()) {
      throw DimensionError("matmul inner dimensions disagree: " + shape_str(x.shape()) + " x " +
                           shape_str(y.shape()));
    }
    return push(OpKind::MatMul, {a, b}, linalg::matmul(x, y));
  }

  NodeId add(NodeId a, NodeId b) { return binary(OpKind::Add, a, b, "add", [](double x, double y) { return x + y; }); }
  NodeId sub(NodeId a, NodeId b) { return binary(OpKind::Sub, a, b, "sub", [](double x, double y) { return x - y; }); }
  NodeId hadamard(NodeId a, NodeId b) {
    return binary(OpKind::Hadamard, a, b, "hadamard", [](double x, double y) { return x * y; });
  }

  NodeId relu(NodeId a) { return unary(OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }
  NodeId sigmoid(NodeId a) { return unary(OpKind::Sigmoid, a, detail::sigmoid); }
  NodeId tanh(NodeId a) { return unary(OpKind::Tanh, a, [](double x) { return std::tanh(x); }); }

  NodeId softmax_rows(NodeId a) {
    const Tensor &x = value(a);
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
      double z = 0.0;
      for (std::size_t j = 0; j < x.cols(); ++j) {
        out(i, j) = std::exp(x(i, j) - mx);
        z += out(i, j);
      }
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= z;
    }
    return push(OpKind::SoftmaxRows, {a}, std::move(out));
  }

  NodeId concat_cols(NodeId a, NodeId b) {
    const Tensor &x = value(a), &y = value(b);
    if (x.rows() != y.rows()) {
      throw DimensionError("concat_cols row counts disagree: " + shape_str(x.shape()) + " and " +
                           shape_str(y.shape()));
    }
    const std::size_t p = x.cols(), q = y.cols();
    Tensor out = Tensor::zeros(x.rows(), p + q);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < p; ++j) out(i, j) = x(i, j);
      for (std::size_t j = 0; j < q; ++j) out(i, p + j) = y(i, j);
    }
    return push(OpKind::ConcatCols, {a, b}, std::move(out));
  }

  NodeId slice_cols(NodeId a, std::size_t start, std::size_t width) {
    const Tensor &x = value(a);
    if (start + width > x.cols()) {
      throw DimensionError("slice_cols [" + std::to_string(start) + ", " + std::to_string(start + width) +
                           ") exceeds " + shape_str(x.shape()));
    }
    Tensor out = Tensor::zeros(x.rows(), width);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < width; ++j) out(i, j) = x(i, start + j);
    const NodeId id = push(OpKind::SliceCols, {a}, std::move(out));
    nodes_[id].arg0 = start;
    return id;
  }

  NodeId transpose(NodeId a) { return push(OpKind::Transpose, {a}, value(a).transposed()); }

  /// D^{-1/2} (A [+ I]) D^{-1/2}, degree taken from row sums.
  NodeId sym_normalize(NodeId a, bool add_self_loops) {
    const Tensor &x = value(a);
    if (x.rows() != x.cols()) throw DimensionError("sym_normalize needs a square matrix, got " + shape_str(x.shape()));
    const NodeId id = push(OpKind::SymNormalize, {a}, detail::sym_normalize_value(x, add_self_loops));
    nodes_[id].arg0 = add_self_loops ? 1 : 0;
    return id;
  }

  /// x (m x n) + b (1 x n) broadcast over rows.
  NodeId add_bias(NodeId a, NodeId bias) {
    const Tensor &x = value(a), &b = value(bias);
    if (b.size() != x.cols()) {
      throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " does not match " + shape_str(x.shape()));
    }
    Tensor out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += b[j];
    return push(OpKind::AddBias, {a, bias}, std::move(out));
  }

  /// Stacks `times` copies of x vertically.
  NodeId tile_rows(NodeId a, std::size_t times) {
    const Tensor &x = value(a);
    Tensor out = Tensor::zeros(x.rows() * times, x.cols());
    for (std::size_t k = 0; k < times; ++k)
      std::copy(x.values().begin(), x.values().end(), out.data().begin() + static_cast<std::ptrdiff_t>(k * x.size()));
    const NodeId id = push(OpKind::TileRows, {a}, std::move(out));
    nodes_[id].arg0 = times;
    return id;
  }

  /// Repeats every row of x `times` times consecutively.
  NodeId repeat_rows(NodeId a, std::size_t times) {
    const Tensor &x = value(a);
    Tensor out = Tensor::zeros(x.rows() * times, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t k = 0; k < times; ++k)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i * times + k, j) = x(i, j);
    const NodeId id = push(OpKind::RepeatRows, {a}, std::move(out));
    nodes_[id].arg0 = times;
    return id;
  }

  /// Applies a (n x n) to each consecutive n-row block of h ((B*n) x d).
  NodeId block_left_matmul(NodeId a, NodeId h) {
    const Tensor &m = value(a), &x = value(h);
    const std::size_t n = m.rows();
    if (m.cols() != n || n == 0 || x.rows() % n != 0) {
      throw DimensionError("block_left_matmul: " + shape_str(m.shape()) + " cannot act on blocks of " +
                           shape_str(x.shape()));
    }
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    if (x.cols() > 0) {
      for (std::size_t b = 0; b < x.rows() / n; ++b)
        linalg::row_block(out, b * n, n).noalias() = linalg::view(m) * linalg::row_block(x, b * n, n);
    }
    return push(OpKind::BlockLeftMatMul, {a, h}, std::move(out));
  }

  NodeId sum(NodeId a) { return push(OpKind::Sum, {a}, Tensor::filled(1, 1, value(a).sum())); }

  NodeId scale(NodeId a, double s) {
    Tensor out = value(a);
    for (double &v : out.data()) v *= s;
    const NodeId id = push(OpKind::Scale, {a}, std::move(out));
    nodes_[id].scalar = s;
    return id;
  }

  /// (1/L) * sum of squared differences; L defaults to the row count of pred.
  NodeId mse_loss(NodeId pred, NodeId target, std::size_t sample_count = 0) {
    const Tensor &p = value(pred), &t = value(target);
    if (p.shape() != t.shape()) {
      throw DimensionError("mse_loss shapes disagree: " + shape_str(p.shape()) + " vs " + shape_str(t.shape()));
    }
    const std::size_t l = sample_count ? sample_count : p.rows();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
    const NodeId id = push(OpKind::MseLoss, {pred, target}, Tensor::filled(1, 1, acc / static_cast<double>(l)));
    nodes_[id].arg0 = l;
    return id;
  }

  const Tensor &value(NodeId id) const { return node(id).value; }
  const Tensor &grad(NodeId id) const { return node(id).grad; }
  const TapeNode &node(NodeId id) const {
    if (id >= nodes_.size()) throw ContractError("node id " + std::to_string(id) + " not on tape");
    return nodes_[id];
  }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar node.
  ///
  /// Leaf gradients (and bound parameter gradients) accumulate across calls;
  /// interior gradients hold the most recent sweep.
  void backward(NodeId loss) {
    const TapeNode &root = node(loss);
    if (root.value.size() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " + shape_str(root.value.shape()));
    }
    std::vector<Tensor> g(loss + 1);
    g[loss] = Tensor(root.value.shape(), 1.0);
    for (NodeId id = loss + 1; id-- > 0;) {
      TapeNode &nd = nodes_[id];
      if (!nd.requires_grad) continue;
      const bool reached = g[id].shape() == nd.value.shape();
      if (nd.op == OpKind::Leaf) {
        if (!reached) continue;
        nd.grad += g[id];
        if (nd.param) nd.param->grad += g[id];
        continue;
      }
      if (!reached) {
        nd.grad.fill(0.0);
        continue;
      }
      propagate(nd, g[id], g);
      nd.grad = std::move(g[id]);
    }
  }

 private:
  NodeId push_leaf(Tensor value, bool requires_grad, Parameter *param) {
    TapeNode nd;
    nd.op = OpKind::Leaf;
    nd.grad = Tensor(value.shape());
    nd.value = std::move(value);
    nd.requires_grad = requires_grad;
    nd.param = param;
    nodes_.push_back(std::move(nd));
    return nodes_.size() - 1;
  }

  NodeId push(OpKind op, std::vector<NodeId> inputs, Tensor value) {
    TapeNode nd;
    nd.op = op;
    for (NodeId in : inputs) nd.requires_grad = nd.requires_grad || nodes_[in].requires_grad;
    nd.inputs = std::move(inputs);
    nd.grad = Tensor(value.shape());
    nd.value = std::move(value);
    nodes_.push_back(std::move(nd));
    return nodes_.size() - 1;
  }

  template <typename F>
  NodeId unary(OpKind op, NodeId a, F f) {
    Tensor out = value(a);
    for (double &v : out.data()) v = f(v);
    return push(op, {a}, std::move(out));
  }

  template <typename F>
  NodeId binary(OpKind op, NodeId a, NodeId b, const char *name, F f) {
    const Tensor &x = value(a), &y = value(b);
    if (x.shape() != y.shape()) {
      throw DimensionError(std::string(name) + " shapes disagree: " + shape_str(x.shape()) + " vs " +
                           shape_str(y.shape()));
    }
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
    return push(op, {a, b}, std::move(out));
  }

  bool wants(NodeId id) const { return nodes_[id].requires_grad; }

  Tensor &slot(std::vector<Tensor> &g, NodeId id) {
    if (g[id].shape() != nodes_[id].value.shape()) g[id] = Tensor(nodes_[id].value.shape());
    return g[id];
  }

  void propagate(const TapeNode &nd, const Tensor &go, std::vector<Tensor> &g) {
    const auto in = [&](std::size_t k) { return nd.inputs[k]; };
    const auto val = [&](std::size_t k) -> const Tensor & { return nodes_[nd.inputs[k]].value; };
    switch (nd.op) {
      case OpKind::Leaf:
        break;
      case OpKind::MatMul:
        if (wants(in(0))) linalg::add_matmul_nt(slot(g, in(0)), go, val(1));
        if (wants(in(1))) linalg::add_matmul_tn(slot(g, in(1)), val(0), go);
        break;
      case OpKind::Add:
        if (wants(in(0))) slot(g, in(0)) += go;
        if (wants(in(1))) slot(g, in(1)) += go;
        break;
      case OpKind::Sub:
        if (wants(in(0))) slot(g, in(0)) += go;
        if (wants(in(1))) {
          Tensor &d = slot(g, in(1));
          for (std::size_t i = 0; i < go.size(); ++i) d[i] -= go[i];
        }
        break;
      case OpKind::Hadamard:
        for (std::size_t k = 0; k < 2; ++k) {
          if (!wants(in(k))) continue;
          Tensor &d = slot(g, in(k));
          const Tensor &other = val(1 - k);
          for (std::size_t i = 0; i < go.size(); ++i) d[i] += go[i] * other[i];
        }
        break;
      case OpKind::Relu:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          const Tensor &x = val(0);
          for (std::size_t i = 0; i < go.size(); ++i) d[i] += x[i] > 0.0 ? go[i] : 0.0;
        }
        break;
      case OpKind::Sigmoid:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < go.size(); ++i) d[i] += go[i] * nd.value[i] * (1.0 - nd.value[i]);
        }
        break;
      case OpKind::Tanh:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < go.size(); ++i) d[i] += go[i] * (1.0 - nd.value[i] * nd.value[i]);
        }
        break;
      case OpKind::SoftmaxRows:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          const Tensor &y = nd.value;
          for (std::size_t i = 0; i < y.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < y.cols(); ++j) dot += go(i, j) * y(i, j);
            for (std::size_t j = 0; j < y.cols(); ++j) d(i, j) += y(i, j) * (go(i, j) - dot);
          }
        }
        break;
      case OpKind::ConcatCols: {
        const std::size_t p = val(0).cols(), q = val(1).cols();
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < go.rows(); ++i)
            for (std::size_t j = 0; j < p; ++j) d(i, j) += go(i, j);
        }
        if (wants(in(1))) {
          Tensor &d = slot(g, in(1));
          for (std::size_t i = 0; i < go.rows(); ++i)
            for (std::size_t j = 0; j < q; ++j) d(i, j) += go(i, p + j);
        }
        break;
      }
      case OpKind::SliceCols:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < go.rows(); ++i)
            for (std::size_t j = 0; j < go.cols(); ++j) d(i, nd.arg0 + j) += go(i, j);
        }
        break;
      case OpKind::Transpose:
        if (wants(in(0))) slot(g, in(0)) += go.transposed();
        break;
      case OpKind::SymNormalize:
        if (wants(in(0))) {
          // B_ij = s_i A~_ij s_j with s_i = deg_i^{-1/2}, deg_i = sum_j A~_ij.
          const Tensor &a = val(0);
          const bool loops = nd.arg0 != 0;
          std::vector<double> s;
          detail::sym_normalize_value(a, loops, &s);
          const std::size_t n = a.rows();
          std::vector<double> ds(n, 0.0);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double at = a(i, j) + (loops && i == j ? 1.0 : 0.0);
              ds[i] += go(i, j) * at * s[j];
              ds[j] += go(i, j) * s[i] * at;
            }
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < n; ++i) {
            const double ddeg = s[i] > 0.0 ? -0.5 * s[i] * s[i] * s[i] * ds[i] : 0.0;
            for (std::size_t j = 0; j < n; ++j) d(i, j) += go(i, j) * s[i] * s[j] + ddeg;
          }
        }
        break;
      case OpKind::AddBias:
        if (wants(in(0))) slot(g, in(0)) += go;
        if (wants(in(1))) {
          Tensor &d = slot(g, in(1));
          for (std::size_t i = 0; i < go.rows(); ++i)
            for (std::size_t j = 0; j < go.cols(); ++j) d[j] += go(i, j);
        }
        break;
      case OpKind::TileRows:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          const std::size_t block = d.size();
          for (std::size_t k = 0; k < nd.arg0; ++k)
            for (std::size_t i = 0; i < block; ++i) d[i] += go[k * block + i];
        }
        break;
      case OpKind::RepeatRows:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < d.rows(); ++i)
            for (std::size_t k = 0; k < nd.arg0; ++k)
              for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) += go(i * nd.arg0 + k, j);
        }
        break;
      case OpKind::BlockLeftMatMul: {
        const Tensor &m = val(0), &x = val(1);
        const std::size_t n = m.rows();
        const std::size_t blocks = x.rows() / n;
        if (x.cols() == 0) break;
        if (wants(in(0))) {
          auto dm = linalg::view(slot(g, in(0)));
          for (std::size_t b = 0; b < blocks; ++b)
            dm.noalias() += linalg::row_block(go, b * n, n) * linalg::row_block(x, b * n, n).transpose();
        }
        if (wants(in(1))) {
          Tensor &dx = slot(g, in(1));
          for (std::size_t b = 0; b < blocks; ++b)
            linalg::row_block(dx, b * n, n).noalias() += linalg::view(m).transpose() * linalg::row_block(go, b * n, n);
        }
        break;
      }
      case OpKind::Sum:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[0];
        }
        break;
      case OpKind::Scale:
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i] * nd.scalar;
        }
        break;
      case OpKind::MseLoss: {
        const Tensor &p = val(0), &t = val(1);
        const double k = 2.0 * go[0] / static_cast<double>(nd.arg0);
        if (wants(in(0))) {
          Tensor &d = slot(g, in(0));
          for (std::size_t i = 0; i < p.size(); ++i) d[i] += k * (p[i] - t[i]);
        }
        if (wants(in(1))) {
          Tensor &d = slot(g, in(1));
          for (std::size_t i = 0; i < p.size(); ++i) d[i] -= k * (p[i] - t[i]);
        }
        break;
      }
    }
  }

  // Deque keeps references returned by value()/grad() valid as the tape grows.
  std::deque<TapeNode> nodes_;
};

}  // namespace stnet
