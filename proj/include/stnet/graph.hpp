#pragma once

#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stnet/autodiff.hpp"
#include "stnet/error.hpp"
#include "stnet/rng.hpp"
#include "stnet/tensor.hpp"

namespace stnet {

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double distance = 1.0;
};

/// Road network: N sensors plus a weighted edge list.
struct GraphSpec {
  std::size_t node_count = 0;
  std::vector<Edge> edges;
  bool directed = false;

  void validate() const {
    if (node_count == 0) throw ValidationError("graph has no nodes");
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const Edge &e = edges[k];
      if (e.src >= node_count || e.dst >= node_count) {
        throw ValidationError("edge " + std::to_string(k) + " (" + std::to_string(e.src) + "->" +
                              std::to_string(e.dst) + ") references a node outside [0, " +
                              std::to_string(node_count) + ")");
      }
      if (e.src == e.dst) throw ValidationError("edge " + std::to_string(k) + " is a self-edge on node " + std::to_string(e.src));
      if (!(e.distance > 0.0) || !std::isfinite(e.distance)) {
        throw ValidationError("edge " + std::to_string(k) + " has non-positive distance " + std::to_string(e.distance));
      }
    }
  }
};

/// Geographic adjacency: 1/distance for connected pairs, zero elsewhere.
///
/// Undirected specs are mirrored. When the same pair is listed twice the later
/// entry wins and a warning is appended to `warnings` (or printed to stderr).
inline Tensor build_local_adjacency(const GraphSpec &spec, std::vector<std::string> *warnings = nullptr) {
  spec.validate();
  const std::size_t n = spec.node_count;
  Tensor a = Tensor::zeros(n, n);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  for (std::size_t k = 0; k < spec.edges.size(); ++k) {
    const Edge &e = spec.edges[k];
    auto key = spec.directed ? std::pair{e.src, e.dst} : std::pair{std::min(e.src, e.dst), std::max(e.src, e.dst)};
    if (auto it = seen.find(key); it != seen.end()) {
      const std::string msg = "duplicate edge " + std::to_string(e.src) + "-" + std::to_string(e.dst) +
                              " (entries " + std::to_string(it->second) + " and " + std::to_string(k) +
                              "); keeping the later one";
      if (warnings) {
        warnings->push_back(msg);
      } else {
        std::cerr << "warning: " << msg << '\n';
      }
      it->second = k;
    } else {
      seen.emplace(key, k);
    }
    a(e.src, e.dst) = 1.0 / e.distance;
    if (!spec.directed) a(e.dst, e.src) = 1.0 / e.distance;
  }
  return a;
}

/// D^{-1/2} A~ D^{-1/2} with A~ = A + I when `add_self_loops`, degree from row sums.
/// Zero-degree rows stay zero.
inline Tensor normalize_adjacency(const Tensor &a, bool add_self_loops) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw DimensionError("adjacency must be square, got " + shape_str(a.shape()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0.0) throw ValidationError("adjacency has a negative entry at flat index " + std::to_string(i));
  }
  return detail::sym_normalize_value(a, add_self_loops);
}

/// softmax_rows(relu(E E^T)) recorded on the tape so gradients reach E.
inline NodeId adaptive_adjacency(Tape &tape, NodeId embedding) {
  return tape.softmax_rows(tape.relu(tape.matmul(embedding, tape.transpose(embedding))));
}

/// Value-only convenience wrapper.
inline Tensor adaptive_adjacency(const Tensor &embedding) {
  Tape tape;
  return tape.value(adaptive_adjacency(tape, tape.constant(embedding)));
}

/// Node embedding initialised i.i.d. uniform(-1/sqrt(d_e), 1/sqrt(d_e)).
inline Tensor init_node_embedding(std::size_t nodes, std::size_t embed_dim, Rng &rng) {
  if (embed_dim == 0) throw ValidationError("embedding dimension must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  Tensor e = Tensor::zeros(nodes, embed_dim);
  for (double &v : e.data()) v = rng.uniform(-bound, bound);
  return e;
}

}  // namespace stnet
