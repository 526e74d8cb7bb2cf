#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/autodiff.hpp"
#include "stnet/error.hpp"
#include "stnet/external_schema.hpp"
#include "stnet/graph.hpp"
#include "stnet/rng.hpp"
#include "stnet/tensor.hpp"

namespace stnet {

/// Which spatial branches run and whether channels are convolved separately.
enum class Ablation {
  Full,                // both views, channel-wise GCN (MVC-STNet)
  LocalOnly,           // geographic view only (CGCN-STNet)
  GlobalOnly,          // learned view only
  NoChannelwise,       // both views, one GCN over all channels (MV-STNet)
  LocalNoChannelwise,  // geographic view, one GCN over all channels (GCN-STNet)
};

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::LocalOnly: return "local-only";
    case Ablation::GlobalOnly: return "global-only";
    case Ablation::NoChannelwise: return "no-channelwise";
    case Ablation::LocalNoChannelwise: return "local-no-channelwise";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string &s) {
  for (Ablation a : {Ablation::Full, Ablation::LocalOnly, Ablation::GlobalOnly, Ablation::NoChannelwise,
                     Ablation::LocalNoChannelwise}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown ablation '" + s +
                        "' (expected full|local-only|global-only|no-channelwise|local-no-channelwise)");
}

enum class View { Local, Global };

inline const char *view_name(View v) { return v == View::Local ? "local" : "global"; }

struct ModelConfig {
  std::size_t nodes = 307;
  std::size_t channels = 3;
  std::size_t window = 3;
  std::vector<std::size_t> gcn_dims{16, 32, 64};
  std::size_t lstm_layers = 2;
  std::size_t lstm_hidden = 256;
  std::size_t embed_dim = 10;
  ExternalSchema external = ExternalSchema::standard();
  std::size_t external_embed_dim = 4;
  std::size_t external_hidden = 16;
  Ablation ablation = Ablation::Full;

  bool uses_local() const { return ablation != Ablation::GlobalOnly; }
  bool uses_global() const { return ablation != Ablation::LocalOnly && ablation != Ablation::LocalNoChannelwise; }
  bool channelwise() const {
    return ablation != Ablation::NoChannelwise && ablation != Ablation::LocalNoChannelwise;
  }
  std::size_t feature_dim() const { return gcn_dims.back(); }

  void validate() const {
    auto positive = [](std::size_t v, const char *what) {
      if (v == 0) throw ValidationError(std::string("model config: ") + what + " must be >= 1");
    };
    positive(nodes, "nodes");
    positive(channels, "channels");
    positive(window, "window");
    positive(lstm_layers, "lstm_layers");
    positive(lstm_hidden, "lstm_hidden");
    positive(embed_dim, "embed_dim");
    positive(external_hidden, "external_hidden");
    if (!external.categorical.empty()) positive(external_embed_dim, "external_embed_dim");
    if (gcn_dims.empty()) throw ValidationError("model config: gcn_dims must be non-empty");
    for (auto d : gcn_dims) positive(d, "every gcn dim");
  }

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

inline void to_json(nlohmann::json &j, const ModelConfig &c) {
  j = {{"nodes", c.nodes},
       {"channels", c.channels},
       {"window", c.window},
       {"gcn_dims", c.gcn_dims},
       {"lstm_layers", c.lstm_layers},
       {"lstm_hidden", c.lstm_hidden},
       {"embed_dim", c.embed_dim},
       {"external", c.external},
       {"external_embed_dim", c.external_embed_dim},
       {"external_hidden", c.external_hidden},
       {"ablation", to_string(c.ablation)}};
}

inline void from_json(const nlohmann::json &j, ModelConfig &c) {
  c.nodes = j.at("nodes").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.gcn_dims = j.at("gcn_dims").get<std::vector<std::size_t>>();
  c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
  c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.external = j.at("external").get<ExternalSchema>();
  c.external_embed_dim = j.at("external_embed_dim").get<std::size_t>();
  c.external_hidden = j.at("external_hidden").get<std::size_t>();
  c.ablation = parse_ablation(j.at("ablation").get<std::string>());
}

namespace param_names {
inline std::string gcn(View v, std::size_t layer) {
  return std::string("gcn.") + view_name(v) + "." + std::to_string(layer) + ".weight";
}
inline std::string fusion(View v, std::size_t channel) {
  return std::string("fusion.") + view_name(v) + "." + std::to_string(channel);
}
inline const std::string node_embedding = "embedding.nodes";
inline std::string lstm(std::size_t layer, const char *what) { return "lstm." + std::to_string(layer) + "." + what; }
inline std::string external_table(std::size_t slot) { return "external.embed." + std::to_string(slot); }
inline const std::string external_weight = "external.dense.weight";
inline const std::string external_bias = "external.dense.bias";
inline const std::string head_weight = "head.weight";
inline const std::string head_bias = "head.bias";
}  // namespace param_names

namespace detail {
inline Tensor uniform_init(Rng &rng, std::size_t rows, std::size_t cols, double bound) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double &v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}
inline double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }
}  // namespace detail

/// Creates every parameter for `config` in a fixed order.
///
/// Parameters of both views are always present, whatever the ablation, so that
/// all variants draw identical initial values for the parts they share.
inline ParamStore init_params(const ModelConfig &config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore ps;
  const std::size_t n = config.nodes;
  const std::size_t f = config.feature_dim();
  for (View v : {View::Local, View::Global}) {
    std::size_t in = config.channelwise() ? 1 : config.channels;
    for (std::size_t l = 0; l < config.gcn_dims.size(); ++l) {
      const std::size_t out = config.gcn_dims[l];
      ps.add(param_names::gcn(v, l), detail::uniform_init(rng, in, out, detail::fan_in_bound(in)));
      in = out;
    }
    if (config.channelwise()) {
      for (std::size_t c = 0; c < config.channels; ++c)
        ps.add(param_names::fusion(v, c), Tensor::filled(n, f, 1.0 / static_cast<double>(config.channels)));
    }
  }
  ps.add(param_names::node_embedding, init_node_embedding(n, config.embed_dim, rng));

  const std::size_t hid = config.lstm_hidden;
  std::size_t in = f;
  for (std::size_t l = 0; l < config.lstm_layers; ++l) {
    const double bound = detail::fan_in_bound(hid + in);
    for (const char *gate : {"W_f", "W_i", "W_c", "W_o"})
      ps.add(param_names::lstm(l, gate), detail::uniform_init(rng, hid + in, hid, bound));
    ps.add(param_names::lstm(l, "b_f"), Tensor::ones(1, hid));
    for (const char *gate : {"b_i", "b_c", "b_o"}) ps.add(param_names::lstm(l, gate), Tensor::zeros(1, hid));
    in = hid;
  }

  std::size_t ext_in = config.external.continuous.size();
  for (std::size_t s = 0; s < config.external.categorical.size(); ++s) {
    ps.add(param_names::external_table(s),
           detail::uniform_init(rng, config.external.categorical[s].levels.size(), config.external_embed_dim,
                                detail::fan_in_bound(config.external_embed_dim)));
    ext_in += config.external_embed_dim;
  }
  ps.add(param_names::external_weight,
         detail::uniform_init(rng, ext_in, config.external_hidden, detail::fan_in_bound(std::max<std::size_t>(ext_in, 1))));
  ps.add(param_names::external_bias, Tensor::zeros(1, config.external_hidden));

  const std::size_t head_in = hid + config.external_hidden;
  ps.add(param_names::head_weight, detail::uniform_init(rng, head_in, 1, detail::fan_in_bound(head_in)));
  ps.add(param_names::head_bias, Tensor::zeros(1, 1));
  return ps;
}

/// A mini-batch of B windows laid out for the tape: each time step holds the
/// B node-feature matrices stacked vertically, (B*N) x C.
struct Batch {
  std::size_t size = 0;
  std::vector<Tensor> steps;
  Tensor externals;  // B x external width
};

/// Stacks P x N x C windows and their external vectors into a Batch.
inline Batch make_batch(std::span<const Tensor *const> windows, std::span<const Tensor *const> externals) {
  if (windows.empty() || windows.size() != externals.size()) {
    throw DimensionError("make_batch: need matching non-empty window and external lists");
  }
  const Tensor &first = *windows.front();
  if (first.rank() != 3) throw DimensionError("make_batch: window must be P x N x C, got " + shape_str(first.shape()));
  const std::size_t p = first.dim(0), n = first.dim(1), c = first.dim(2);
  const std::size_t e = externals.front()->size();
  Batch batch;
  batch.size = windows.size();
  batch.steps.assign(p, Tensor::zeros(batch.size * n, c));
  batch.externals = Tensor::zeros(batch.size, e);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const Tensor &w = *windows[b];
    if (w.shape() != first.shape()) {
      throw DimensionError("make_batch: window " + std::to_string(b) + " has shape " + shape_str(w.shape()) +
                           ", expected " + shape_str(first.shape()));
    }
    if (externals[b]->size() != e) throw DimensionError("make_batch: external vectors differ in width");
    for (std::size_t t = 0; t < p; ++t)
      std::copy_n(w.data().begin() + static_cast<std::ptrdiff_t>(t * n * c), n * c,
                  batch.steps[t].data().begin() + static_cast<std::ptrdiff_t>(b * n * c));
    std::copy_n(externals[b]->data().begin(), e, batch.externals.data().begin() + static_cast<std::ptrdiff_t>(b * e));
  }
  return batch;
}

inline Batch make_batch(const Tensor &window, const Tensor &external) {
  const Tensor *w = &window;
  const Tensor *e = &external;
  return make_batch(std::span<const Tensor *const>(&w, 1), std::span<const Tensor *const>(&e, 1));
}

/// sum_i W_i (.) h_i. `weights` may be tiled to the batch height already.
inline NodeId channel_fuse(Tape &tape, std::span<const NodeId> hs, std::span<const NodeId> weights) {
  if (hs.empty() || hs.size() != weights.size()) {
    throw DimensionError("channel_fuse: got " + std::to_string(hs.size()) + " channel outputs and " +
                         std::to_string(weights.size()) + " fusion matrices");
  }
  NodeId acc = tape.hadamard(weights[0], hs[0]);
  for (std::size_t i = 1; i < hs.size(); ++i) acc = tape.add(acc, tape.hadamard(weights[i], hs[i]));
  return acc;
}

/// H_g + H_s; a missing view (ablation) passes the other through.
inline NodeId multiview_fuse(Tape &tape, std::optional<NodeId> local, std::optional<NodeId> global) {
  if (local && global) return tape.add(*local, *global);
  if (local) return *local;
  if (global) return *global;
  throw ContractError("multiview_fuse: both views disabled");
}

/// Stacked GCN on (B*N) x C features over one pre-normalized adjacency.
///
/// Channel-wise mode runs the shared layer stack on every N x 1 channel slice
/// and fuses the outputs with the view's fusion matrices. Joint mode runs the
/// stack once on all channels.
inline NodeId cgcn_forward(Tape &tape, NodeId x, NodeId adjacency, ParamStore &params, const ModelConfig &config,
                           View view) {
  const Tensor &xv = tape.value(x);
  const std::size_t n = tape.value(adjacency).rows();
  if (xv.cols() != config.channels) {
    throw DimensionError(std::string("cgcn_forward[") + view_name(view) + "]: input has " +
                         std::to_string(xv.cols()) + " channels, config expects " + std::to_string(config.channels));
  }
  if (n == 0 || xv.rows() % n != 0) {
    throw DimensionError(std::string("cgcn_forward[") + view_name(view) + "]: " + std::to_string(xv.rows()) +
                         " rows is not a multiple of " + std::to_string(n) + " nodes");
  }
  const std::size_t batch = xv.rows() / n;

  auto stack = [&](NodeId h) {
    for (std::size_t l = 0; l < config.gcn_dims.size(); ++l) {
      const NodeId w = tape.param(params.get(param_names::gcn(view, l)));
      h = tape.relu(tape.matmul(tape.block_left_matmul(adjacency, h), w));
    }
    return h;
  };

  if (!config.channelwise()) return stack(x);

  std::vector<NodeId> hs, ws;
  for (std::size_t c = 0; c < config.channels; ++c) {
    hs.push_back(stack(tape.slice_cols(x, c, 1)));
    NodeId w = tape.param(params.get(param_names::fusion(view, c)));
    ws.push_back(batch == 1 ? w : tape.tile_rows(w, batch));
  }
  return channel_fuse(tape, hs, ws);
}

struct LstmState {
  NodeId h;
  NodeId c;
};

/// One LSTM step applied row-wise; every row (node) shares the gate parameters.
/// The gate input is [h_prev, x] as a column concatenation.
inline LstmState lstm_cell(Tape &tape, NodeId x, LstmState prev, ParamStore &params, std::size_t layer) {
  const NodeId hx = tape.concat_cols(prev.h, x);
  auto gate = [&](const char *w, const char *b) {
    const Parameter &wp = params.get(param_names::lstm(layer, w));
    if (wp.value.rows() != tape.value(hx).cols()) {
      throw DimensionError("lstm_cell[layer " + std::to_string(layer) + "]: [h, x] has width " +
                           std::to_string(tape.value(hx).cols()) + ", gate weight " + shape_str(wp.value.shape()));
    }
    return tape.add_bias(tape.matmul(hx, tape.param(params.get(param_names::lstm(layer, w)))),
                         tape.param(params.get(param_names::lstm(layer, b))));
  };
  const NodeId f = tape.sigmoid(gate("W_f", "b_f"));
  const NodeId i = tape.sigmoid(gate("W_i", "b_i"));
  const NodeId g = tape.tanh(gate("W_c", "b_c"));
  const NodeId c = tape.add(tape.hadamard(f, prev.c), tape.hadamard(i, g));
  const NodeId o = tape.sigmoid(gate("W_o", "b_o"));
  const NodeId h = tape.hadamard(o, tape.tanh(c));
  return {h, c};
}

/// Encodes B x width raw external rows into B x external_hidden.
///
/// Each categorical block must be a one-hot row; multiplying it by the slot's
/// table is the embedding lookup. Continuous columns are appended as-is, then
/// one dense layer with ReLU.
inline NodeId external_encode(Tape &tape, NodeId raw, ParamStore &params, const ModelConfig &config) {
  const ExternalSchema &schema = config.external;
  const Tensor &rv = tape.value(raw);
  if (rv.cols() != schema.width()) {
    throw DimensionError("external_encode: raw vector has width " + std::to_string(rv.cols()) + ", schema expects " +
                         std::to_string(schema.width()));
  }
  std::optional<NodeId> features;
  auto append = [&](NodeId part) { features = features ? tape.concat_cols(*features, part) : part; };

  std::size_t offset = 0;
  for (std::size_t s = 0; s < schema.categorical.size(); ++s) {
    const std::size_t levels = schema.categorical[s].levels.size();
    for (std::size_t r = 0; r < rv.rows(); ++r) {
      std::size_t hot = 0;
      for (std::size_t k = 0; k < levels; ++k) {
        const double v = rv(r, offset + k);
        if (v == 1.0) {
          ++hot;
        } else if (v != 0.0) {
          hot = 2;
          break;
        }
      }
      if (hot != 1) {
        throw ValidationError("external_encode: categorical slot '" + schema.categorical[s].name + "' in row " +
                              std::to_string(r) + " is not a valid index into its " + std::to_string(levels) +
                              "-entry table");
      }
    }
    const NodeId onehot = tape.slice_cols(raw, offset, levels);
    append(tape.matmul(onehot, tape.param(params.get(param_names::external_table(s)))));
    offset += levels;
  }
  if (!schema.continuous.empty()) append(tape.slice_cols(raw, offset, schema.continuous.size()));
  if (!features) features = tape.constant(Tensor::zeros(rv.rows(), 0));

  const NodeId dense = tape.add_bias(tape.matmul(*features, tape.param(params.get(param_names::external_weight))),
                                     tape.param(params.get(param_names::external_bias)));
  return tape.relu(dense);
}

/// Node ids captured during a forward pass, for inspection in tests.
struct ForwardTrace {
  std::vector<NodeId> hidden;  // every h^t of every layer
  std::optional<NodeId> local_adjacency;
  std::optional<NodeId> global_adjacency;
};

/// MVC-STNet forward over a batch; returns (B*N) x 1 normalized predictions.
inline NodeId model_forward(Tape &tape, const Batch &batch, ParamStore &params, const ModelConfig &config,
                            const Tensor &local_adjacency_norm, ForwardTrace *trace = nullptr) {
  const std::size_t n = config.nodes;
  if (batch.steps.size() != config.window) {
    throw DimensionError("model_forward[input]: window has " + std::to_string(batch.steps.size()) +
                         " steps, config expects " + std::to_string(config.window));
  }
  for (const Tensor &step : batch.steps) {
    if (step.rows() != batch.size * n || step.cols() != config.channels) {
      throw DimensionError("model_forward[input]: step slice " + shape_str(step.shape()) + " does not match " +
                           std::to_string(batch.size) + " x " + std::to_string(n) + " nodes x " +
                           std::to_string(config.channels) + " channels");
    }
  }
  if (batch.externals.rows() != batch.size || batch.externals.cols() != config.external.width()) {
    throw DimensionError("model_forward[external]: externals " + shape_str(batch.externals.shape()) + ", expected " +
                         std::to_string(batch.size) + " x " + std::to_string(config.external.width()));
  }

  std::optional<NodeId> a_local, a_global;
  if (config.uses_local()) {
    if (local_adjacency_norm.rows() != n || local_adjacency_norm.cols() != n) {
      throw DimensionError("model_forward[local graph]: adjacency " + shape_str(local_adjacency_norm.shape()) +
                           " for " + std::to_string(n) + " nodes");
    }
    a_local = tape.constant(local_adjacency_norm);
  }
  if (config.uses_global()) {
    const NodeId emb = tape.param(params.get(param_names::node_embedding));
    if (tape.value(emb).rows() != n) {
      throw DimensionError("model_forward[global graph]: node embedding " + shape_str(tape.value(emb).shape()) +
                           " for " + std::to_string(n) + " nodes");
    }
    a_global = tape.sym_normalize(adaptive_adjacency(tape, emb), false);
  }
  if (trace) {
    trace->local_adjacency = a_local;
    trace->global_adjacency = a_global;
  }

  const std::size_t rows = batch.size * n;
  std::vector<LstmState> state(config.lstm_layers);
  for (auto &s : state) {
    s.h = tape.constant(Tensor::zeros(rows, config.lstm_hidden));
    s.c = tape.constant(Tensor::zeros(rows, config.lstm_hidden));
  }

  for (std::size_t t = 0; t < config.window; ++t) {
    const NodeId x = tape.constant(batch.steps[t]);
    std::optional<NodeId> hg, hs;
    if (a_local) hg = cgcn_forward(tape, x, *a_local, params, config, View::Local);
    if (a_global) hs = cgcn_forward(tape, x, *a_global, params, config, View::Global);
    NodeId input = multiview_fuse(tape, hg, hs);
    for (std::size_t l = 0; l < config.lstm_layers; ++l) {
      state[l] = lstm_cell(tape, input, state[l], params, l);
      if (trace) trace->hidden.push_back(state[l].h);
      input = state[l].h;
    }
  }

  const NodeId e = external_encode(tape, tape.constant(batch.externals), params, config);
  const NodeId joined = tape.concat_cols(state.back().h, n == 1 ? e : tape.repeat_rows(e, n));
  return tape.add_bias(tape.matmul(joined, tape.param(params.get(param_names::head_weight))),
                       tape.param(params.get(param_names::head_bias)));
}

/// Configuration, parameters and the fixed geographic adjacency bundled together.
class Model {
 public:
  Model(ModelConfig config, const Tensor &local_adjacency, std::uint64_t seed)
      : Model(config, local_adjacency, init_params(config, seed)) {}

  Model(ModelConfig config, const Tensor &local_adjacency, ParamStore params)
      : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    if (local_adjacency.rows() != config_.nodes || local_adjacency.cols() != config_.nodes) {
      throw DimensionError("model: local adjacency " + shape_str(local_adjacency.shape()) + " for " +
                           std::to_string(config_.nodes) + " nodes");
    }
    local_norm_ = normalize_adjacency(local_adjacency, true);
  }

  const ModelConfig &config() const noexcept { return config_; }
  ParamStore &params() noexcept { return params_; }
  const ParamStore &params() const noexcept { return params_; }
  const Tensor &local_adjacency_norm() const noexcept { return local_norm_; }

  NodeId forward(Tape &tape, const Batch &batch, ForwardTrace *trace = nullptr) {
    return model_forward(tape, batch, params_, config_, local_norm_, trace);
  }

  /// (B*N) x 1 normalized predictions.
  Tensor predict(const Batch &batch) {
    Tape tape;
    return tape.value(forward(tape, batch));
  }

  /// N x 1 prediction for one P x N x C window.
  Tensor predict(const Tensor &window, const Tensor &external) { return predict(make_batch(window, external)); }

  /// Scalars in parameters the current ablation actually uses.
  std::size_t active_parameter_count() const {
    std::size_t count = 0;
    for (const auto &p : params_) {
      const bool local = p.name.find(".local.") != std::string::npos;
      const bool global = p.name.find(".global.") != std::string::npos || p.name == param_names::node_embedding;
      if ((local && !config_.uses_local()) || (global && !config_.uses_global())) continue;
      count += p.value.size();
    }
    return count;
  }

 private:
  ModelConfig config_;
  ParamStore params_;
  Tensor local_norm_;
};

}  // namespace stnet
