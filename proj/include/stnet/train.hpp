#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/autodiff.hpp"
#include "stnet/dataset.hpp"
#include "stnet/error.hpp"
#include "stnet/graph.hpp"
#include "stnet/model.hpp"
#include "stnet/rng.hpp"

namespace stnet {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
  std::uint64_t seed = 42;
  double train_fraction = kDefaultTrainFraction;
  double val_fraction = kDefaultValFraction;

  void validate() const {
    if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    // lr = 0 is allowed as a frozen-optimizer diagnostic; negative is not.
    if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
      throw ValidationError("train config: learning_rate must be finite and >= 0");
    }
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
      throw ValidationError("train config: betas must lie in [0, 1)");
    }
    if (!(epsilon > 0)) throw ValidationError("train config: epsilon must be > 0");
    if (!std::isfinite(clip_norm)) throw ValidationError("train config: clip_norm must be finite");
  }

  friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

inline void to_json(nlohmann::json &j, const TrainConfig &c) {
  j = {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"beta1", c.beta1},           {"beta2", c.beta2},           {"epsilon", c.epsilon},
       {"clip_norm", c.clip_norm},   {"seed", c.seed},             {"train_fraction", c.train_fraction},
       {"val_fraction", c.val_fraction}};
}

inline void from_json(const nlohmann::json &j, TrainConfig &c) {
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.val_fraction = j.at("val_fraction").get<double>();
}

/// First and second moment estimates, one pair per parameter.
struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update from the gradients stored on each parameter.
inline void adam_step(ParamStore &params, AdamState &state, const TrainConfig &cfg) {
  if (state.m.empty()) {
    for (const auto &p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");
  for (const auto &p : params) {
    if (!p.grad.all_finite()) throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter &p = params[k];
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    auto w = p.value.data();
    auto g = p.grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      w[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`. Returns the norm before clipping.
inline double clip_grad_norm(ParamStore &params, double max_norm) {
  double sq = 0.0;
  for (const auto &p : params)
    for (double g : p.grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto &p : params)
      for (double &g : p.grad.data()) g *= s;
  }
  return norm;
}

/// Throws ValidationError naming both sides when a model config cannot run on a dataset.
inline void check_compatible(const ModelConfig &cfg, const SignalDataset &ds) {
  if (cfg.nodes != ds.nodes() || cfg.channels != ds.channels()) {
    throw ValidationError("model expects N=" + std::to_string(cfg.nodes) + " C=" + std::to_string(cfg.channels) +
                          " but dataset has N=" + std::to_string(ds.nodes()) + " C=" + std::to_string(ds.channels()));
  }
  if (!(cfg.external == ds.external_schema)) {
    throw ValidationError("model external schema (" + std::to_string(cfg.external.width()) +
                          " columns) differs from dataset schema (" + std::to_string(ds.external_schema.width()) +
                          " columns)");
  }
}

/// Copies the dataset geometry (N, C, external schema) into a model config.
inline ModelConfig fit_to_dataset(ModelConfig cfg, const SignalDataset &ds) {
  cfg.nodes = ds.nodes();
  cfg.channels = ds.channels();
  cfg.external = ds.external_schema;
  return cfg;
}

/// Everything derived from a dataset before training: split, stats, windows and the geographic graph.
struct PreparedData {
  SampleSplit split;
  std::size_t fit_end;  // stats and HA only see slots [0, fit_end)
  NormStats stats;
  WindowSet windows;
  Tensor local_adjacency;

  /// Fits fresh stats on the training range unless `fixed` is given (e.g. from a checkpoint).
  PreparedData(const DatasetBundle &data, std::size_t window, double train_fraction, double val_fraction,
               const NormStats *fixed = nullptr)
      : split(split_for(data.data, window, train_fraction, val_fraction)),
        fit_end(training_slot_end(split, window)),
        stats(fixed ? *fixed : minmax_fit(data.data, 0, fit_end)),
        windows(data.data, stats, window),
        local_adjacency(build_local_adjacency(data.graph)) {}

 private:
  static SampleSplit split_for(const SignalDataset &ds, std::size_t window, double tf, double vf) {
    ds.validate();
    if (ds.slots() <= window) {
      throw ValidationError("need more than " + std::to_string(window) + " slots to build windows, have " +
                            std::to_string(ds.slots()));
    }
    return chronological_split(ds.slots() - window, tf, vf);
  }
};

/// Stacks window samples into a batch; optionally returns the (B*N) x 1 normalized targets.
inline Batch gather_batch(const WindowSet &windows, std::span<const std::size_t> indices, Tensor *targets = nullptr) {
  std::vector<WindowSample> samples;
  samples.reserve(indices.size());
  for (std::size_t k : indices) samples.push_back(windows.sample(k));
  std::vector<const Tensor *> xs, es;
  for (const auto &s : samples) {
    xs.push_back(&s.x);
    es.push_back(&s.e);
  }
  if (targets) {
    const std::size_t n = windows.nodes();
    *targets = Tensor::zeros(indices.size() * n, 1);
    for (std::size_t b = 0; b < samples.size(); ++b)
      for (std::size_t v = 0; v < n; ++v) (*targets)[b * n + v] = samples[b].y_norm[v];
  }
  return make_batch(xs, es);
}

/// Squared L2 error of each sample in a (B*N) x 1 prediction.
inline std::vector<double> per_sample_loss(const Tensor &pred, const Tensor &target, std::size_t nodes) {
  std::vector<double> out(pred.size() / nodes, 0.0);
  for (std::size_t b = 0; b < out.size(); ++b)
    for (std::size_t v = 0; v < nodes; ++v) {
      const double d = pred[b * nodes + v] - target[b * nodes + v];
      out[b] += d * d;
    }
  return out;
}

/// Mean per-sample loss over a sample range without touching gradients.
inline double mean_loss(Model &model, const WindowSet &windows, IndexRange range, std::size_t batch_size) {
  if (range.size() == 0) return 0.0;
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = range.begin; start < range.end; start += batch_size) {
    idx.clear();
    for (std::size_t k = start; k < std::min(range.end, start + batch_size); ++k) idx.push_back(k);
    Tensor target;
    const Batch batch = gather_batch(windows, idx, &target);
    for (double l : per_sample_loss(model.predict(batch), target, windows.nodes())) total += l;
  }
  return total / static_cast<double>(range.size());
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ParamStore best_params;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> curve;
};

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Mini-batch training with a seeded per-epoch shuffle; keeps the parameters with the lowest validation loss.
///
/// The epoch training loss is the mean per-sample loss observed while the
/// epoch runs (each sample is scored just before the update it contributes to).
inline TrainResult train(const PreparedData &prep, const ModelConfig &model_cfg, const TrainConfig &cfg,
                         const EpochCallback &on_epoch = {}) {
  cfg.validate();
  model_cfg.validate();
  if (model_cfg.window != prep.windows.window()) throw ValidationError("model window differs from prepared windows");
  Model model(model_cfg, prep.local_adjacency, cfg.seed);
  Rng shuffle_rng(cfg.seed ^ 0x5bd1e995u);
  AdamState adam;

  std::vector<std::size_t> order(prep.split.train.size());
  std::iota(order.begin(), order.end(), prep.split.train.begin);
  std::vector<double> sample_loss(order.size());
  const std::size_t nodes = prep.windows.nodes();

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      Tensor target;
      const Batch batch = gather_batch(prep.windows, idx, &target);
      Tape tape;
      const NodeId pred = model.forward(tape, batch);
      const NodeId loss = tape.mse_loss(pred, tape.constant(target), idx.size());
      if (!std::isfinite(tape.value(loss)[0])) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no));
      }
      const auto losses = per_sample_loss(tape.value(pred), target, nodes);
      for (std::size_t b = 0; b < idx.size(); ++b) sample_loss[idx[b] - prep.split.train.begin] = losses[b];

      model.params().zero_grad();
      tape.backward(loss);
      clip_grad_norm(model.params(), cfg.clip_norm);
      try {
        adam_step(model.params(), adam, cfg);
      } catch (const NumericalError &e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no));
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    for (double l : sample_loss) rec.train_loss += l;
    rec.train_loss /= static_cast<double>(sample_loss.size());
    rec.val_loss = mean_loss(model, prep.windows, prep.split.val, std::max<std::size_t>(cfg.batch_size, 64));
    if (!std::isfinite(rec.val_loss)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    result.curve.push_back(rec);
    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.best_params = model.params();
    }
    if (on_epoch) on_epoch(rec);
  }
  result.best_params.zero_grad();
  return result;
}

}  // namespace stnet
