#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/dataset.hpp"
#include "stnet/model.hpp"
#include "stnet/timeutil.hpp"
#include "stnet/train.hpp"

namespace stnet {

/// Errors in raw flow units, averaged over every (sample, node) entry.
struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t sample_count = 0;
};

inline void to_json(nlohmann::json &j, const Metrics &m) {
  j = {{"rmse", m.rmse}, {"mae", m.mae}, {"sample_count", m.sample_count}};
}

struct PredictionRow {
  Timestamp timestamp = 0;
  std::size_t node = 0;
  double y_true = 0.0;
  double y_pred = 0.0;
};

struct Evaluation {
  Metrics metrics;
  std::vector<PredictionRow> rows;
};

/// MAE and RMSE of `rows`; `samples` is recorded as the sample count.
inline Metrics compute_metrics(const std::vector<PredictionRow> &rows, std::size_t samples) {
  Metrics m;
  m.sample_count = samples;
  if (rows.empty()) return m;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (const auto &r : rows) {
    const double e = r.y_pred - r.y_true;
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const auto n = static_cast<double>(rows.size());
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  return m;
}

inline void check_window(const Model &model, const WindowSet &windows) {
  if (model.config().window != windows.window() || model.config().nodes != windows.nodes()) {
    throw ValidationError("model expects window " + std::to_string(model.config().window) + " over " +
                          std::to_string(model.config().nodes) + " nodes, samples have window " +
                          std::to_string(windows.window()) + " over " + std::to_string(windows.nodes()) + " nodes");
  }
}

/// Runs the model over a sample range and denormalizes its flow predictions.
inline Evaluation evaluate(Model &model, const WindowSet &windows, IndexRange range, std::size_t batch_size = 64) {
  check_window(model, windows);
  Evaluation ev;
  const std::size_t n = windows.nodes();
  const std::size_t flow = windows.flow_channel();
  std::vector<std::size_t> idx;
  for (std::size_t start = range.begin; start < range.end; start += batch_size) {
    idx.clear();
    for (std::size_t k = start; k < std::min(range.end, start + batch_size); ++k) idx.push_back(k);
    const Tensor pred = model.predict(gather_batch(windows, idx));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const WindowSample s = windows.sample(idx[b]);
      const Timestamp ts = windows.target_timestamp(idx[b]);
      for (std::size_t v = 0; v < n; ++v)
        ev.rows.push_back({ts, v, s.y[v], minmax_invert(pred[b * n + v], windows.stats(), flow)});
    }
  }
  ev.metrics = compute_metrics(ev.rows, range.size());
  return ev;
}

/// Time-of-day seasonal mean of the flow channel.
class HistoricalAverage {
 public:
  /// Fits on slots [slot_begin, slot_end).
  HistoricalAverage(const SignalDataset &ds, std::size_t slot_begin, std::size_t slot_end)
      : nodes_(ds.nodes()), interval_(ds.interval_minutes), per_day_(static_cast<std::size_t>(1440 / ds.interval_minutes)) {
    if (slot_begin >= slot_end || slot_end > ds.slots()) {
      throw ValidationError("historical average needs a non-empty training range");
    }
    const std::size_t flow = ds.flow_channel();
    sum_.assign(per_day_ * nodes_, 0.0);
    count_.assign(per_day_, 0);
    node_mean_.assign(nodes_, 0.0);
    for (std::size_t t = slot_begin; t < slot_end; ++t) {
      const std::size_t s = slot_of(ds.timestamps[t]);
      ++count_[s];
      for (std::size_t v = 0; v < nodes_; ++v) {
        sum_[s * nodes_ + v] += ds.at(t, v, flow);
        node_mean_[v] += ds.at(t, v, flow);
      }
    }
    for (double &m : node_mean_) m /= static_cast<double>(slot_end - slot_begin);
  }

  double predict(Timestamp ts, std::size_t node) const {
    const std::size_t s = slot_of(ts);
    if (count_[s] == 0) return node_mean_.at(node);
    return sum_[s * nodes_ + node] / static_cast<double>(count_[s]);
  }

 private:
  std::size_t slot_of(Timestamp ts) const {
    return static_cast<std::size_t>(minute_of_day(ts) / interval_) % per_day_;
  }

  std::size_t nodes_;
  int interval_;
  std::size_t per_day_;
  std::vector<double> sum_;
  std::vector<std::size_t> count_;
  std::vector<double> node_mean_;
};

/// HA fitted on training slots [0, fit_end) and scored on a sample range.
inline Evaluation ha_baseline(const SignalDataset &ds, std::size_t fit_end, const WindowSet &windows, IndexRange range) {
  const HistoricalAverage ha(ds, 0, fit_end);
  Evaluation ev;
  for (std::size_t k = range.begin; k < range.end; ++k) {
    const WindowSample s = windows.sample(k);
    const Timestamp ts = windows.target_timestamp(k);
    for (std::size_t v = 0; v < windows.nodes(); ++v) ev.rows.push_back({ts, v, s.y[v], ha.predict(ts, v)});
  }
  ev.metrics = compute_metrics(ev.rows, range.size());
  return ev;
}

inline std::string predictions_csv(const Evaluation &ev, const std::vector<std::string> &node_ids) {
  std::string out = "timestamp,node_id,y_true,y_pred\n";
  for (const auto &r : ev.rows) {
    out += format_timestamp(r.timestamp) + "," + node_ids.at(r.node) + "," + detail::format_double(r.y_true) + "," +
           detail::format_double(r.y_pred) + "\n";
  }
  return out;
}

}  // namespace stnet
