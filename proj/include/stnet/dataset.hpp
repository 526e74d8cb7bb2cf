#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/error.hpp"
#include "stnet/external_schema.hpp"
#include "stnet/graph.hpp"
#include "stnet/tensor.hpp"
#include "stnet/timeutil.hpp"

namespace stnet {

namespace fs = std::filesystem;

/// T x N x C observations with per-slot timestamps and external covariates.
struct SignalDataset {
  Tensor signals;                       // T x N x C
  std::vector<Timestamp> timestamps;    // T entries
  int interval_minutes = 5;
  std::vector<std::string> channel_names{"flow", "speed", "occupancy"};
  std::vector<std::string> node_ids;
  ExternalSchema external_schema = ExternalSchema::standard();
  Tensor externals;                     // T x external width, continuous columns unnormalized

  std::size_t slots() const { return signals.rank() == 3 ? signals.dim(0) : 0; }
  std::size_t nodes() const { return signals.rank() == 3 ? signals.dim(1) : 0; }
  std::size_t channels() const { return signals.rank() == 3 ? signals.dim(2) : 0; }

  /// Index of the prediction target channel ("flow", else channel 0).
  std::size_t flow_channel() const {
    const auto it = std::find(channel_names.begin(), channel_names.end(), "flow");
    return it == channel_names.end() ? 0 : static_cast<std::size_t>(it - channel_names.begin());
  }

  double at(std::size_t t, std::size_t n, std::size_t c) const {
    return signals[(t * nodes() + n) * channels() + c];
  }

  void validate() const {
    if (signals.rank() != 3) throw ValidationError("signals must be T x N x C, got " + shape_str(signals.shape()));
    const std::size_t t = slots(), n = nodes(), c = channels();
    if (t == 0 || n == 0 || c == 0) throw ValidationError("signals have an empty axis: " + shape_str(signals.shape()));
    if (!signals.all_finite()) throw ValidationError("signals contain NaN or Inf");
    if (timestamps.size() != t) {
      throw ValidationError("expected " + std::to_string(t) + " timestamps, got " + std::to_string(timestamps.size()));
    }
    if (interval_minutes <= 0) throw ValidationError("interval_minutes must be positive");
    const Timestamp stride = static_cast<Timestamp>(interval_minutes) * 60;
    for (std::size_t k = 1; k < t; ++k) {
      if (timestamps[k] - timestamps[k - 1] != stride) {
        throw ValidationError("timestamp " + std::to_string(k) + " (" + format_timestamp(timestamps[k]) +
                              ") breaks the " + std::to_string(interval_minutes) + "-minute stride");
      }
    }
    if (channel_names.size() != c) throw ValidationError("channel_names length does not match C");
    if (node_ids.size() != n) throw ValidationError("node_ids length does not match N");
    if (externals.rows() != t || externals.cols() != external_schema.width()) {
      throw ValidationError("externals " + shape_str(externals.shape()) + " do not match " + std::to_string(t) +
                            " slots x " + std::to_string(external_schema.width()) + " columns");
    }
  }
};

struct DatasetBundle {
  SignalDataset data;
  GraphSpec graph;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double &out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string join(const std::vector<std::string> &parts, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

inline void write_text(const fs::path &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << text;
  if (!os) throw ValidationError("failed writing " + path.string());
}

inline std::string read_text(const fs::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Little-endian float32 encoding of every value.
inline std::string encode_f32(std::span<const double> values) {
  std::string out(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(out.data() + 4 * i, &bits, 4);
  }
  return out;
}

inline std::vector<double> decode_f32(const std::string &bytes) {
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

}  // namespace detail

/// Writes the STGF directory: meta.json, signals.bin, edges.csv, externals.csv.
inline void save_dataset(const DatasetBundle &bundle, const fs::path &dir) {
  const SignalDataset &ds = bundle.data;
  ds.validate();
  bundle.graph.validate();
  if (bundle.graph.node_count != ds.nodes()) {
    throw ValidationError("graph has " + std::to_string(bundle.graph.node_count) + " nodes, signals have " +
                          std::to_string(ds.nodes()));
  }
  fs::create_directories(dir);

  nlohmann::ordered_json meta;
  meta["T"] = ds.slots();
  meta["N"] = ds.nodes();
  meta["C"] = ds.channels();
  meta["interval_minutes"] = ds.interval_minutes;
  meta["channel_names"] = ds.channel_names;
  meta["node_ids"] = ds.node_ids;
  meta["external_schema"] = nlohmann::json(ds.external_schema);
  meta["directed"] = bundle.graph.directed;
  detail::write_text(dir / "meta.json", meta.dump(2) + "\n");

  detail::write_text(dir / "signals.bin", detail::encode_f32(ds.signals.data()));

  std::string edges = "src,dst,distance\n";
  for (const Edge &e : bundle.graph.edges)
    edges += std::to_string(e.src) + "," + std::to_string(e.dst) + "," + detail::format_double(e.distance) + "\n";
  detail::write_text(dir / "edges.csv", edges);

  std::vector<std::string> header{"timestamp"};
  for (const auto &c : ds.external_schema.columns()) header.push_back(c);
  std::string ext = detail::join(header) + "\n";
  for (std::size_t t = 0; t < ds.slots(); ++t) {
    ext += format_timestamp(ds.timestamps[t]);
    for (std::size_t k = 0; k < ds.externals.cols(); ++k) ext += "," + detail::format_double(ds.externals(t, k));
    ext += "\n";
  }
  detail::write_text(dir / "externals.csv", ext);
}

/// Reads and validates an STGF directory.
inline DatasetBundle load_dataset(const fs::path &dir) {
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw LoadError(meta_path.string() + ": missing");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_text(meta_path));
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(meta_path.string() + ": " + e.what());
  }

  DatasetBundle bundle;
  SignalDataset &ds = bundle.data;
  std::size_t t = 0, n = 0, c = 0;
  try {
    t = meta.at("T").get<std::size_t>();
    n = meta.at("N").get<std::size_t>();
    c = meta.at("C").get<std::size_t>();
    ds.interval_minutes = meta.at("interval_minutes").get<int>();
    ds.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
    ds.node_ids = meta.at("node_ids").get<std::vector<std::string>>();
    ds.external_schema = meta.at("external_schema").get<ExternalSchema>();
    bundle.graph.directed = meta.value("directed", false);
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(meta_path.string() + ": " + e.what());
  } catch (const ValidationError &e) {
    throw LoadError(meta_path.string() + ": " + e.what());
  }
  if (t == 0 || n == 0 || c == 0) throw LoadError(meta_path.string() + ": T, N and C must be positive");
  if (ds.channel_names.size() != c) throw LoadError(meta_path.string() + ": channel_names has wrong length");
  if (ds.node_ids.size() != n) throw LoadError(meta_path.string() + ": node_ids has wrong length");

  const fs::path sig_path = dir / "signals.bin";
  if (!fs::exists(sig_path)) throw LoadError(sig_path.string() + ": missing");
  const std::string bytes = detail::read_text(sig_path);
  const std::size_t expected = t * n * c * 4;
  if (bytes.size() != expected) {
    throw LoadError(sig_path.string() + ": expected " + std::to_string(expected) + " bytes for T=" +
                    std::to_string(t) + " N=" + std::to_string(n) + " C=" + std::to_string(c) + ", found " +
                    std::to_string(bytes.size()) + " (mismatch at offset " +
                    std::to_string(std::min(bytes.size(), expected)) + ")");
  }
  ds.signals = Tensor({t, n, c}, detail::decode_f32(bytes));
  for (std::size_t i = 0; i < ds.signals.size(); ++i) {
    if (!std::isfinite(ds.signals[i])) {
      throw LoadError(sig_path.string() + ": non-finite value at byte offset " + std::to_string(4 * i));
    }
  }

  const fs::path edge_path = dir / "edges.csv";
  if (!fs::exists(edge_path)) throw LoadError(edge_path.string() + ": missing");
  {
    std::istringstream is(detail::read_text(edge_path));
    std::string line;
    std::size_t lineno = 0;
    bundle.graph.node_count = n;
    while (std::getline(is, line)) {
      ++lineno;
      if (lineno == 1) {
        if (detail::split_csv_line(line) != std::vector<std::string>{"src", "dst", "distance"}) {
          throw LoadError(edge_path.string() + ": line 1: header must be src,dst,distance");
        }
        continue;
      }
      if (line.empty() || line == "\r") continue;
      const auto f = detail::split_csv_line(line);
      double src = 0, dst = 0, dist = 0;
      if (f.size() != 3 || !detail::parse_double(f[0], src) || !detail::parse_double(f[1], dst) ||
          !detail::parse_double(f[2], dist) || src < 0 || dst < 0 || src != std::floor(src) || dst != std::floor(dst)) {
        throw LoadError(edge_path.string() + ": line " + std::to_string(lineno) + ": malformed edge '" + line + "'");
      }
      bundle.graph.edges.push_back({static_cast<std::size_t>(src), static_cast<std::size_t>(dst), dist});
    }
    try {
      bundle.graph.validate();
    } catch (const ValidationError &e) {
      throw LoadError(edge_path.string() + ": " + e.what());
    }
  }

  const fs::path ext_path = dir / "externals.csv";
  if (!fs::exists(ext_path)) throw LoadError(ext_path.string() + ": missing");
  {
    std::istringstream is(detail::read_text(ext_path));
    std::string line;
    std::vector<std::string> header{"timestamp"};
    for (const auto &col : ds.external_schema.columns()) header.push_back(col);
    const std::size_t width = ds.external_schema.width();
    if (!std::getline(is, line) || detail::split_csv_line(line) != header) {
      throw LoadError(ext_path.string() + ": line 1: header must be " + detail::join(header));
    }
    ds.externals = Tensor::zeros(t, width);
    std::size_t row = 0, lineno = 1;
    const Timestamp stride = static_cast<Timestamp>(ds.interval_minutes) * 60;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const auto f = detail::split_csv_line(line);
      const std::string where = ext_path.string() + ": line " + std::to_string(lineno);
      if (row >= t) throw LoadError(where + ": more rows than T=" + std::to_string(t));
      if (f.size() != width + 1) throw LoadError(where + ": expected " + std::to_string(width + 1) + " fields");
      const auto ts = parse_timestamp(f[0]);
      if (!ts) throw LoadError(where + ": bad timestamp '" + f[0] + "'");
      if (row > 0 && *ts <= ds.timestamps.back()) throw LoadError(where + ": timestamps not strictly increasing");
      if (row > 0 && *ts - ds.timestamps.back() != stride) {
        throw LoadError(where + ": timestamp stride differs from interval_minutes");
      }
      ds.timestamps.push_back(*ts);
      for (std::size_t k = 0; k < width; ++k) {
        double v = 0;
        if (!detail::parse_double(f[k + 1], v)) throw LoadError(where + ": bad number '" + f[k + 1] + "'");
        ds.externals(row, k) = v;
      }
      ++row;
    }
    if (row != t) throw LoadError(ext_path.string() + ": " + std::to_string(row) + " rows, meta says T=" + std::to_string(t));
  }

  try {
    ds.validate();
  } catch (const ValidationError &e) {
    throw LoadError(dir.string() + ": " + e.what());
  }
  return bundle;
}

/// Per-channel min/max (and per continuous external column) from the training range.
struct NormStats {
  std::vector<double> min;
  std::vector<double> max;
  std::vector<double> external_min;
  std::vector<double> external_max;

  friend bool operator==(const NormStats &, const NormStats &) = default;
};

inline void to_json(nlohmann::json &j, const NormStats &s) {
  j = {{"min", s.min}, {"max", s.max}, {"external_min", s.external_min}, {"external_max", s.external_max}};
}
inline void from_json(const nlohmann::json &j, NormStats &s) {
  s.min = j.at("min").get<std::vector<double>>();
  s.max = j.at("max").get<std::vector<double>>();
  s.external_min = j.at("external_min").get<std::vector<double>>();
  s.external_max = j.at("external_max").get<std::vector<double>>();
}

/// Fits stats on slots [slot_begin, slot_end) only.
inline NormStats minmax_fit(const SignalDataset &ds, std::size_t slot_begin, std::size_t slot_end) {
  if (slot_begin >= slot_end || slot_end > ds.slots()) {
    throw ValidationError("minmax_fit: slot range [" + std::to_string(slot_begin) + ", " + std::to_string(slot_end) +
                          ") is empty or exceeds T=" + std::to_string(ds.slots()));
  }
  const std::size_t c = ds.channels();
  NormStats s;
  s.min.assign(c, std::numeric_limits<double>::infinity());
  s.max.assign(c, -std::numeric_limits<double>::infinity());
  for (std::size_t t = slot_begin; t < slot_end; ++t)
    for (std::size_t n = 0; n < ds.nodes(); ++n)
      for (std::size_t k = 0; k < c; ++k) {
        const double v = ds.at(t, n, k);
        s.min[k] = std::min(s.min[k], v);
        s.max[k] = std::max(s.max[k], v);
      }
  const std::size_t off = ds.external_schema.continuous_offset();
  const std::size_t nc = ds.external_schema.continuous.size();
  s.external_min.assign(nc, std::numeric_limits<double>::infinity());
  s.external_max.assign(nc, -std::numeric_limits<double>::infinity());
  for (std::size_t t = slot_begin; t < slot_end; ++t)
    for (std::size_t k = 0; k < nc; ++k) {
      s.external_min[k] = std::min(s.external_min[k], ds.externals(t, off + k));
      s.external_max[k] = std::max(s.external_max[k], ds.externals(t, off + k));
    }
  return s;
}

/// (v - min) / (max - min) clamped to [0, 1]; a constant range maps to 0.
inline double minmax_scale(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

inline double minmax_apply(double v, const NormStats &s, std::size_t channel) {
  return minmax_scale(v, s.min.at(channel), s.max.at(channel));
}

/// Exact inverse on [min, max]; a constant range inverts to min.
inline double minmax_invert(double v, const NormStats &s, std::size_t channel) {
  const double lo = s.min.at(channel), hi = s.max.at(channel);
  if (!(hi > lo)) return lo;
  return lo + v * (hi - lo);
}

/// T x N x C tensor with every channel scaled by the stats.
inline Tensor minmax_apply(const Tensor &signals, const NormStats &s) {
  Tensor out = signals;
  const std::size_t c = signals.dim(2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = minmax_apply(out[i], s, i % c);
  return out;
}

/// One raw external row with its continuous columns scaled by the stats.
inline Tensor normalize_external_row(const SignalDataset &ds, std::size_t slot, const NormStats &s) {
  Tensor e({ds.externals.cols()});
  const std::size_t off = ds.external_schema.continuous_offset();
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double v = ds.externals(slot, k);
    e[k] = k < off ? v : minmax_scale(v, s.external_min.at(k - off), s.external_max.at(k - off));
  }
  return e;
}

struct WindowSample {
  std::size_t target_index = 0;
  Tensor x;       // P x N x C, normalized
  Tensor e;       // external row at the target slot
  Tensor y;       // N x 1 raw flow at the target slot
  Tensor y_norm;  // N x 1 normalized flow
};

/// Sliding windows over a dataset: sample k predicts slot P + k from slots [k, P + k).
///
/// Samples are materialized on demand so that long series do not need
/// T * P copies of the signal tensor.
class WindowSet {
 public:
  WindowSet(const SignalDataset &ds, const NormStats &stats, std::size_t window)
      : window_(window), nodes_(ds.nodes()), channels_(ds.channels()), flow_(ds.flow_channel()), stats_(stats) {
    if (window == 0) throw ValidationError("window length must be >= 1");
    if (ds.slots() <= window) {
      throw ValidationError("need more than " + std::to_string(window) + " slots to build windows, have " +
                            std::to_string(ds.slots()));
    }
    if (stats.min.size() != channels_) throw ValidationError("norm stats channel count does not match dataset");
    normalized_ = minmax_apply(ds.signals, stats);
    raw_flow_.resize(ds.slots() * nodes_);
    for (std::size_t t = 0; t < ds.slots(); ++t)
      for (std::size_t n = 0; n < nodes_; ++n) raw_flow_[t * nodes_ + n] = ds.at(t, n, flow_);
    timestamps_ = ds.timestamps;
    externals_.reserve(ds.slots());
    for (std::size_t t = 0; t < ds.slots(); ++t) externals_.push_back(normalize_external_row(ds, t, stats));
    count_ = ds.slots() - window;
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t target_index(std::size_t k) const { return window_ + k; }
  Timestamp target_timestamp(std::size_t k) const { return timestamps_.at(target_index(k)); }
  const NormStats &stats() const noexcept { return stats_; }
  std::size_t flow_channel() const noexcept { return flow_; }

  WindowSample sample(std::size_t k) const {
    if (k >= count_) throw ValidationError("window index " + std::to_string(k) + " out of range");
    WindowSample s;
    s.target_index = target_index(k);
    const std::size_t slot_size = nodes_ * channels_;
    std::vector<double> x(normalized_.data().begin() + static_cast<std::ptrdiff_t>(k * slot_size),
                          normalized_.data().begin() + static_cast<std::ptrdiff_t>((k + window_) * slot_size));
    s.x = Tensor({window_, nodes_, channels_}, std::move(x));
    s.e = externals_[s.target_index];
    s.y = Tensor::zeros(nodes_, 1);
    s.y_norm = Tensor::zeros(nodes_, 1);
    for (std::size_t n = 0; n < nodes_; ++n) {
      s.y[n] = raw_flow_[s.target_index * nodes_ + n];
      s.y_norm[n] = minmax_apply(s.y[n], stats_, flow_);
    }
    return s;
  }

 private:
  std::size_t window_, nodes_, channels_, flow_;
  NormStats stats_;
  Tensor normalized_;
  std::vector<double> raw_flow_;
  std::vector<Timestamp> timestamps_;
  std::vector<Tensor> externals_;
  std::size_t count_ = 0;
};

inline WindowSet make_windows(const SignalDataset &ds, const NormStats &stats, std::size_t window) {
  return WindowSet(ds, stats, window);
}

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t k) const { return k >= begin && k < end; }
};

struct SampleSplit {
  IndexRange train, val, test;
};

/// Share of samples used for training plus validation: 54 of 59 days.
inline constexpr double kTrainValShare = 54.0 / 59.0;
/// Chronological 90/10 split inside the training-plus-validation block.
inline constexpr double kDefaultTrainFraction = 0.9 * kTrainValShare;
inline constexpr double kDefaultValFraction = 0.1 * kTrainValShare;

/// Contiguous chronological partition of `count` samples; test takes the rest.
inline SampleSplit chronological_split(std::size_t count, double train_frac, double val_frac) {
  if (!(train_frac > 0) || !(val_frac > 0) || train_frac + val_frac > 1.0 + 1e-12) {
    throw ValidationError("split fractions must be positive and sum to at most 1");
  }
  const auto take = [count](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(count) + 1e-9));
  };
  const std::size_t n_train = take(train_frac);
  const std::size_t n_trainval = std::min(count, take(train_frac + val_frac));
  SampleSplit s{{0, n_train}, {n_train, n_trainval}, {n_trainval, count}};
  if (s.train.size() == 0 || s.val.size() == 0 || s.test.size() == 0) {
    throw ValidationError("split of " + std::to_string(count) + " samples leaves an empty partition (" +
                          std::to_string(s.train.size()) + "/" + std::to_string(s.val.size()) + "/" +
                          std::to_string(s.test.size()) + ")");
  }
  return s;
}

/// First slot after the training targets; stats must be fitted on [0, this).
inline std::size_t training_slot_end(const SampleSplit &split, std::size_t window) { return window + split.train.end; }

}  // namespace stnet
