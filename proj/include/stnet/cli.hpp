#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stnet/checkpoint.hpp"
#include "stnet/config.hpp"
#include "stnet/dataset.hpp"
#include "stnet/error.hpp"
#include "stnet/eval.hpp"
#include "stnet/synth.hpp"
#include "stnet/train.hpp"

namespace stnet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Output root for runs: $STGF_RUN_DIR, else ./runs.
inline fs::path run_root() {
  const char *env = std::getenv("STGF_RUN_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

/// Accepts either a checkpoint directory or a run directory containing `checkpoint/`.
inline fs::path resolve_checkpoint(const fs::path &p) {
  if (fs::exists(p / "manifest.json")) return p;
  if (fs::exists(p / "checkpoint" / "manifest.json")) return p / "checkpoint";
  throw LoadError(p.string() + ": no checkpoint manifest found");
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct SynthArgs {
  std::uint64_t seed = 7;
  std::size_t nodes = 10;
  std::size_t slots = 2016;
  std::string topology = "ring";
  std::string out;
  bool force = false;
};

inline int cmd_synth(const SynthArgs &a, std::ostream &out) {
  SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.nodes = a.nodes;
  cfg.slots = a.slots;
  cfg.topology = parse_topology(a.topology);
  cfg.validate();
  const fs::path dir(a.out);
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ValidationError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !a.force) {
    throw ValidationError(dir.string() + " is not empty; pass --force to overwrite");
  }
  const DatasetBundle b = synth_generate(cfg);
  save_dataset(b, dir);
  const ChannelCorrelation r = channel_correlation(b.data);
  out << "wrote " << dir.string() << ": T=" << b.data.slots() << " N=" << b.data.nodes() << " C=" << b.data.channels()
      << " edges=" << b.graph.edges.size() << " (" << a.topology << ")\n";
  out << "corr(flow, speed)     = " << fixed(r.flow_speed) << "\n";
  out << "corr(flow, occupancy) = " << fixed(r.flow_occupancy) << "\n";
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string ablation;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::vector<std::string> overrides;
  bool quiet = false;
};

/// Effective config: defaults, then the config file, then flags.
inline RunConfig resolve_run_config(const TrainArgs &a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::from_file(a.config);
  if (!a.data.empty()) cfg.data = a.data;
  if (!a.ablation.empty()) cfg.model.ablation = parse_ablation(a.ablation);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  for (const auto &o : a.overrides) cfg.set_override(o);
  if (cfg.data.empty()) throw ValidationError("no dataset given (--data or \"data\" in the config)");
  cfg.validate();
  return cfg;
}

inline int cmd_train(const TrainArgs &a, std::ostream &out) {
  const RunConfig cfg = resolve_run_config(a);
  const DatasetBundle data = load_dataset(cfg.data);
  const ModelConfig model = fit_to_dataset(cfg.model, data.data);
  const fs::path dir = a.out.empty() ? run_root() / (to_string(model.ablation) + "-seed" + std::to_string(cfg.train.seed))
                                     : fs::path(a.out);
  fs::create_directories(dir);
  detail::write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");

  const PreparedData prep(data, model.window, cfg.train.train_fraction, cfg.train.val_fraction);
  out << "training " << to_string(model.ablation) << " on " << cfg.data << ": " << prep.split.train.size() << "/"
      << prep.split.val.size() << "/" << prep.split.test.size() << " train/val/test samples, "
      << init_params(model, cfg.train.seed).scalar_count() << " parameters\n";

  std::string curve = "epoch,train_loss,val_loss\n";
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult res = train(prep, model, cfg.train, [&](const EpochRecord &r) {
    curve += std::to_string(r.epoch) + "," + detail::format_double(r.train_loss) + "," +
             detail::format_double(r.val_loss) + "\n";
    if (!a.quiet) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "epoch " << std::setw(3) << r.epoch << "  train " << fixed(r.train_loss, 6) << "  val "
          << fixed(r.val_loss, 6) << "  (" << fixed(secs, 1) << "s)\n"
          << std::flush;
    }
  });
  detail::write_text(dir / "loss_curve.csv", curve);
  save_checkpoint(Checkpoint{model, cfg.train, prep.stats, res.best_epoch, res.best_params}, dir / "checkpoint");
  out << "best epoch " << res.best_epoch << " (val loss " << fixed(res.best_val_loss, 6) << "); run written to "
      << dir.string() << "\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out;
};

inline IndexRange pick_split(const SampleSplit &s, const std::string &name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw ValidationError("unknown split '" + name + "' (expected train, val or test)");
}

/// Loads a checkpoint and dataset and checks they fit together.
struct Loaded {
  Checkpoint ck;
  DatasetBundle data;
  std::optional<PreparedData> prep;
  std::optional<Model> model;

  Loaded(const std::string &checkpoint, const std::string &dataset)
      : ck(load_checkpoint(resolve_checkpoint(checkpoint))), data(load_dataset(dataset)) {
    try {
      check_compatible(ck.model, data.data);
    } catch (const ValidationError &e) {
      throw ValidationError("checkpoint " + checkpoint + " does not fit dataset " + dataset + ": " + e.what());
    }
    prep.emplace(data, ck.model.window, ck.train.train_fraction, ck.train.val_fraction, &ck.stats);
    model.emplace(ck.model, prep->local_adjacency, ck.params);
  }
};

inline int cmd_eval(const EvalArgs &a, std::ostream &out) {
  Loaded l(a.checkpoint, a.data);
  const IndexRange range = pick_split(l.prep->split, a.split);
  const Evaluation ev = evaluate(*l.model, l.prep->windows, range);
  const Evaluation ha = ha_baseline(l.data.data, l.prep->fit_end, l.prep->windows, range);

  const fs::path dir = a.out.empty() ? resolve_checkpoint(a.checkpoint).parent_path() / ("eval-" + a.split) : fs::path(a.out);
  fs::create_directories(dir);
  nlohmann::ordered_json metrics;
  metrics["split"] = a.split;
  metrics["model"] = {{"name", to_string(l.ck.model.ablation)},
                      {"rmse", ev.metrics.rmse},
                      {"mae", ev.metrics.mae},
                      {"sample_count", ev.metrics.sample_count}};
  metrics["ha"] = {{"rmse", ha.metrics.rmse}, {"mae", ha.metrics.mae}, {"sample_count", ha.metrics.sample_count}};
  detail::write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  detail::write_text(dir / "predictions.csv", predictions_csv(ev, l.data.data.node_ids));

  out << "split " << a.split << ", " << range.size() << " samples x " << l.data.data.nodes() << " nodes\n";
  out << std::left << std::setw(22) << "method" << std::right << std::setw(12) << "RMSE" << std::setw(12) << "MAE"
      << "\n";
  out << std::left << std::setw(22) << "HA" << std::right << std::setw(12) << fixed(ha.metrics.rmse) << std::setw(12)
      << fixed(ha.metrics.mae) << "\n";
  out << std::left << std::setw(22) << ("MVC-STNet/" + to_string(l.ck.model.ablation)) << std::right << std::setw(12)
      << fixed(ev.metrics.rmse) << std::setw(12) << fixed(ev.metrics.mae) << "\n";
  out << "wrote " << (dir / "metrics.json").string() << " and " << (dir / "predictions.csv").string() << "\n";
  return kOk;
}

struct PredictArgs {
  std::string checkpoint;
  std::string data;
  std::string at;
};

inline int cmd_predict(const PredictArgs &a, std::ostream &out) {
  const auto ts = parse_timestamp(a.at);
  if (!ts) throw ValidationError("cannot parse timestamp '" + a.at + "' (expected YYYY-MM-DDTHH:MM)");
  Loaded l(a.checkpoint, a.data);
  const auto &stamps = l.data.data.timestamps;
  const auto it = std::find(stamps.begin(), stamps.end(), *ts);
  const std::size_t p = l.ck.model.window;
  if (it == stamps.end()) {
    throw ValidationError(a.at + " is not a slot of the dataset (" + format_timestamp(stamps.front()) + " .. " +
                          format_timestamp(stamps.back()) + ")");
  }
  const auto slot = static_cast<std::size_t>(it - stamps.begin());
  if (slot < p) throw ValidationError(a.at + " has fewer than " + std::to_string(p) + " preceding slots");
  const WindowSample s = l.prep->windows.sample(slot - p);
  const Tensor pred = l.model->predict(s.x, s.e);
  out << "node_id,y_pred,y_true\n";
  for (std::size_t v = 0; v < l.data.data.nodes(); ++v) {
    out << l.data.data.node_ids[v] << "," << fixed(minmax_invert(pred[v], l.ck.stats, l.prep->windows.flow_channel()))
        << "," << fixed(s.y[v]) << "\n";
  }
  return kOk;
}

struct InspectArgs {
  std::string data;
  std::string checkpoint;
};

inline int cmd_inspect(const InspectArgs &a, std::ostream &out) {
  if (a.data.empty() && a.checkpoint.empty()) throw ValidationError("inspect needs --data or --checkpoint");
  if (!a.data.empty()) {
    const DatasetBundle b = load_dataset(a.data);
    const SignalDataset &ds = b.data;
    out << "dataset " << a.data << "\n";
    out << "  signals  T=" << ds.slots() << " N=" << ds.nodes() << " C=" << ds.channels() << " every "
        << ds.interval_minutes << " min, " << format_timestamp(ds.timestamps.front()) << " .. "
        << format_timestamp(ds.timestamps.back()) << "\n";
    out << "  graph    " << b.graph.edges.size() << (b.graph.directed ? " directed" : " undirected") << " edges\n";
    out << "  external " << ds.external_schema.width() << " columns\n";
    const NormStats all = minmax_fit(ds, 0, ds.slots());
    for (std::size_t c = 0; c < ds.channels(); ++c) {
      double mean = 0;
      for (std::size_t t = 0; t < ds.slots(); ++t)
        for (std::size_t v = 0; v < ds.nodes(); ++v) mean += ds.at(t, v, c);
      mean /= static_cast<double>(ds.slots() * ds.nodes());
      out << "  " << std::left << std::setw(10) << ds.channel_names[c] << std::right << " min " << fixed(all.min[c])
          << "  max " << fixed(all.max[c]) << "  mean " << fixed(mean) << "\n";
    }
    const auto has = [&](const char *n) {
      return std::find(ds.channel_names.begin(), ds.channel_names.end(), n) != ds.channel_names.end();
    };
    if (has("flow") && has("speed") && has("occupancy")) {
      const ChannelCorrelation r = channel_correlation(ds);
      out << "  corr(flow, speed) " << fixed(r.flow_speed) << "  corr(flow, occupancy) " << fixed(r.flow_occupancy)
          << "\n";
    }
  }
  if (!a.checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(resolve_checkpoint(a.checkpoint));
    out << "checkpoint " << a.checkpoint << "\n";
    out << "  model    " << nlohmann::json(ck.model).dump() << "\n";
    out << "  train    " << nlohmann::json(ck.train).dump() << "\n";
    out << "  best epoch " << ck.best_epoch << "\n";
    for (const auto &p : ck.params) {
      out << "  " << std::left << std::setw(28) << p.name << std::right << std::setw(12) << shape_str(p.value.shape())
          << std::setw(10) << p.value.size() << "\n";
    }
    const Model m(ck.model, Tensor::zeros(ck.model.nodes, ck.model.nodes), ck.params);
    out << "  parameters " << ck.params.scalar_count() << " (" << m.active_parameter_count() << " used by "
        << to_string(ck.model.ablation) << ")\n";
  }
  return kOk;
}

/// Parses argv and dispatches; returns the process exit code.
inline int run(int argc, char **argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  CLI::App app{"Multi-view channel-wise spatio-temporal traffic forecaster"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto *synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  synth->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  synth->add_option("--nodes", sa.nodes, "Number of sensors (>= 2)")->capture_default_str();
  synth->add_option("--slots", sa.slots, "Number of 5-minute slots (>= 64)")->capture_default_str();
  synth->add_option("--topology", sa.topology, "ring, grid or random")->capture_default_str();
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_flag("--force", sa.force, "Overwrite a non-empty output directory");

  TrainArgs ta;
  auto *trn = app.add_subcommand("train", "Train a model and write a run directory");
  trn->add_option("--config", ta.config, "JSON config of dotted keys");
  trn->add_option("--data", ta.data, "Dataset directory");
  trn->add_option("--out", ta.out, "Run directory (default: $STGF_RUN_DIR/<ablation>-seed<seed>)");
  trn->add_option("--ablation", ta.ablation, "full, local-only, global-only, no-channelwise, local-no-channelwise");
  trn->add_option("--seed", ta.seed, "Override train.seed");
  trn->add_option("--epochs", ta.epochs, "Override train.epochs");
  trn->add_option("--set", ta.overrides, "Override any config key: key=value (repeatable)");
  trn->add_flag("--quiet", ta.quiet, "Do not print per-epoch progress");

  EvalArgs ea;
  auto *evl = app.add_subcommand("eval", "Evaluate a checkpoint against the HA baseline");
  evl->add_option("--checkpoint", ea.checkpoint, "Checkpoint or run directory")->required();
  evl->add_option("--data", ea.data, "Dataset directory")->required();
  evl->add_option("--split", ea.split, "train, val or test")->capture_default_str();
  evl->add_option("--out", ea.out, "Output directory (default: <run>/eval-<split>)");

  PredictArgs pa;
  auto *prd = app.add_subcommand("predict", "Predict every node's flow for one target slot");
  prd->add_option("--checkpoint", pa.checkpoint, "Checkpoint or run directory")->required();
  prd->add_option("--data", pa.data, "Dataset directory")->required();
  prd->add_option("--at", pa.at, "Target timestamp, YYYY-MM-DDTHH:MM")->required();

  InspectArgs ia;
  auto *ins = app.add_subcommand("inspect", "Print dataset shapes and stats or checkpoint parameters");
  ins->add_option("--data", ia.data, "Dataset directory");
  ins->add_option("--checkpoint", ia.checkpoint, "Checkpoint or run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(sa, out);
    if (*trn) {
      if (ta.data.empty() && ta.config.empty()) {
        err << "train: --data is required (directly or through --config)\n";
        return kUsage;
      }
      return cmd_train(ta, out);
    }
    if (*evl) return cmd_eval(ea, out);
    if (*prd) return cmd_predict(pa, out);
    if (*ins) return cmd_inspect(ia, out);
  } catch (const NumericalError &e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace stnet::cli
