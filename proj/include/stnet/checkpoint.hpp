#pragma once

#include <filesystem>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "stnet/dataset.hpp"
#include "stnet/error.hpp"
#include "stnet/model.hpp"
#include "stnet/train.hpp"

namespace stnet {

inline constexpr const char *kCheckpointFormat = "stnet-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// Trained parameters plus everything needed to reuse them on a dataset.
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  NormStats stats;
  std::size_t best_epoch = 0;
  ParamStore params;
};

/// Writes `manifest.json` and `params.bin` (little-endian float32, parameters back to back).
inline void save_checkpoint(const Checkpoint &ck, const fs::path &dir) {
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["version"] = kCheckpointVersion;
  manifest["seed"] = ck.train.seed;
  manifest["best_epoch"] = ck.best_epoch;
  manifest["model_config"] = nlohmann::json(ck.model);
  manifest["train_config"] = nlohmann::json(ck.train);
  manifest["norm_stats"] = nlohmann::json(ck.stats);
  std::string blob;
  manifest["params"] = nlohmann::json::array();
  for (const auto &p : ck.params) {
    manifest["params"].push_back(
        {{"name", p.name}, {"shape", p.value.shape()}, {"offset", blob.size()}, {"count", p.value.size()}});
    blob += detail::encode_f32(p.value.data());
  }
  manifest["blob_bytes"] = blob.size();
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  detail::write_text(dir / "params.bin", blob);
}

inline Checkpoint load_checkpoint(const fs::path &dir) {
  const fs::path mpath = dir / "manifest.json", bpath = dir / "params.bin";
  if (!fs::exists(mpath)) throw LoadError(mpath.string() + ": missing");
  if (!fs::exists(bpath)) throw LoadError(bpath.string() + ": missing");
  Checkpoint ck;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_text(mpath));
    if (manifest.value("format", std::string{}) != kCheckpointFormat || manifest.value("version", -1) != kCheckpointVersion) {
      throw LoadError(mpath.string() + ": unknown checkpoint version tag (expected " + kCheckpointFormat + " v" +
                      std::to_string(kCheckpointVersion) + ")");
    }
    ck.model = manifest.at("model_config").get<ModelConfig>();
    ck.train = manifest.at("train_config").get<TrainConfig>();
    ck.stats = manifest.at("norm_stats").get<NormStats>();
    ck.best_epoch = manifest.at("best_epoch").get<std::size_t>();
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(mpath.string() + ": " + e.what());
  } catch (const ValidationError &e) {
    throw LoadError(mpath.string() + ": " + e.what());
  }

  const std::string blob = detail::read_text(bpath);
  std::size_t declared = 0;
  try {
    declared = manifest.at("blob_bytes").get<std::size_t>();
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(mpath.string() + ": " + e.what());
  }
  if (blob.size() != declared) {
    throw LoadError(bpath.string() + ": " + std::to_string(blob.size()) + " bytes, manifest declares " +
                    std::to_string(declared));
  }

  // The manifest must describe exactly the parameters this config creates.
  ck.params = init_params(ck.model, ck.train.seed);
  std::set<std::string> seen;
  std::size_t expected_offset = 0;
  try {
    for (const auto &entry : manifest.at("params")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto count = entry.at("count").get<std::size_t>();
      if (!ck.params.contains(name)) throw LoadError(mpath.string() + ": unexpected parameter '" + name + "'");
      Parameter &p = ck.params.get(name);
      if (shape != p.value.shape() || count != p.value.size()) {
        throw LoadError(mpath.string() + ": parameter '" + name + "' has shape " + shape_str(shape) + ", config implies " +
                        shape_str(p.value.shape()));
      }
      if (offset != expected_offset || offset + 4 * count > blob.size()) {
        throw LoadError(bpath.string() + ": parameter '" + name + "' at offset " + std::to_string(offset) +
                        " does not fit the blob layout");
      }
      const auto values = detail::decode_f32(blob.substr(offset, 4 * count));
      std::copy(values.begin(), values.end(), p.value.data().begin());
      seen.insert(name);
      expected_offset += 4 * count;
    }
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(mpath.string() + ": " + e.what());
  }
  if (expected_offset != blob.size()) throw LoadError(bpath.string() + ": trailing bytes after the last parameter");
  for (const auto &p : ck.params)
    if (!seen.count(p.name)) throw LoadError(mpath.string() + ": parameter '" + p.name + "' missing");
  return ck;
}

}  // namespace stnet
