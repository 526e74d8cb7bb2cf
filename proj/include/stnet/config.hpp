#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "stnet/dataset.hpp"
#include "stnet/error.hpp"
#include "stnet/model.hpp"
#include "stnet/train.hpp"

namespace stnet {

/// Everything a training run needs, serialized as one flat object of dotted keys.
///
/// Node count, channel count and the external schema are not configurable:
/// they always come from the dataset.
struct RunConfig {
  std::string data;
  ModelConfig model;
  TrainConfig train;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["data"] = data;
    j["model.window"] = model.window;
    j["model.gcn_dims"] = model.gcn_dims;
    j["model.lstm_layers"] = model.lstm_layers;
    j["model.lstm_hidden"] = model.lstm_hidden;
    j["model.embed_dim"] = model.embed_dim;
    j["model.external_embed_dim"] = model.external_embed_dim;
    j["model.external_hidden"] = model.external_hidden;
    j["model.ablation"] = to_string(model.ablation);
    j["train.epochs"] = train.epochs;
    j["train.batch_size"] = train.batch_size;
    j["train.learning_rate"] = train.learning_rate;
    j["train.beta1"] = train.beta1;
    j["train.beta2"] = train.beta2;
    j["train.epsilon"] = train.epsilon;
    j["train.clip_norm"] = train.clip_norm;
    j["train.seed"] = train.seed;
    j["train.train_fraction"] = train.train_fraction;
    j["train.val_fraction"] = train.val_fraction;
    return j;
  }

  /// Sets one key; unknown keys and ill-typed values raise ValidationError.
  void set(const std::string &key, const nlohmann::json &value) {
    const auto &table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ValidationError("unknown config key '" + key + "'");
    try {
      it->second(*this, value);
    } catch (const nlohmann::json::exception &) {
      throw ValidationError("config key '" + key + "' cannot take value " + value.dump());
    } catch (const BadValue &) {
      throw ValidationError("config key '" + key + "' cannot take value " + value.dump());
    }
  }

  /// Applies `key=value`. The value is read as JSON when possible, else as a plain string;
  /// `model.gcn_dims` also accepts a comma-separated list.
  void set_override(const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    if (key == "model.gcn_dims" && (value.is_string() || value.is_number())) {
      nlohmann::json dims = nlohmann::json::array();
      std::stringstream ss(value.is_string() ? value.get<std::string>() : value.dump());
      for (std::string part; std::getline(ss, part, ',');) {
        const auto d = nlohmann::json::parse(part, nullptr, false);
        if (d.is_discarded()) throw ValidationError("model.gcn_dims: cannot parse '" + part + "'");
        dims.push_back(d);
      }
      value = dims;
    }
    set(key, value);
  }

  /// Merges a JSON object of dotted keys.
  void merge(const nlohmann::json &j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object of dotted keys");
    for (const auto &[k, v] : j.items()) set(k, v);
  }

  static RunConfig from_file(const std::filesystem::path &path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_text(path));
    } catch (const nlohmann::json::exception &e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
    RunConfig cfg;
    cfg.merge(j);
    return cfg;
  }

  void validate() const {
    model.validate();
    train.validate();
  }

 private:
  struct BadValue {};
  using Setter = std::function<void(RunConfig &, const nlohmann::json &)>;

  template <class T>
  static T checked(const nlohmann::json &v) {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw BadValue{};
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw BadValue{};
    }
    return v.get<T>();
  }

  static const std::map<std::string, Setter> &setters() {
    static const std::map<std::string, Setter> table = {
        {"data", [](RunConfig &c, const nlohmann::json &v) { c.data = v.get<std::string>(); }},
        {"model.window", [](RunConfig &c, const nlohmann::json &v) { c.model.window = checked<std::size_t>(v); }},
        {"model.gcn_dims",
         [](RunConfig &c, const nlohmann::json &v) {
           if (!v.is_array()) throw BadValue{};
           std::vector<std::size_t> dims;
           for (const auto &d : v) dims.push_back(checked<std::size_t>(d));
           c.model.gcn_dims = dims;
         }},
        {"model.lstm_layers", [](RunConfig &c, const nlohmann::json &v) { c.model.lstm_layers = checked<std::size_t>(v); }},
        {"model.lstm_hidden", [](RunConfig &c, const nlohmann::json &v) { c.model.lstm_hidden = checked<std::size_t>(v); }},
        {"model.embed_dim", [](RunConfig &c, const nlohmann::json &v) { c.model.embed_dim = checked<std::size_t>(v); }},
        {"model.external_embed_dim",
         [](RunConfig &c, const nlohmann::json &v) { c.model.external_embed_dim = checked<std::size_t>(v); }},
        {"model.external_hidden",
         [](RunConfig &c, const nlohmann::json &v) { c.model.external_hidden = checked<std::size_t>(v); }},
        {"model.ablation",
         [](RunConfig &c, const nlohmann::json &v) { c.model.ablation = parse_ablation(v.get<std::string>()); }},
        {"train.epochs", [](RunConfig &c, const nlohmann::json &v) { c.train.epochs = checked<std::size_t>(v); }},
        {"train.batch_size", [](RunConfig &c, const nlohmann::json &v) { c.train.batch_size = checked<std::size_t>(v); }},
        {"train.learning_rate", [](RunConfig &c, const nlohmann::json &v) { c.train.learning_rate = checked<double>(v); }},
        {"train.beta1", [](RunConfig &c, const nlohmann::json &v) { c.train.beta1 = checked<double>(v); }},
        {"train.beta2", [](RunConfig &c, const nlohmann::json &v) { c.train.beta2 = checked<double>(v); }},
        {"train.epsilon", [](RunConfig &c, const nlohmann::json &v) { c.train.epsilon = checked<double>(v); }},
        {"train.clip_norm", [](RunConfig &c, const nlohmann::json &v) { c.train.clip_norm = checked<double>(v); }},
        {"train.seed", [](RunConfig &c, const nlohmann::json &v) { c.train.seed = checked<std::uint64_t>(v); }},
        {"train.train_fraction",
         [](RunConfig &c, const nlohmann::json &v) { c.train.train_fraction = checked<double>(v); }},
        {"train.val_fraction", [](RunConfig &c, const nlohmann::json &v) { c.train.val_fraction = checked<double>(v); }},
    };
    return table;
  }
};

}  // namespace stnet
