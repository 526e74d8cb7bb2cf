#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/error.hpp"

namespace stnet {

/// Column layout of the per-slot external covariates.
///
/// The raw vector is every categorical slot one-hot encoded in order, followed
/// by the continuous values.
struct ExternalSchema {
  struct Categorical {
    std::string name;
    std::vector<std::string> levels;
    friend bool operator==(const Categorical &, const Categorical &) = default;
  };

  std::vector<Categorical> categorical;
  std::vector<std::string> continuous;

  /// Calendar day type, coarse weather category and temperature.
  static ExternalSchema standard() {
    return ExternalSchema{{{"day_type", {"weekday", "weekend", "holiday"}},
                           {"weather", {"clear", "rain", "snow", "other"}}},
                          {"temperature"}};
  }

  std::size_t width() const {
    std::size_t w = continuous.size();
    for (const auto &c : categorical) w += c.levels.size();
    return w;
  }

  std::size_t continuous_offset() const { return width() - continuous.size(); }

  /// Flat column names in raw-vector order.
  std::vector<std::string> columns() const {
    std::vector<std::string> out;
    for (const auto &c : categorical)
      for (const auto &l : c.levels) out.push_back(l);
    out.insert(out.end(), continuous.begin(), continuous.end());
    return out;
  }

  friend bool operator==(const ExternalSchema &, const ExternalSchema &) = default;
};

inline void to_json(nlohmann::json &j, const ExternalSchema &s) {
  j = nlohmann::json::object();
  j["categorical"] = nlohmann::json::array();
  for (const auto &c : s.categorical) j["categorical"].push_back({{"name", c.name}, {"levels", c.levels}});
  j["continuous"] = s.continuous;
}

inline void from_json(const nlohmann::json &j, ExternalSchema &s) {
  s = ExternalSchema{};
  for (const auto &c : j.at("categorical")) {
    ExternalSchema::Categorical cat{c.at("name").get<std::string>(), c.at("levels").get<std::vector<std::string>>()};
    if (cat.levels.empty()) throw ValidationError("categorical external '" + cat.name + "' has no levels");
    s.categorical.push_back(std::move(cat));
  }
  s.continuous = j.at("continuous").get<std::vector<std::string>>();
}

}  // namespace stnet
