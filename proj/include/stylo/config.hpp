#pragma once

// Reader for the experiment config: the TOML subset of `[table]` /
// `[table.sub]` headers and `key = value` lines, where a value is a string
// ("basic" or 'literal'), integer, float, boolean, or a one-line array of
// those. `#` starts a comment outside strings. The result is a JSON object
// tree so settings can be looked up with defaults.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "stylo/error.hpp"
#include "stylo/experiments.hpp"

namespace stylo {

nlohmann::json parse_config(std::string_view text);

// Typed lookup of `section.key` with a default; wrong types are BadConfig.
template <typename T>
T config_get(const nlohmann::json& root, std::string_view section, std::string_view key, T fallback) {
  const nlohmann::json* node = &root;
  if (!section.empty()) {
    auto it = root.find(std::string(section));
    if (it == root.end()) return fallback;
    node = &*it;
  }
  auto it = node->find(std::string(key));
  if (it == node->end()) return fallback;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw Error(ErrorCode::BadConfig, "");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer() || (std::is_unsigned_v<T> && it->get<std::int64_t>() < 0)) {
        throw Error(ErrorCode::BadConfig, "");
      }
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw Error(ErrorCode::BadConfig, "");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw Error(ErrorCode::BadConfig, "");
    }
    return it->get<T>();
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadConfig, std::string(section.empty() ? "" : std::string(section) + ".") +
                                          std::string(key) + " has the wrong type");
  }
}

enum class ExperimentKind { Binary, Pairwise, Multiclass, LeaveOneOut, External };

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Binary;
  std::filesystem::path corpus;
  std::size_t max_sentences = 18;
  ExperimentSettings settings;
  std::string class_a, class_b;         // binary
  std::vector<std::string> classes;     // pairwise / multiclass; empty = all
  std::string held_out, human;          // leave-one-generator-out
  std::filesystem::path model_dir;      // external
  std::optional<std::string> as_class;  // external
  std::filesystem::path out_dir;
  bool save_models = false;
};

ExperimentKind parse_experiment_kind(const std::string& s);

FeatureConfig feature_config_from(const nlohmann::json& root);

ModelSettings model_settings_from(const nlohmann::json& root);

// Relative paths resolve against `base` (the config file's directory).
ExperimentConfig experiment_config_from(const nlohmann::json& root, const std::filesystem::path& base);

}  // namespace stylo
