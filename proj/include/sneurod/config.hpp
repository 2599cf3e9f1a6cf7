#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "sneurod/data.hpp"
#include "sneurod/model.hpp"
#include "sneurod/training.hpp"

namespace sneurod {

// JSON forms of the configuration structs. Readers reject unknown keys and
// keep defaults for absent ones; any problem raises ConfigError.

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct DataConfig {
  std::filesystem::path manifest;
  std::filesystem::path image_root;   // defaults to the manifest's directory
  std::optional<Plane> plane;         // empty keeps both planes
  std::optional<GammaSpec> gamma = GammaSpec{};  // empty disables correction
  std::uint64_t split_seed = 0;
  bool stratify = true;
  bool subject_grouped = false;

  SplitSpec split_spec() const;
};

/// Sections: data, model, train, output. Relative paths resolve against `base_dir`.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path output_dir = "run";
};

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace sneurod
