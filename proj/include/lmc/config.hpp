#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmc/data.hpp"
#include "lmc/encoders.hpp"
#include "lmc/training.hpp"

namespace lmc {

struct DataConfig {
  std::uint64_t seed = 0;
  int canvas = 64;
  int digits = 2;
  int glyph_size = 28;
  double speed_min = 2.0;
  double speed_max = 4.0;
  int length = 50;
  int train_count = 1000;
  int test_count = 100;

  data::MovingMnistOptions train_options() const;
  // Held-out set: same generator, independent seed.
  data::MovingMnistOptions test_options() const;
};

struct EvaluationConfig {
  int horizon = 30;          // frames predicted per test sequence
  int last = 10;             // extra "last L frames" aggregate; 0 disables
  int patterns = 3;          // motion directions for the alignment analysis
  int clips_per_pattern = 6;
  int short_frames = 10;     // short clip length for the alignment analysis
  int long_frames = 30;      // long clip length for the alignment analysis
  int strip_stride = 1;
};

// Relative paths resolve against the directory of the config file.
struct PathsConfig {
  std::filesystem::path dataset = "data/train.lmcd";
  std::filesystem::path test_dataset = "data/test.lmcd";
  std::filesystem::path checkpoints = "checkpoints";
  std::filesystem::path loss_log = "reports/loss.csv";
  std::filesystem::path reports = "reports";
};

struct RunConfig {
  DataConfig data;
  ArchitectureConfig architecture;
  TrainingConfig training;
  EvaluationConfig evaluation;
  PathsConfig paths;

  // Cross-field checks; throws ConfigError naming the field.
  void validate() const;
};

nlohmann::json to_json(const ArchitectureConfig& config);
ArchitectureConfig architecture_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& config);

// Strict parse: unknown keys and ill-typed values are ConfigErrors. Missing
// keys keep their defaults. Does not validate.
RunConfig run_config_from_json(const nlohmann::json& j);

using Environment = std::map<std::string, std::string>;

// Variables named SECTION__FIELD (e.g. TRAINING__LEARNING_RATE) override the
// matching key. Values are parsed as JSON, falling back to plain strings.
void apply_overrides(nlohmann::json& document, const Environment& env);

Environment process_environment();

// Reads, applies overrides, parses, resolves paths and validates.
RunConfig load_run_config(const std::filesystem::path& path, const Environment& env);

}  // namespace lmc
