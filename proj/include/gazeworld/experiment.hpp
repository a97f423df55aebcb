#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazeworld/gazedata.hpp"
#include "gazeworld/model.hpp"
#include "gazeworld/scanpath_decoder.hpp"
#include "gazeworld/train.hpp"

namespace gazeworld {

struct DataConfig {
  std::uint64_t seed = 1;
  std::size_t n_images = 200;
  GridSpec grid{4, 4};
  std::string rule = "intensity-order";
  std::size_t patch_px = 8;
  SplitFractions fractions{0.8, 0.1, 0.1};
  std::string out_dir = "dataset";
};

struct ProbeSection {
  std::uint64_t seed = 7;
  std::size_t train_images = 384;
  std::size_t test_images = 256;
  double l2_c = 1.0;
  std::size_t max_iters = 2000;
};

struct ScanpathSection {
  std::uint64_t seed = 11;
  std::size_t train_samples = 192;
  std::size_t test_samples = 64;
  std::size_t d_s = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t n_tasks = 2;
  std::size_t steps = 7;
  double learning_rate = 3e-3;
  double weight_decay = 0.01;
  double eta_min = 1e-6;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
};

struct AblateSection {
  std::size_t n_seeds = 3;
  std::uint64_t base_seed = 100;
};

struct MetricsSection {
  GridSpec grid{4, 4};
};

// One canonical document covering every command; every field has a default
// recorded here, unknown keys are rejected, and the resolved document is
// embedded in every report.
struct ExperimentConfig {
  DataConfig data;
  ModelConfig model = ModelConfig::desk_scale(GridSpec{4, 4});
  std::uint64_t model_seed = 3;
  TrainConfig train;
  ProbeSection probe;
  ScanpathSection scanpath;
  MetricsSection metrics;
  AblateSection ablate;

  nlohmann::json to_json() const;

  // Strict parse over the defaults: absent keys keep their defaults, unknown
  // keys are collected (dotted paths) and reported all at once.
  static ExperimentConfig from_json(const nlohmann::json& j);

  // `--set section.key=value` override applied to the resolved document.
  static nlohmann::json apply_override(nlohmann::json doc, const std::string& assignment);

  // GAZEWORLD_SEED replaces every per-section seed.
  void override_all_seeds(std::uint64_t seed);

  ScanpathDecoderConfig decoder_config() const;
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::vector<std::string>& problems);
  std::vector<std::string> problems;
};

}  // namespace gazeworld
