#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "gazeworld/model.hpp"
#include "gazeworld/optim.hpp"

namespace gazeworld {

struct CheckpointError : std::runtime_error {
  enum class Kind { kMagic, kVersion, kTruncated, kCorrupt };
  CheckpointError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

// Versioned binary container: magic, version, canonical JSON header (config,
// precision, step, dataset seed), then named little-endian IEEE-754 blobs for
// online params, target params, and optimizer moments. save -> load -> save
// round trips are byte-identical.
template <typename T>
struct Checkpoint {
  ModelConfig config;
  std::int64_t step = 0;      // batch index within the run
  std::int64_t opt_step = 0;  // optimizer updates performed (skipped batches excluded)
  std::uint64_t dataset_seed = 0;
  nlohmann::json train_config;  // resolved training settings, for provenance

  ModelState<T> model;
  std::vector<std::vector<T>> opt_m;  // aligned with model.online.items
  std::vector<std::vector<T>> opt_v;
};

template <typename T>
void save_checkpoint(const Checkpoint<T>& ckpt, const std::filesystem::path& path);

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// Reads just the header to learn which precision the file stores
// ("float32" or "float64").
std::string checkpoint_precision(const std::filesystem::path& path);

template <typename T>
constexpr const char* precision_name() {
  return sizeof(T) == 8 ? "float64" : "float32";
}

}  // namespace gazeworld
