#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gazeworld/checkpoint.hpp"
#include "gazeworld/gazedata.hpp"
#include "gazeworld/model.hpp"
#include "gazeworld/optim.hpp"

namespace gazeworld {

struct TrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_size = 32;
  double learning_rate = 3e-4;
  double weight_decay = 0.04;
  double lambda_sc = 1.0;
  double ema_start = 0.998;
  double ema_end = 1.0;
  std::uint64_t seed = 0;
  std::size_t log_every = 10;        // JSONL emission cadence (steps)
  std::size_t checkpoint_every = 0;  // 0 = final checkpoint only
  std::string precision = "float64";

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct StepLog {
  std::int64_t step = 0;  // batch index within the run
  double l_ar = 0.0;
  double l_sc = 0.0;
  double l_total = 0.0;
  double tau = 0.0;
  std::size_t skipped = 0;  // samples skipped in this batch (L < 2)
};

struct TrainReport {
  std::vector<StepLog> steps;  // full trace of performed steps
  std::size_t skipped_samples = 0;
  std::size_t skipped_steps = 0;  // batches where every sample had L < 2
  double wall_seconds = 0.0;
};

struct BatchSample {
  const ImageGray* image = nullptr;
  const FixationSequence* seq = nullptr;
};

template <typename T>
struct StepOutcome {
  bool performed = false;
  double l_ar = 0.0;
  double l_sc = 0.0;
  double l_total = 0.0;
  std::size_t skipped = 0;
};

// One pretraining step: per-sample forward/backward with gradient
// accumulation, one optimizer update over all online parameters, then one EMA
// update of the target encoder with the given tau. Batches whose samples all
// have L < 2 are skipped entirely.
template <typename T>
StepOutcome<T> pretrain_step(ModelState<T>& model, AdamW<T>& optimizer,
                             const std::vector<BatchSample>& batch, T tau, T lambda);

// Full deterministic pretraining run. Shuffling is derived from (seed, epoch)
// so interrupt-and-resume reproduces the uninterrupted run exactly. When
// checkpoint_dir is nonempty, periodic checkpoints step_<k>.ckpt are written
// at the configured cadence. Passing `resume` continues from its step.
template <typename T>
std::pair<Checkpoint<T>, TrainReport> run_pretrain(
    const ModelConfig& model_config, const TrainConfig& train_config,
    const SyntheticDataset& data, const std::filesystem::path& checkpoint_dir = {},
    const Checkpoint<T>* resume = nullptr);

// One JSONL record per logged step (cadence log_every, last step always).
void write_train_report_jsonl(const TrainReport& report, const std::filesystem::path& path,
                              std::size_t log_every);

}  // namespace gazeworld
