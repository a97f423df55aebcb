#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gazeworld/gazedata.hpp"
#include "gazeworld/model.hpp"

namespace gazeworld {

struct ScanpathPoint {
  double x = 0.0;
  double y = 0.0;
  double duration = 0.0;
};

// An evaluated trajectory in normalized image coordinates. `termination`
// records the first step where the termination head fired; the rollout
// ignores it and always emits a fixed number of fixations.
struct Scanpath {
  std::vector<ScanpathPoint> points;
  std::optional<std::size_t> termination;

  void validate() const;
};

struct ScanpathDecoderConfig {
  GridSpec grid{4, 4};
  std::size_t feature_dim = 32;  // backbone embed_dim
  std::size_t d_s = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t n_tasks = 2;
  std::size_t steps = 7;  // fixations emitted at inference
  double learning_rate = 3e-3;
  double weight_decay = 0.01;
  double eta_min = 1e-6;  // cosine annealing floor
  std::size_t epochs = 30;
  std::size_t batch_size = 16;

  void validate() const;
  // Full-size reference settings: d_s=512, 6 layers, 8 heads, 13 tasks,
  // 14x14 grid.
  static ScanpathDecoderConfig paper_scale();
};

// Supervised decoder over frozen backbone features: projected patch features
// are read by cross-attention, a causal transformer advances over the
// fixation sequence, and three heads emit the next cell (N-way), its dwell
// (log1p regression), and termination.
template <typename T>
struct ScanpathDecoder {
  ScanpathDecoderConfig config;
  ParamStore<T> params;

  static ScanpathDecoder init(const ScanpathDecoderConfig& config, std::uint64_t seed);
  std::vector<Tensor<T>> trainable() { return params.tensors(); }
};

template <typename T>
struct ScanpathHeads {
  Tensor<T> spatial_logits;  // (S, N)
  Tensor<T> durations;       // (S, 1), log1p scale
  Tensor<T> term_logits;     // (S, 1)
};

// Teacher-forced forward pass: input coordinates x_0..x_{S-1} (the start
// token plus the ground-truth prefix); row t predicts fixation t+1.
// `patch_features` are detached (N, feature_dim) backbone outputs.
template <typename T>
ScanpathHeads<T> scanpath_forward(const ScanpathDecoder<T>& decoder,
                                  const Tensor<T>& patch_features, std::size_t task,
                                  const std::vector<std::pair<double, double>>& coords);

// CE(spatial) + 0.1 * L1(duration) + 0.1 * BCE(termination).
template <typename T>
Tensor<T> scanpath_loss(const ScanpathHeads<T>& heads, const std::vector<std::size_t>& gt_cells,
                        const std::vector<double>& gt_durations,
                        const std::vector<T>& gt_termination);

// Autoregressive rollout from x_0 = (0.5, 0.5): each step takes the spatial
// head argmax cell center as the next fixation; exactly `steps` fixations are
// emitted regardless of the termination head.
template <typename T>
Scanpath decode_scanpath(const ModelState<T>& backbone, const ScanpathDecoder<T>& decoder,
                         const ImageGray& image, std::size_t task, std::size_t steps = 7);

// Synthetic search task for decoder training: task 0 scans the brightest
// cells in descending order, task 1 the dimmest in ascending order.
struct SearchSample {
  ImageGray image;
  std::size_t task = 0;
  Scanpath path;
};

std::vector<SearchSample> make_search_dataset(std::uint64_t seed, std::size_t n_samples,
                                              const GridSpec& grid, std::size_t patch_px,
                                              std::size_t n_tasks = 2, std::size_t path_len = 7);

struct DecoderTrainReport {
  std::vector<double> epoch_loss;
  double wall_seconds = 0.0;
};

// Trains only the decoder; backbone features are computed once under no-grad
// and stay frozen. AdamW with cosine-annealed learning rate.
template <typename T>
DecoderTrainReport train_scanpath_decoder(ScanpathDecoder<T>& decoder,
                                          const ModelState<T>& backbone,
                                          const std::vector<SearchSample>& samples,
                                          std::uint64_t seed);

}  // namespace gazeworld
