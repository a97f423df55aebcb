#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazeworld/gazedata.hpp"
#include "gazeworld/ops.hpp"
#include "gazeworld/tensor.hpp"

namespace gazeworld {

struct ModelConfig {
  GridSpec grid{4, 4};
  std::size_t patch_px = 8;  // square grid cells, patch_px x patch_px pixels
  std::size_t embed_dim = 32;
  std::size_t encoder_layers = 2;
  std::size_t encoder_heads = 4;
  std::size_t predictor_layers = 2;
  std::size_t predictor_heads = 4;
  std::size_t completion_layers = 2;
  std::size_t max_seq_len = 17;  // >= grid.patches()+1 (readout slot included)
  double smooth_l1_beta = 1.0;
  double lambda_sc = 1.0;
  // The AR loss normalizes the prediction only; this flag also normalizes the
  // target, making it symmetric like the completion loss (ablation knob).
  bool symmetric_ar_norm = false;

  void validate() const;

  static ModelConfig desk_scale(const GridSpec& grid, std::size_t embed_dim = 32);
  // Full-size reference settings: d=768, 8-layer 12-head predictor, 14x14 grid.
  static ModelConfig paper_scale();

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

// Ordered, named parameter collection. Order is the contract for the
// optimizer, EMA pairing, and checkpoint layout.
template <typename T>
struct ParamStore {
  std::vector<std::pair<std::string, Tensor<T>>> items;

  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    items.emplace_back(name, std::move(t));
    return items.back().second;
  }
  const Tensor<T>& at(const std::string& name) const {
    for (const auto& [n, t] : items) {
      if (n == name) return t;
    }
    throw std::out_of_range("ParamStore: no parameter named " + name);
  }
  Tensor<T>& at(const std::string& name) {
    return const_cast<Tensor<T>&>(std::as_const(*this).at(name));
  }
  std::vector<Tensor<T>> tensors() const {
    std::vector<Tensor<T>> out;
    out.reserve(items.size());
    for (const auto& [n, t] : items) out.push_back(t);
    return out;
  }
};

// All learnable state: the online modules plus the EMA target encoder. The
// target store mirrors the "encoder." subset of the online store, never
// requires grad, and changes only through ema_update.
template <typename T>
struct ModelState {
  ModelConfig config;
  ParamStore<T> online;
  ParamStore<T> target;

  static ModelState init(const ModelConfig& config, std::uint64_t seed);

  std::vector<Tensor<T>> online_params() { return online.tensors(); }
  std::vector<Tensor<T>> target_params() { return target.tensors(); }
  // Online "encoder.*" tensors, aligned index-for-index with target_params().
  std::vector<Tensor<T>> online_encoder_params();
};

// Patch-level representations from the online encoder: one row per grid cell
// in raster order, shape (N, d).
template <typename T>
Tensor<T> encode(const ModelState<T>& model, const ImageGray& image);

// Same architecture through the EMA parameters, evaluated without gradient
// tracking.
template <typename T>
Tensor<T> target_encode(const ModelState<T>& model, const ImageGray& image);

// Learned spatial embedding of one patch: row embedding + column embedding.
template <typename T>
Tensor<T> spatial_embedding(const ModelState<T>& model, std::size_t patch);

// Fixation token: W_z z + e_patch + E_rank[rank] + W_d log(1+dwell).
template <typename T>
Tensor<T> embed_fixation(const ModelState<T>& model, const Tensor<T>& z_row, std::size_t patch,
                         std::size_t rank, double dwell);

// Fixation tokens for a whole visited sequence, shape (L, d).
template <typename T>
Tensor<T> embed_sequence(const ModelState<T>& model, const Tensor<T>& z, const FixationSequence& seq);

template <typename T>
struct PredictOutput {
  Tensor<T> context;      // trunk hidden states H, shape (L, d)
  Tensor<T> predictions;  // head outputs for targets 2..L, shape (L-1, d); undefined when L=1
};

// Causal autoregressive pass: prediction i (row i-2 of predictions) sees
// tokens 1..i-1 only.
template <typename T>
PredictOutput<T> predict_sequence(const ModelState<T>& model, const Tensor<T>& tokens);

// Cross-attention completion of unvisited patches: one row per element of
// `unvisited`, queries = mask token + spatial embedding, keys/values = H.
// Queries never attend to each other. Empty input yields an empty tensor.
template <typename T>
Tensor<T> complete_unvisited(const ModelState<T>& model, const Tensor<T>& context,
                             const std::vector<std::size_t>& unvisited);

// Mean SmoothL1 between normalized predictions and (stop-gradient) targets.
template <typename T>
Tensor<T> loss_ar(const ModelState<T>& model, const Tensor<T>& predictions,
                  const Tensor<T>& targets);

// Completion loss; layer norm applies to both sides. Returns a constant zero
// scalar for empty inputs.
template <typename T>
Tensor<T> loss_sc(const ModelState<T>& model, const Tensor<T>& completions,
                  const Tensor<T>& targets);

template <typename T>
Tensor<T> loss_total(const Tensor<T>& ar, const Tensor<T>& sc, T lambda);

template <typename T>
struct SampleLosses {
  Tensor<T> total;
  Tensor<T> ar;
  Tensor<T> sc;
  bool has_ar = false;  // false when L < 2; such samples must be skipped
};

// Full per-sample pipeline: encode, target-encode, embed, predict, complete,
// and combine losses. When seq.length() < 2, has_ar is false and no loss is
// defined (the caller skips the sample).
template <typename T>
SampleLosses<T> sample_losses(const ModelState<T>& model, const ImageGray& image,
                              const FixationSequence& seq, T lambda);

extern template struct ModelState<float>;
extern template struct ModelState<double>;

}  // namespace gazeworld
