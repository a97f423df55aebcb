#pragma once

#include <cstdint>
#include <vector>

#include "gazeworld/gazedata.hpp"
#include "gazeworld/model.hpp"

namespace gazeworld {

// Frozen-feature vector for one image: first half mean-pooled online patch
// tokens, second half the readout-token output of the predictor run over a
// raster surrogate sequence (unit dwell, no gaze input anywhere).
struct ProbeFeatures {
  std::vector<double> values;  // length 2*embed_dim
  std::size_t embed_dim = 0;

  std::size_t size() const { return values.size(); }
};

template <typename T>
ProbeFeatures extract_probe_features(const ModelState<T>& model, const ImageGray& image);

struct Standardization {
  std::vector<double> mean;
  std::vector<double> std_dev;  // 0 marks a zero-variance dimension
};

// Statistics from the training matrix only; apply maps zero-variance
// dimensions to exactly zero.
Standardization standardize_fit(const std::vector<std::vector<double>>& train);
void standardize_apply(const Standardization& s, std::vector<std::vector<double>>& rows);

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  double objective = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
};

// L2-regularized logistic regression minimizing
//   sum_i log(1+exp(-y_i (x_i w + b))) + (1/(2C)) |w|^2
// by L-BFGS with backtracking line search, to gradient 2-norm <= tol.
// The intercept is not penalized. init, when given, seeds [w; b].
LogisticModel fit_logistic(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           double c = 1.0, std::size_t max_iters = 2000, double tol = 1e-6,
                           const std::vector<double>* init = nullptr);

double logistic_score(const LogisticModel& m, const std::vector<double>& x);

// One-vs-rest wrapper for multi-class labels 0..n_classes-1.
std::vector<LogisticModel> fit_logistic_ovr(const std::vector<std::vector<double>>& x,
                                            const std::vector<int>& labels,
                                            std::size_t n_classes, double c = 1.0,
                                            std::size_t max_iters = 2000, double tol = 1e-6);

struct ProbeResult {
  double auroc = 0.0;
  double accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

// Full probing protocol: features for both splits, standardization from the
// training split, logistic fit, AUROC/accuracy on the test split. Image
// labels come from the datasets; gaze records are never touched.
template <typename T>
ProbeResult run_linear_probe(const ModelState<T>& model, const SyntheticDataset& train,
                             const SyntheticDataset& test, double c = 1.0,
                             std::size_t max_iters = 2000);

}  // namespace gazeworld
