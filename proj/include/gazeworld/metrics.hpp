#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "gazeworld/gazedata.hpp"

namespace gazeworld::metrics {

// A scanpath snapped to grid cells. Cell centers live in normalized [0,1]^2
// image coordinates; all distances are normalized by the distance between
// opposite corner cell centers ("diag").
struct QuantizedScanpath {
  std::vector<std::size_t> cells;
  GridSpec grid;

  void validate() const;
  std::pair<double, double> center(std::size_t i) const;
};

std::pair<double, double> cell_center(const GridSpec& grid, std::size_t cell);
double grid_diag(const GridSpec& grid);

QuantizedScanpath quantize(const std::vector<std::pair<double, double>>& points,
                           const GridSpec& grid);

// Levenshtein distance over cell-index strings (unit insert/delete/substitute
// costs). Symmetric, satisfies the triangle inequality.
std::size_t sed(const QuantizedScanpath& a, const QuantizedScanpath& b);

// Needleman-Wunsch global alignment with substitution score
// 1 - dist(centers)/diag and gap score 0, normalized by max path length.
// 1.0 for identical paths, 0.0 for single fixations at opposite corners.
double scanmatch(const QuantizedScanpath& a, const QuantizedScanpath& b);

// Time-delay-embedding similarity: for each window length k <= k_max, average
// over windows of one path the minimum mean point distance to any window of
// the other, convert to 1 - d/diag, average over k, and symmetrize.
double stde(const QuantizedScanpath& a, const QuantizedScanpath& b, std::size_t k_max = 3);

struct MultiMatchScore {
  double vector = 0.0;
  double direction = 0.0;
  double position = 0.0;
};

// Saccade-vector alignment by minimum-cost monotone lattice path on
// |u_i - v_j| (no simplification step), then per-component similarities over
// the aligned pairs. Both paths need at least 2 fixations.
MultiMatchScore multimatch(const QuantizedScanpath& a, const QuantizedScanpath& b);

// The alignment used by multimatch, exposed so tests can check it against an
// exhaustive-enumeration oracle. Ties break toward diagonal, then advancing
// the second path, in exact-float comparison of remaining costs.
std::vector<std::pair<std::size_t, std::size_t>> align_saccades(
    const std::vector<std::pair<double, double>>& u, const std::vector<std::pair<double, double>>& v);

std::vector<std::pair<double, double>> saccade_vectors(const QuantizedScanpath& p);

// ---------------------------------------------------------------------------
// Classification metrics

// Mann-Whitney formulation: P(score_pos > score_neg) + 0.5 P(equal).
// Requires both classes present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// Binary F1 with class 1 as positive; 0 when no positives exist anywhere.
double f1(const std::vector<int>& predictions, const std::vector<int>& labels);

// One-vs-rest macro averages over classes 0..n_classes-1.
double f1_macro(const std::vector<int>& predictions, const std::vector<int>& labels,
                std::size_t n_classes);
double auroc_macro(const std::vector<std::vector<double>>& class_scores,
                   const std::vector<int>& labels);

}  // namespace gazeworld::metrics
