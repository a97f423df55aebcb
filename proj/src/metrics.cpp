#include "gazeworld/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gazeworld::metrics {

void QuantizedScanpath::validate() const {
  grid.validate();
  if (cells.empty()) throw std::invalid_argument("QuantizedScanpath: empty path");
  for (std::size_t c : cells) {
    if (c >= grid.patches()) throw std::invalid_argument("QuantizedScanpath: cell out of range");
  }
}

std::pair<double, double> cell_center(const GridSpec& grid, std::size_t cell) {
  const double x = (static_cast<double>(cell % grid.cols) + 0.5) / static_cast<double>(grid.cols);
  const double y = (static_cast<double>(cell / grid.cols) + 0.5) / static_cast<double>(grid.rows);
  return {x, y};
}

std::pair<double, double> QuantizedScanpath::center(std::size_t i) const {
  return cell_center(grid, cells[i]);
}

double grid_diag(const GridSpec& grid) {
  const auto a = cell_center(grid, 0);
  const auto b = cell_center(grid, grid.patches() - 1);
  return std::hypot(b.first - a.first, b.second - a.second);
}

QuantizedScanpath quantize(const std::vector<std::pair<double, double>>& points,
                           const GridSpec& grid) {
  grid.validate();
  QuantizedScanpath q;
  q.grid = grid;
  for (const auto& [x, y] : points) {
    const auto row = std::min(static_cast<std::size_t>(y * static_cast<double>(grid.rows)),
                              grid.rows - 1);
    const auto col = std::min(static_cast<std::size_t>(x * static_cast<double>(grid.cols)),
                              grid.cols - 1);
    q.cells.push_back(row * grid.cols + col);
  }
  q.validate();
  return q;
}

namespace {

double center_dist(const QuantizedScanpath& a, std::size_t i, const QuantizedScanpath& b,
                   std::size_t j) {
  const auto pa = a.center(i);
  const auto pb = b.center(j);
  return std::hypot(pb.first - pa.first, pb.second - pa.second);
}

void check_same_grid(const QuantizedScanpath& a, const QuantizedScanpath& b) {
  a.validate();
  b.validate();
  if (!(a.grid == b.grid)) throw std::invalid_argument("scanpath metrics: grid mismatch");
}

// Distances normalized by diag; degenerate single-cell grids have diag 0 and
// all distances 0, which maps to similarity 1.
double norm_dist(double dist, double diag) { return diag > 0.0 ? dist / diag : 0.0; }

}  // namespace

std::size_t sed(const QuantizedScanpath& a, const QuantizedScanpath& b) {
  check_same_grid(a, b);
  const std::size_t m = a.cells.size(), n = b.cells.size();
  std::vector<std::size_t> prev(n + 1), cur(n + 1);
  for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= n; ++j) {
      const std::size_t sub = prev[j - 1] + (a.cells[i - 1] == b.cells[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

double scanmatch(const QuantizedScanpath& a, const QuantizedScanpath& b) {
  check_same_grid(a, b);
  const double diag = grid_diag(a.grid);
  const std::size_t m = a.cells.size(), n = b.cells.size();
  std::vector<std::vector<double>> f(m + 1, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const double s = 1.0 - norm_dist(center_dist(a, i - 1, b, j - 1), diag);
      f[i][j] = std::max({f[i - 1][j - 1] + s, f[i - 1][j], f[i][j - 1]});
    }
  }
  return f[m][n] / static_cast<double>(std::max(m, n));
}

namespace {

// Mean over windows of `a` of the minimum mean point distance to any equal
// length window of `b`, averaged over window lengths, as a similarity.
double stde_directed(const QuantizedScanpath& a, const QuantizedScanpath& b, std::size_t k_max,
                     double diag) {
  const std::size_t m = a.cells.size(), n = b.cells.size();
  const std::size_t top = std::min({k_max, m, n});
  double sim_sum = 0.0;
  for (std::size_t k = 1; k <= top; ++k) {
    double dist_sum = 0.0;
    const std::size_t wa = m - k + 1;
    for (std::size_t i = 0; i < wa; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j + k <= n; ++j) {
        double d = 0.0;
        for (std::size_t t = 0; t < k; ++t) d += center_dist(a, i + t, b, j + t);
        best = std::min(best, d / static_cast<double>(k));
      }
      dist_sum += best;
    }
    sim_sum += 1.0 - norm_dist(dist_sum / static_cast<double>(wa), diag);
  }
  return sim_sum / static_cast<double>(top);
}

}  // namespace

double stde(const QuantizedScanpath& a, const QuantizedScanpath& b, std::size_t k_max) {
  check_same_grid(a, b);
  if (k_max == 0) throw std::invalid_argument("stde: k_max must be >= 1");
  const double diag = grid_diag(a.grid);
  return (stde_directed(a, b, k_max, diag) + stde_directed(b, a, k_max, diag)) / 2.0;
}

std::vector<std::pair<double, double>> saccade_vectors(const QuantizedScanpath& p) {
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i + 1 < p.cells.size(); ++i) {
    const auto c0 = p.center(i);
    const auto c1 = p.center(i + 1);
    out.emplace_back(c1.first - c0.first, c1.second - c0.second);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> align_saccades(
    const std::vector<std::pair<double, double>>& u,
    const std::vector<std::pair<double, double>>& v) {
  const std::size_t m = u.size(), n = v.size();
  if (m == 0 || n == 0) throw std::invalid_argument("align_saccades: empty saccade list");

  auto cost = [&](std::size_t i, std::size_t j) {
    return std::hypot(u[i].first - v[j].first, u[i].second - v[j].second);
  };

  // remaining[i][j] = cost of the cheapest monotone path from (i,j) to the
  // corner, including cell (i,j).
  std::vector<std::vector<double>> remaining(m, std::vector<double>(n, 0.0));
  for (std::size_t ii = m; ii-- > 0;) {
    for (std::size_t jj = n; jj-- > 0;) {
      double best = 0.0;
      if (ii + 1 < m && jj + 1 < n) {
        best = std::min({remaining[ii + 1][jj + 1], remaining[ii][jj + 1], remaining[ii + 1][jj]});
      } else if (jj + 1 < n) {
        best = remaining[ii][jj + 1];
      } else if (ii + 1 < m) {
        best = remaining[ii + 1][jj];
      }
      remaining[ii][jj] = cost(ii, jj) + best;
    }
  }

  // Canonical walk: first move in [diag, right, down] achieving the optimum.
  std::vector<std::pair<std::size_t, std::size_t>> path{{0, 0}};
  std::size_t i = 0, j = 0;
  while (i + 1 < m || j + 1 < n) {
    double best = std::numeric_limits<double>::infinity();
    if (i + 1 < m && j + 1 < n) best = std::min(best, remaining[i + 1][j + 1]);
    if (j + 1 < n) best = std::min(best, remaining[i][j + 1]);
    if (i + 1 < m) best = std::min(best, remaining[i + 1][j]);
    if (i + 1 < m && j + 1 < n && remaining[i + 1][j + 1] == best) {
      ++i;
      ++j;
    } else if (j + 1 < n && remaining[i][j + 1] == best) {
      ++j;
    } else {
      ++i;
    }
    path.emplace_back(i, j);
  }
  return path;
}

MultiMatchScore multimatch(const QuantizedScanpath& a, const QuantizedScanpath& b) {
  check_same_grid(a, b);
  if (a.cells.size() < 2 || b.cells.size() < 2) {
    throw std::invalid_argument("multimatch: paths need at least 2 fixations");
  }
  const double diag = grid_diag(a.grid);
  const auto u = saccade_vectors(a);
  const auto v = saccade_vectors(b);
  const auto pairs = align_saccades(u, v);

  MultiMatchScore score;
  for (const auto& [i, j] : pairs) {
    const double diff = std::hypot(u[i].first - v[j].first, u[i].second - v[j].second);
    score.vector += 1.0 - norm_dist(diff, 2.0 * diag);

    const double nu = std::hypot(u[i].first, u[i].second);
    const double nv = std::hypot(v[j].first, v[j].second);
    if (nu == 0.0 || nv == 0.0) {
      score.direction += nu == 0.0 && nv == 0.0 ? 1.0 : 0.0;
    } else {
      const double c = std::clamp(
          (u[i].first * v[j].first + u[i].second * v[j].second) / (nu * nv), -1.0, 1.0);
      score.direction += 1.0 - std::acos(c) / std::numbers::pi;
    }
    score.position += 1.0 - norm_dist(center_dist(a, i, b, j), diag);
  }
  // Aligned fixations: saccade origins plus the terminal fixation pair.
  score.position +=
      1.0 - norm_dist(center_dist(a, a.cells.size() - 1, b, b.cells.size() - 1), diag);

  const double np = static_cast<double>(pairs.size());
  score.vector /= np;
  score.direction /= np;
  score.position /= np + 1.0;
  return score;
}

// ---------------------------------------------------------------------------

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: length mismatch");
  std::size_t pos = 0, neg = 0;
  for (int y : labels) (y == 1 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) {
    throw std::invalid_argument("auroc: needs both classes present");
  }
  double wins = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw std::invalid_argument("accuracy: bad input lengths");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

double f1_for_class(const std::vector<int>& predictions, const std::vector<int>& labels,
                    int positive) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == positive;
    const bool t = labels[i] == positive;
    tp += p && t ? 1 : 0;
    fp += p && !t ? 1 : 0;
    fn += !p && t ? 1 : 0;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

double f1(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw std::invalid_argument("f1: bad input lengths");
  }
  return f1_for_class(predictions, labels, 1);
}

double f1_macro(const std::vector<int>& predictions, const std::vector<int>& labels,
                std::size_t n_classes) {
  if (n_classes == 0) throw std::invalid_argument("f1_macro: n_classes must be >= 1");
  double total = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    total += f1_for_class(predictions, labels, static_cast<int>(c));
  }
  return total / static_cast<double>(n_classes);
}

double auroc_macro(const std::vector<std::vector<double>>& class_scores,
                   const std::vector<int>& labels) {
  if (class_scores.empty()) throw std::invalid_argument("auroc_macro: no classes");
  double total = 0.0;
  for (std::size_t c = 0; c < class_scores.size(); ++c) {
    std::vector<int> binary(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      binary[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    total += auroc(class_scores[c], binary);
  }
  return total / static_cast<double>(class_scores.size());
}

}  // namespace gazeworld::metrics
