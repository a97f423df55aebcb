#include "gazeworld/probes.hpp"

#include <cmath>

#include "gazeworld/metrics.hpp"
#include "gazeworld/ops.hpp"

namespace gazeworld {

template <typename T>
ProbeFeatures extract_probe_features(const ModelState<T>& model, const ImageGray& image) {
  autograd::NoGradGuard no_grad;
  const std::size_t d = model.config.embed_dim;
  const std::size_t n = model.config.grid.patches();
  if (model.config.max_seq_len < n + 1) {
    throw std::invalid_argument(
        "extract_probe_features: max_seq_len must be >= patches+1 for the readout slot");
  }

  auto z = encode(model, image);

  // Half A: mean-pooled online patch tokens.
  auto pooled = ops::mean_rows(z);

  // Half B: raster surrogate sequence (unit dwell) with the readout token
  // appended at rank N so its causal output sees every patch.
  std::vector<Tensor<T>> rows;
  rows.reserve(n + 1);
  for (std::size_t p = 0; p < n; ++p) {
    rows.push_back(embed_fixation(model, ops::gather_rows(z, {p}), p, p, 1.0));
  }
  rows.push_back(ops::add(model.online.at("readout_token"),
                          ops::gather_rows(model.online.at("rank_embed"), {n})));
  auto predicted = predict_sequence(model, ops::stack_rows(rows));
  auto readout = ops::gather_rows(predicted.context, {n});

  ProbeFeatures f;
  f.embed_dim = d;
  f.values.reserve(2 * d);
  for (T v : pooled.data()) f.values.push_back(static_cast<double>(v));
  for (T v : readout.data()) f.values.push_back(static_cast<double>(v));
  return f;
}

Standardization standardize_fit(const std::vector<std::vector<double>>& train) {
  if (train.empty()) throw std::invalid_argument("standardize_fit: empty training matrix");
  const std::size_t k = train[0].size();
  Standardization s;
  s.mean.assign(k, 0.0);
  s.std_dev.assign(k, 0.0);
  for (const auto& row : train) {
    if (row.size() != k) throw std::invalid_argument("standardize_fit: ragged matrix");
    for (std::size_t j = 0; j < k; ++j) s.mean[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(train.size());
  for (double& m : s.mean) m *= inv;
  for (const auto& row : train) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = row[j] - s.mean[j];
      s.std_dev[j] += d * d;
    }
  }
  for (double& v : s.std_dev) v = std::sqrt(v * inv);
  return s;
}

void standardize_apply(const Standardization& s, std::vector<std::vector<double>>& rows) {
  for (auto& row : rows) {
    if (row.size() != s.mean.size()) throw std::invalid_argument("standardize_apply: bad width");
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = s.std_dev[j] > 0.0 ? (row[j] - s.mean[j]) / s.std_dev[j] : 0.0;
    }
  }
}

namespace {

// log(1 + exp(-t)) without overflow.
double log1p_exp_neg(double t) {
  return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

struct Objective {
  const std::vector<std::vector<double>>& x;
  const std::vector<int>& y;  // in {0,1}
  double inv_c;

  // theta = [w; b]; gradient written into g when non-null.
  double eval(const std::vector<double>& theta, std::vector<double>* g) const {
    const std::size_t k = theta.size() - 1;
    if (g != nullptr) std::fill(g->begin(), g->end(), 0.0);
    double obj = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double z = theta[k];
      for (std::size_t j = 0; j < k; ++j) z += theta[j] * x[i][j];
      const double label = y[i] == 1 ? 1.0 : -1.0;
      obj += log1p_exp_neg(label * z);
      if (g != nullptr) {
        const double s = -label / (1.0 + std::exp(label * z));
        for (std::size_t j = 0; j < k; ++j) (*g)[j] += s * x[i][j];
        (*g)[k] += s;
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      obj += 0.5 * inv_c * theta[j] * theta[j];
      if (g != nullptr) (*g)[j] += inv_c * theta[j];
    }
    return obj;
  }
};

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

LogisticModel fit_logistic(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           double c, std::size_t max_iters, double tol,
                           const std::vector<double>* init) {
  if (x.empty() || x.size() != y.size()) throw std::invalid_argument("fit_logistic: bad inputs");
  bool has_pos = false, has_neg = false;
  for (int label : y) (label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw std::invalid_argument("fit_logistic: both classes must be present");
  }
  if (!(c > 0.0)) throw std::invalid_argument("fit_logistic: C must be positive");

  const std::size_t k = x[0].size();
  const std::size_t dim = k + 1;
  std::vector<double> theta(dim, 0.0);
  if (init != nullptr) {
    if (init->size() != dim) throw std::invalid_argument("fit_logistic: bad init length");
    theta = *init;
  }

  const Objective obj{x, y, 1.0 / c};
  std::vector<double> grad(dim);
  double fval = obj.eval(theta, &grad);

  // L-BFGS two-loop recursion with Armijo backtracking.
  constexpr std::size_t kHistory = 10;
  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;
  std::size_t iters = 0;

  for (; iters < max_iters && norm2(grad) > tol; ++iters) {
    std::vector<double> dir = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      double sd = 0.0;
      for (std::size_t j = 0; j < dim; ++j) sd += s_hist[h][j] * dir[j];
      alpha[h] = rho_hist[h] * sd;
      for (std::size_t j = 0; j < dim; ++j) dir[j] -= alpha[h] * y_hist[h][j];
    }
    if (!s_hist.empty()) {
      double yy = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        yy += y_hist.back()[j] * y_hist.back()[j];
        sy += s_hist.back()[j] * y_hist.back()[j];
      }
      const double gamma = sy / yy;
      for (double& v : dir) v *= gamma;
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      double yd = 0.0;
      for (std::size_t j = 0; j < dim; ++j) yd += y_hist[h][j] * dir[j];
      const double beta = rho_hist[h] * yd;
      for (std::size_t j = 0; j < dim; ++j) dir[j] += (alpha[h] - beta) * s_hist[h][j];
    }
    for (double& v : dir) v = -v;

    double dg = 0.0;
    for (std::size_t j = 0; j < dim; ++j) dg += dir[j] * grad[j];
    if (dg >= 0.0) {  // not a descent direction; fall back to steepest descent
      for (std::size_t j = 0; j < dim; ++j) dir[j] = -grad[j];
      dg = -norm2(grad) * norm2(grad);
    }

    double step = 1.0;
    std::vector<double> theta_new(dim), grad_new(dim);
    double f_new = fval;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < dim; ++j) theta_new[j] = theta[j] + step * dir[j];
      f_new = obj.eval(theta_new, &grad_new);
      if (f_new <= fval + 1e-4 * step * dg) break;
      step *= 0.5;
    }

    std::vector<double> s_vec(dim), y_vec(dim);
    double sy = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      s_vec[j] = theta_new[j] - theta[j];
      y_vec[j] = grad_new[j] - grad[j];
      sy += s_vec[j] * y_vec[j];
    }
    theta = std::move(theta_new);
    fval = f_new;
    grad = grad_new;
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kHistory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
  }

  LogisticModel m;
  m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k));
  m.bias = theta[k];
  m.objective = fval;
  m.grad_norm = norm2(grad);
  m.iterations = iters;
  return m;
}

double logistic_score(const LogisticModel& m, const std::vector<double>& x) {
  if (x.size() != m.weights.size()) throw std::invalid_argument("logistic_score: bad width");
  double z = m.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += m.weights[j] * x[j];
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<LogisticModel> fit_logistic_ovr(const std::vector<std::vector<double>>& x,
                                            const std::vector<int>& labels,
                                            std::size_t n_classes, double c,
                                            std::size_t max_iters, double tol) {
  std::vector<LogisticModel> out;
  out.reserve(n_classes);
  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    std::vector<int> binary(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      binary[i] = labels[i] == static_cast<int>(cls) ? 1 : 0;
    }
    out.push_back(fit_logistic(x, binary, c, max_iters, tol));
  }
  return out;
}

template <typename T>
ProbeResult run_linear_probe(const ModelState<T>& model, const SyntheticDataset& train,
                             const SyntheticDataset& test, double c, std::size_t max_iters) {
  auto features_of = [&](const SyntheticDataset& ds) {
    std::vector<std::vector<double>> rows;
    rows.reserve(ds.size());
    for (const auto& img : ds.images) {
      rows.push_back(extract_probe_features(model, img).values);
    }
    return rows;
  };
  auto x_train = features_of(train);
  auto x_test = features_of(test);
  const auto stats = standardize_fit(x_train);
  standardize_apply(stats, x_train);
  standardize_apply(stats, x_test);

  const auto classifier = fit_logistic(x_train, train.labels, c, max_iters);

  std::vector<double> scores;
  std::vector<int> pred;
  scores.reserve(x_test.size());
  for (const auto& row : x_test) {
    scores.push_back(logistic_score(classifier, row));
    pred.push_back(scores.back() >= 0.5 ? 1 : 0);
  }
  ProbeResult r;
  r.auroc = metrics::auroc(scores, test.labels);
  r.accuracy = metrics::accuracy(pred, test.labels);
  r.train_size = train.size();
  r.test_size = test.size();
  return r;
}

template ProbeFeatures extract_probe_features<float>(const ModelState<float>&, const ImageGray&);
template ProbeFeatures extract_probe_features<double>(const ModelState<double>&,
                                                      const ImageGray&);
template ProbeResult run_linear_probe<float>(const ModelState<float>&, const SyntheticDataset&,
                                             const SyntheticDataset&, double, std::size_t);
template ProbeResult run_linear_probe<double>(const ModelState<double>&, const SyntheticDataset&,
                                              const SyntheticDataset&, double, std::size_t);

}  // namespace gazeworld
