#include "gazeworld/scanpath_decoder.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "gazeworld/metrics.hpp"
#include "gazeworld/optim.hpp"
#include "gazeworld/rng.hpp"

namespace gazeworld {

void Scanpath::validate() const {
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
      throw std::invalid_argument("Scanpath: coordinate outside [0,1]");
    }
    if (p.duration < 0.0) throw std::invalid_argument("Scanpath: negative duration");
  }
}

void ScanpathDecoderConfig::validate() const {
  grid.validate();
  if (feature_dim == 0 || d_s == 0) throw std::invalid_argument("decoder: zero dimension");
  if (heads == 0 || d_s % heads != 0) {
    throw std::invalid_argument("decoder: d_s must be divisible by heads");
  }
  if (layers == 0 || n_tasks == 0 || steps == 0) {
    throw std::invalid_argument("decoder: layers, n_tasks, steps must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("decoder: learning_rate <= 0");
}

ScanpathDecoderConfig ScanpathDecoderConfig::paper_scale() {
  ScanpathDecoderConfig c;
  c.grid = GridSpec{14, 14};
  c.feature_dim = 768;
  c.d_s = 512;
  c.layers = 6;
  c.heads = 8;
  c.n_tasks = 13;
  c.steps = 7;
  c.learning_rate = 5e-4;
  c.epochs = 30;
  c.batch_size = 16;
  return c;
}

namespace {

constexpr double kLnEps = 1e-5;

template <typename T>
Tensor<T> ln(const ParamStore<T>& ps, const std::string& prefix, const Tensor<T>& x) {
  return ops::layer_norm_affine(x, ps.at(prefix + ".g"), ps.at(prefix + ".b"),
                                static_cast<T>(kLnEps));
}

template <typename T>
Tensor<T> attention(const ParamStore<T>& ps, const std::string& prefix, const Tensor<T>& q_in,
                    const Tensor<T>& kv_in, std::size_t heads, bool causal) {
  const std::size_t d = q_in.cols();
  const std::size_t dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  auto q = ops::add_rowvec(ops::matmul(q_in, ps.at(prefix + ".wq")), ps.at(prefix + ".bq"));
  auto k = ops::add_rowvec(ops::matmul(kv_in, ps.at(prefix + ".wk")), ps.at(prefix + ".bk"));
  auto v = ops::add_rowvec(ops::matmul(kv_in, ps.at(prefix + ".wv")), ps.at(prefix + ".bv"));
  std::vector<Tensor<T>> heads_out;
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    auto weights = causal ? ops::softmax_causal(scores) : ops::softmax_rows(scores);
    heads_out.push_back(ops::matmul(weights, vh));
  }
  return ops::add_rowvec(ops::matmul(ops::concat_cols(heads_out), ps.at(prefix + ".wo")),
                         ps.at(prefix + ".bo"));
}

template <typename T>
Tensor<T> mlp(const ParamStore<T>& ps, const std::string& prefix, const Tensor<T>& x) {
  auto hidden =
      ops::gelu(ops::add_rowvec(ops::matmul(x, ps.at(prefix + ".w1")), ps.at(prefix + ".b1")));
  return ops::add_rowvec(ops::matmul(hidden, ps.at(prefix + ".w2")), ps.at(prefix + ".b2"));
}

template <typename T>
Tensor<T> self_block(const ParamStore<T>& ps, const std::string& prefix, Tensor<T> x,
                     std::size_t heads) {
  auto n1 = ln(ps, prefix + ".ln1", x);
  x = ops::add(x, attention(ps, prefix + ".attn", n1, n1, heads, true));
  auto n2 = ln(ps, prefix + ".ln2", x);
  return ops::add(x, mlp(ps, prefix + ".mlp", n2));
}

template <typename T>
Tensor<T> cross_block(const ParamStore<T>& ps, const std::string& prefix, Tensor<T> queries,
                      const Tensor<T>& context, std::size_t heads) {
  auto nq = ln(ps, prefix + ".lnq", queries);
  queries = ops::add(queries, attention(ps, prefix + ".attn", nq, context, heads, false));
  auto n2 = ln(ps, prefix + ".ln2", queries);
  return ops::add(queries, mlp(ps, prefix + ".mlp", n2));
}

}  // namespace

template <typename T>
ScanpathDecoder<T> ScanpathDecoder<T>::init(const ScanpathDecoderConfig& config,
                                            std::uint64_t seed) {
  config.validate();
  ScanpathDecoder<T> dec;
  dec.config = config;
  Rng rng = Rng::stream(seed, {0xDEC0DE});

  auto weight = [&](const std::string& name, Shape shape) {
    std::vector<T> data(shape_size(shape));
    for (auto& v : data) v = static_cast<T>(rng.normal(0.0, 0.02));
    dec.params.add(name, Tensor<T>::from(std::move(shape), std::move(data)))
        .set_requires_grad(true);
  };
  auto zeros = [&](const std::string& name, Shape shape) {
    dec.params.add(name, Tensor<T>::zeros(std::move(shape))).set_requires_grad(true);
  };
  auto ones = [&](const std::string& name, Shape shape) {
    dec.params.add(name, Tensor<T>::full(std::move(shape), T(1))).set_requires_grad(true);
  };
  auto layer_norm_params = [&](const std::string& prefix) {
    ones(prefix + ".g", {1, config.d_s});
    zeros(prefix + ".b", {1, config.d_s});
  };
  auto attn_params = [&](const std::string& prefix) {
    const std::size_t d = config.d_s;
    weight(prefix + ".wq", {d, d});
    zeros(prefix + ".bq", {1, d});
    weight(prefix + ".wk", {d, d});
    zeros(prefix + ".bk", {1, d});
    weight(prefix + ".wv", {d, d});
    zeros(prefix + ".bv", {1, d});
    weight(prefix + ".wo", {d, d});
    zeros(prefix + ".bo", {1, d});
  };
  auto mlp_params = [&](const std::string& prefix) {
    const std::size_t d = config.d_s;
    weight(prefix + ".w1", {d, 4 * d});
    zeros(prefix + ".b1", {1, 4 * d});
    weight(prefix + ".w2", {4 * d, d});
    zeros(prefix + ".b2", {1, d});
  };

  weight("feat_proj.w", {config.feature_dim, config.d_s});
  zeros("feat_proj.b", {1, config.d_s});
  weight("task_embed", {config.n_tasks, config.d_s});
  weight("coord_proj.w", {2, config.d_s});
  zeros("coord_proj.b", {1, config.d_s});
  weight("pos_embed", {config.steps, config.d_s});

  layer_norm_params("xread.lnq");
  attn_params("xread.attn");
  layer_norm_params("xread.ln2");
  mlp_params("xread.mlp");

  for (std::size_t i = 0; i < config.layers; ++i) {
    const std::string prefix = "blk" + std::to_string(i);
    layer_norm_params(prefix + ".ln1");
    attn_params(prefix + ".attn");
    layer_norm_params(prefix + ".ln2");
    mlp_params(prefix + ".mlp");
  }
  layer_norm_params("ln_f");

  weight("head_spatial.w", {config.d_s, config.grid.patches()});
  zeros("head_spatial.b", {1, config.grid.patches()});
  weight("head_dur.w", {config.d_s, 1});
  zeros("head_dur.b", {1, 1});
  weight("head_term.w", {config.d_s, 1});
  zeros("head_term.b", {1, 1});
  return dec;
}

template <typename T>
ScanpathHeads<T> scanpath_forward(const ScanpathDecoder<T>& decoder,
                                  const Tensor<T>& patch_features, std::size_t task,
                                  const std::vector<std::pair<double, double>>& coords) {
  const auto& cfg = decoder.config;
  if (task >= cfg.n_tasks) throw std::invalid_argument("scanpath_forward: unknown task id");
  if (coords.empty() || coords.size() > cfg.steps) {
    throw std::invalid_argument("scanpath_forward: need 1..steps input coordinates");
  }
  if (patch_features.rows() != cfg.grid.patches() || patch_features.cols() != cfg.feature_dim) {
    throw std::invalid_argument("scanpath_forward: patch feature shape mismatch");
  }
  const auto& ps = decoder.params;

  auto feats = ops::add_rowvec(ops::matmul(patch_features, ps.at("feat_proj.w")),
                               ps.at("feat_proj.b"));

  const std::size_t s = coords.size();
  std::vector<T> coord_data(s * 2);
  std::vector<std::size_t> pos_idx(s), task_idx(s, task);
  for (std::size_t t = 0; t < s; ++t) {
    coord_data[2 * t] = static_cast<T>(coords[t].first);
    coord_data[2 * t + 1] = static_cast<T>(coords[t].second);
    pos_idx[t] = t;
  }
  auto tokens = ops::add_rowvec(
      ops::matmul(Tensor<T>::from({s, 2}, std::move(coord_data)), ps.at("coord_proj.w")),
      ps.at("coord_proj.b"));
  tokens = ops::add(tokens, ops::gather_rows(ps.at("task_embed"), std::move(task_idx)));
  tokens = ops::add(tokens, ops::gather_rows(ps.at("pos_embed"), std::move(pos_idx)));

  // Every fixation token reads the image once, then the causal trunk runs
  // over the sequence.
  tokens = cross_block(ps, "xread", tokens, feats, cfg.heads);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    tokens = self_block(ps, "blk" + std::to_string(i), tokens, cfg.heads);
  }
  tokens = ln(ps, "ln_f", tokens);

  ScanpathHeads<T> heads;
  heads.spatial_logits =
      ops::add_rowvec(ops::matmul(tokens, ps.at("head_spatial.w")), ps.at("head_spatial.b"));
  heads.durations = ops::add_rowvec(ops::matmul(tokens, ps.at("head_dur.w")), ps.at("head_dur.b"));
  heads.term_logits =
      ops::add_rowvec(ops::matmul(tokens, ps.at("head_term.w")), ps.at("head_term.b"));
  return heads;
}

template <typename T>
Tensor<T> scanpath_loss(const ScanpathHeads<T>& heads, const std::vector<std::size_t>& gt_cells,
                        const std::vector<double>& gt_durations,
                        const std::vector<T>& gt_termination) {
  const std::size_t s = heads.spatial_logits.rows();
  if (gt_cells.size() != s || gt_durations.size() != s || gt_termination.size() != s) {
    throw std::invalid_argument("scanpath_loss: target length mismatch");
  }
  auto ce = ops::cross_entropy_logits(heads.spatial_logits, gt_cells);

  std::vector<T> dur_targets(s);
  for (std::size_t t = 0; t < s; ++t) dur_targets[t] = static_cast<T>(std::log1p(gt_durations[t]));
  auto dur = ops::l1_loss(heads.durations, Tensor<T>::from({s, 1}, std::move(dur_targets)));
  auto term = ops::bce_logits(heads.term_logits, gt_termination);
  return ops::add(ce, ops::add(ops::scale(dur, T(0.1)), ops::scale(term, T(0.1))));
}

template <typename T>
Scanpath decode_scanpath(const ModelState<T>& backbone, const ScanpathDecoder<T>& decoder,
                         const ImageGray& image, std::size_t task, std::size_t steps) {
  autograd::NoGradGuard no_grad;
  if (task >= decoder.config.n_tasks) {
    throw std::invalid_argument("decode_scanpath: unknown task id");
  }
  if (steps > decoder.config.steps) {
    throw std::invalid_argument("decode_scanpath: steps exceeds decoder capacity");
  }
  auto feats = encode(backbone, image).detach();

  Scanpath path;
  std::vector<std::pair<double, double>> coords{{0.5, 0.5}};
  for (std::size_t t = 0; t < steps; ++t) {
    auto heads = scanpath_forward(decoder, feats, task, coords);
    const std::size_t last = coords.size() - 1;
    auto logits = heads.spatial_logits.data();
    const std::size_t n = decoder.config.grid.patches();
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c) {
      if (logits[last * n + c] > logits[last * n + best]) best = c;
    }
    const auto center = metrics::cell_center(decoder.config.grid, best);
    const double dur =
        std::max(0.0, std::expm1(static_cast<double>(heads.durations.data()[last])));
    path.points.push_back(ScanpathPoint{center.first, center.second, dur});
    if (!path.termination.has_value() && heads.term_logits.data()[last] > T(0)) {
      path.termination = t;  // recorded only; rollout always runs `steps`
    }
    if (t + 1 < steps) coords.emplace_back(center.first, center.second);
  }
  path.validate();
  return path;
}

std::vector<SearchSample> make_search_dataset(std::uint64_t seed, std::size_t n_samples,
                                              const GridSpec& grid, std::size_t patch_px,
                                              std::size_t n_tasks, std::size_t path_len) {
  if (path_len > grid.patches()) {
    throw std::invalid_argument("make_search_dataset: path_len exceeds patch count");
  }
  if (n_tasks == 0 || n_tasks > 2) {
    throw std::invalid_argument("make_search_dataset: supports 1 or 2 tasks");
  }
  SyntheticDataset world = synth_world(seed, n_samples, grid, GazeRule::kIntensityOrder, patch_px);

  std::vector<SearchSample> out;
  out.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto& img = world.images[i];
    // Patch brightness recovered from the rendered image (peak pixel value is
    // monotone in the planted intensity).
    const std::size_t n = grid.patches();
    std::vector<double> score(n, 0.0);
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        const std::size_t p = y / patch_px * grid.cols + x / patch_px;
        score[p] = std::max(score[p], img.pixels[y * img.width + x]);
      }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t p = 0; p < n; ++p) order[p] = p;
    const std::size_t task = i % n_tasks;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return task == 0 ? score[a] > score[b] : score[a] < score[b];
    });

    SearchSample sample;
    sample.image = img;
    sample.task = task;
    for (std::size_t t = 0; t < path_len; ++t) {
      const auto c = metrics::cell_center(grid, order[t]);
      sample.path.points.push_back(ScanpathPoint{c.first, c.second, 0.08 + 0.3 * score[order[t]]});
    }
    out.push_back(std::move(sample));
  }
  return out;
}

template <typename T>
DecoderTrainReport train_scanpath_decoder(ScanpathDecoder<T>& decoder,
                                          const ModelState<T>& backbone,
                                          const std::vector<SearchSample>& samples,
                                          std::uint64_t seed) {
  if (samples.empty()) throw std::invalid_argument("train_scanpath_decoder: no samples");
  const auto& cfg = decoder.config;
  const auto t0 = std::chrono::steady_clock::now();

  // Frozen backbone features, computed once. The scanpath loss can never
  // reach backbone parameters through these detached tensors.
  std::vector<Tensor<T>> features;
  features.reserve(samples.size());
  {
    autograd::NoGradGuard no_grad;
    for (const auto& s : samples) features.push_back(encode(backbone, s.image).detach());
  }

  AdamWConfig<T> opt_cfg;
  opt_cfg.learning_rate = static_cast<T>(cfg.learning_rate);
  opt_cfg.weight_decay = static_cast<T>(cfg.weight_decay);
  AdamW<T> optimizer(opt_cfg, decoder.trainable());

  DecoderTrainReport report;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Cosine annealing over the epoch horizon.
    const double lr = cfg.eta_min +
                      0.5 * (cfg.learning_rate - cfg.eta_min) *
                          (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                          static_cast<double>(cfg.epochs)));
    optimizer.set_learning_rate(static_cast<T>(lr));

    Rng rng = Rng::stream(seed, {epoch, 0x5CA9});
    std::vector<std::size_t> order = rng.permutation(samples.size());
    double epoch_loss = 0.0;
    std::size_t batches = 0;

    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
      optimizer.zero_grad();
      const T inv = T(1) / static_cast<T>(hi - lo);
      double batch_loss = 0.0;
      for (std::size_t b = lo; b < hi; ++b) {
        const auto& s = samples[order[b]];
        const std::size_t steps = s.path.points.size();
        std::vector<std::pair<double, double>> coords{{0.5, 0.5}};
        std::vector<std::size_t> cells;
        std::vector<double> durations;
        std::vector<T> termination;
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : s.path.points) pts.emplace_back(p.x, p.y);
        const auto quantized = metrics::quantize(pts, cfg.grid);
        for (std::size_t t = 0; t < steps; ++t) {
          if (t + 1 < steps) coords.emplace_back(s.path.points[t].x, s.path.points[t].y);
          cells.push_back(quantized.cells[t]);
          durations.push_back(s.path.points[t].duration);
          termination.push_back(t + 1 == steps ? T(1) : T(0));
        }
        auto heads = scanpath_forward(decoder, features[order[b]], s.task, coords);
        auto loss = scanpath_loss(heads, cells, durations, termination);
        batch_loss += static_cast<double>(loss.item());
        ops::scale(loss, inv).backward();
      }
      optimizer.step();
      epoch_loss += batch_loss / static_cast<double>(hi - lo);
      ++batches;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

#define GW_INSTANTIATE_DECODER(T)                                                        \
  template struct ScanpathDecoder<T>;                                                    \
  template ScanpathHeads<T> scanpath_forward<T>(const ScanpathDecoder<T>&,               \
                                                const Tensor<T>&, std::size_t,           \
                                                const std::vector<std::pair<double, double>>&); \
  template Tensor<T> scanpath_loss<T>(const ScanpathHeads<T>&,                           \
                                      const std::vector<std::size_t>&,                   \
                                      const std::vector<double>&, const std::vector<T>&); \
  template Scanpath decode_scanpath<T>(const ModelState<T>&, const ScanpathDecoder<T>&,  \
                                       const ImageGray&, std::size_t, std::size_t);      \
  template DecoderTrainReport train_scanpath_decoder<T>(                                 \
      ScanpathDecoder<T>&, const ModelState<T>&, const std::vector<SearchSample>&,       \
      std::uint64_t);

GW_INSTANTIATE_DECODER(float)
GW_INSTANTIATE_DECODER(double)

#undef GW_INSTANTIATE_DECODER

}  // namespace gazeworld
