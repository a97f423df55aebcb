#include "gazeworld/model.hpp"

#include <cmath>

#include "gazeworld/rng.hpp"

namespace gazeworld {

using nlohmann::json;

namespace {
constexpr double kLnEps = 1e-5;
}

void ModelConfig::validate() const {
  grid.validate();
  if (patch_px == 0) throw std::invalid_argument("ModelConfig: patch_px must be >= 1");
  if (embed_dim == 0) throw std::invalid_argument("ModelConfig: embed_dim must be >= 1");
  if (encoder_heads == 0 || embed_dim % encoder_heads != 0) {
    throw std::invalid_argument("ModelConfig: embed_dim must be divisible by encoder_heads");
  }
  if (predictor_heads == 0 || embed_dim % predictor_heads != 0) {
    throw std::invalid_argument("ModelConfig: embed_dim must be divisible by predictor_heads");
  }
  if (encoder_layers == 0 || predictor_layers == 0 || completion_layers == 0) {
    throw std::invalid_argument("ModelConfig: layer counts must be >= 1");
  }
  if (max_seq_len < grid.patches()) {
    throw std::invalid_argument("ModelConfig: max_seq_len must be >= number of patches");
  }
  if (!(smooth_l1_beta > 0.0)) throw std::invalid_argument("ModelConfig: smooth_l1_beta <= 0");
  if (lambda_sc < 0.0) throw std::invalid_argument("ModelConfig: lambda_sc < 0");
}

ModelConfig ModelConfig::desk_scale(const GridSpec& grid, std::size_t embed_dim) {
  ModelConfig c;
  c.grid = grid;
  c.embed_dim = embed_dim;
  c.max_seq_len = grid.patches() + 1;
  return c;
}

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.grid = GridSpec{14, 14};
  c.patch_px = 16;
  c.embed_dim = 768;
  c.encoder_layers = 4;
  c.encoder_heads = 12;
  c.predictor_layers = 8;
  c.predictor_heads = 12;
  c.completion_layers = 2;
  c.max_seq_len = 14 * 14 + 1;
  return c;
}

json ModelConfig::to_json() const {
  return json{{"grid", {{"rows", grid.rows}, {"cols", grid.cols}}},
              {"patch_px", patch_px},
              {"embed_dim", embed_dim},
              {"encoder_layers", encoder_layers},
              {"encoder_heads", encoder_heads},
              {"predictor_layers", predictor_layers},
              {"predictor_heads", predictor_heads},
              {"completion_layers", completion_layers},
              {"max_seq_len", max_seq_len},
              {"smooth_l1_beta", smooth_l1_beta},
              {"lambda_sc", lambda_sc},
              {"symmetric_ar_norm", symmetric_ar_norm}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.grid = GridSpec{j.at("grid").at("rows").get<std::size_t>(),
                    j.at("grid").at("cols").get<std::size_t>()};
  c.patch_px = j.at("patch_px").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.encoder_heads = j.at("encoder_heads").get<std::size_t>();
  c.predictor_layers = j.at("predictor_layers").get<std::size_t>();
  c.predictor_heads = j.at("predictor_heads").get<std::size_t>();
  c.completion_layers = j.at("completion_layers").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.smooth_l1_beta = j.at("smooth_l1_beta").get<double>();
  c.lambda_sc = j.at("lambda_sc").get<double>();
  c.symmetric_ar_norm = j.at("symmetric_ar_norm").get<bool>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameter construction

namespace {

template <typename T>
struct ParamBuilder {
  ParamStore<T>& store;
  Rng& rng;

  Tensor<T>& weight(const std::string& name, Shape shape) {
    std::vector<T> data(shape_size(shape));
    for (auto& v : data) v = static_cast<T>(rng.normal(0.0, 0.02));
    auto& t = store.add(name, Tensor<T>::from(std::move(shape), std::move(data)));
    t.set_requires_grad(true);
    return t;
  }
  Tensor<T>& zeros(const std::string& name, Shape shape) {
    auto& t = store.add(name, Tensor<T>::zeros(std::move(shape)));
    t.set_requires_grad(true);
    return t;
  }
  Tensor<T>& ones(const std::string& name, Shape shape) {
    auto& t = store.add(name, Tensor<T>::full(std::move(shape), T(1)));
    t.set_requires_grad(true);
    return t;
  }
  void layer_norm(const std::string& prefix, std::size_t d) {
    ones(prefix + ".g", {1, d});
    zeros(prefix + ".b", {1, d});
  }
  void attention(const std::string& prefix, std::size_t d) {
    weight(prefix + ".wq", {d, d});
    zeros(prefix + ".bq", {1, d});
    weight(prefix + ".wk", {d, d});
    zeros(prefix + ".bk", {1, d});
    weight(prefix + ".wv", {d, d});
    zeros(prefix + ".bv", {1, d});
    weight(prefix + ".wo", {d, d});
    zeros(prefix + ".bo", {1, d});
  }
  void mlp(const std::string& prefix, std::size_t d) {
    weight(prefix + ".w1", {d, 4 * d});
    zeros(prefix + ".b1", {1, 4 * d});
    weight(prefix + ".w2", {4 * d, d});
    zeros(prefix + ".b2", {1, d});
  }
  void self_block(const std::string& prefix, std::size_t d) {
    layer_norm(prefix + ".ln1", d);
    attention(prefix + ".attn", d);
    layer_norm(prefix + ".ln2", d);
    mlp(prefix + ".mlp", d);
  }
  void cross_block(const std::string& prefix, std::size_t d) {
    layer_norm(prefix + ".lnq", d);
    attention(prefix + ".attn", d);
    layer_norm(prefix + ".ln2", d);
    mlp(prefix + ".mlp", d);
  }
};

}  // namespace

template <typename T>
ModelState<T> ModelState<T>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelState<T> s;
  s.config = config;
  Rng rng = Rng::stream(seed, {0xA0DE1});
  ParamBuilder<T> b{s.online, rng};

  const std::size_t d = config.embed_dim;
  const std::size_t N = config.grid.patches();
  const std::size_t P = config.patch_px * config.patch_px;

  b.weight("encoder.patch_embed.w", {P, d});
  b.zeros("encoder.patch_embed.b", {1, d});
  b.weight("encoder.pos", {N, d});
  for (std::size_t i = 0; i < config.encoder_layers; ++i) {
    b.self_block("encoder.b" + std::to_string(i), d);
  }
  b.layer_norm("encoder.ln_f", d);

  b.weight("embedder.wz", {d, d});
  b.weight("embedder.wd", {1, d});
  b.weight("spatial.row", {config.grid.rows, d});
  b.weight("spatial.col", {config.grid.cols, d});
  b.weight("rank_embed", {config.max_seq_len, d});

  for (std::size_t i = 0; i < config.predictor_layers; ++i) {
    b.self_block("predictor.b" + std::to_string(i), d);
  }
  b.layer_norm("predictor.ln_f", d);

  b.weight("head.w1", {d, d});
  b.zeros("head.b1", {1, d});
  b.weight("head.w2", {d, d});
  b.zeros("head.b2", {1, d});

  for (std::size_t i = 0; i < config.completion_layers; ++i) {
    b.cross_block("completion.b" + std::to_string(i), d);
  }
  b.layer_norm("completion.ln_f", d);
  b.weight("completion.out.w", {d, d});
  b.zeros("completion.out.b", {1, d});

  b.weight("mask_token", {1, d});
  b.weight("readout_token", {1, d});

  // EMA target starts as an exact copy of the online encoder and never
  // carries gradients.
  for (const auto& [name, t] : s.online.items) {
    if (name.starts_with("encoder.")) s.target.add(name, t.detach());
  }
  return s;
}

template <typename T>
std::vector<Tensor<T>> ModelState<T>::online_encoder_params() {
  std::vector<Tensor<T>> out;
  for (const auto& [name, t] : online.items) {
    if (name.starts_with("encoder.")) out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward passes

namespace {

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
  heads_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    auto weights = causal ? ops::softmax_causal(scores) : ops::softmax_rows(scores);
    heads_out.push_back(ops::matmul(weights, vh));
  }
  auto merged = ops::concat_cols(heads_out);
  return ops::add_rowvec(ops::matmul(merged, ps.at(prefix + ".wo")), ps.at(prefix + ".bo"));
}

template <typename T>
Tensor<T> mlp(const ParamStore<T>& ps, const std::string& prefix, const Tensor<T>& x) {
  auto hidden = ops::gelu(
      ops::add_rowvec(ops::matmul(x, ps.at(prefix + ".w1")), ps.at(prefix + ".b1")));
  return ops::add_rowvec(ops::matmul(hidden, ps.at(prefix + ".w2")), ps.at(prefix + ".b2"));
}

// Pre-norm residual transformer block.
template <typename T>
Tensor<T> self_block(const ParamStore<T>& ps, const std::string& prefix, Tensor<T> x,
                     std::size_t heads, bool causal) {
  auto n1 = ln(ps, prefix + ".ln1", x);
  x = ops::add(x, attention(ps, prefix + ".attn", n1, n1, heads, causal));
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

// Flattens the image into one row of patch_px*patch_px pixels per grid cell,
// raster order.
template <typename T>
Tensor<T> patchify(const ModelConfig& cfg, const ImageGray& image) {
  image.validate();
  if (image.width != cfg.grid.cols * cfg.patch_px || image.height != cfg.grid.rows * cfg.patch_px) {
    throw std::invalid_argument("encode: image dimensions do not match grid times patch_px");
  }
  const std::size_t N = cfg.grid.patches();
  const std::size_t P = cfg.patch_px * cfg.patch_px;
  std::vector<T> data(N * P);
  for (std::size_t p = 0; p < N; ++p) {
    const std::size_t r0 = p / cfg.grid.cols * cfg.patch_px;
    const std::size_t c0 = p % cfg.grid.cols * cfg.patch_px;
    for (std::size_t y = 0; y < cfg.patch_px; ++y) {
      for (std::size_t x = 0; x < cfg.patch_px; ++x) {
        data[p * P + y * cfg.patch_px + x] =
            static_cast<T>(image.pixels[(r0 + y) * image.width + c0 + x]);
      }
    }
  }
  return Tensor<T>::from({N, P}, std::move(data));
}

template <typename T>
Tensor<T> encoder_forward(const ModelConfig& cfg, const ParamStore<T>& ps,
                          const ImageGray& image) {
  auto x = patchify<T>(cfg, image);
  auto z = ops::add(
      ops::add_rowvec(ops::matmul(x, ps.at("encoder.patch_embed.w")),
                      ps.at("encoder.patch_embed.b")),
      ps.at("encoder.pos"));
  for (std::size_t i = 0; i < cfg.encoder_layers; ++i) {
    z = self_block(ps, "encoder.b" + std::to_string(i), z, cfg.encoder_heads, false);
  }
  return ln(ps, "encoder.ln_f", z);
}

}  // namespace

template <typename T>
Tensor<T> encode(const ModelState<T>& model, const ImageGray& image) {
  return encoder_forward(model.config, model.online, image);
}

template <typename T>
Tensor<T> target_encode(const ModelState<T>& model, const ImageGray& image) {
  autograd::NoGradGuard no_grad;
  return encoder_forward(model.config, model.target, image);
}

template <typename T>
Tensor<T> spatial_embedding(const ModelState<T>& model, std::size_t patch) {
  const auto& grid = model.config.grid;
  if (patch >= grid.patches()) throw std::invalid_argument("spatial_embedding: patch out of range");
  return ops::add(ops::gather_rows(model.online.at("spatial.row"), {patch / grid.cols}),
                  ops::gather_rows(model.online.at("spatial.col"), {patch % grid.cols}));
}

template <typename T>
Tensor<T> embed_fixation(const ModelState<T>& model, const Tensor<T>& z_row, std::size_t patch,
                         std::size_t rank, double dwell) {
  if (rank >= model.config.max_seq_len) {
    throw std::invalid_argument("embed_fixation: rank exceeds max_seq_len");
  }
  if (!(dwell > 0.0)) throw std::invalid_argument("embed_fixation: dwell must be positive");
  auto h = ops::matmul(z_row, model.online.at("embedder.wz"));
  h = ops::add(h, spatial_embedding(model, patch));
  h = ops::add(h, ops::gather_rows(model.online.at("rank_embed"), {rank}));
  h = ops::add(h, ops::scale(model.online.at("embedder.wd"),
                             static_cast<T>(std::log1p(dwell))));
  return h;
}

template <typename T>
Tensor<T> embed_sequence(const ModelState<T>& model, const Tensor<T>& z,
                         const FixationSequence& seq) {
  seq.validate();
  if (seq.grid != model.config.grid) {
    throw std::invalid_argument("embed_sequence: sequence grid does not match model grid");
  }
  std::vector<Tensor<T>> rows;
  rows.reserve(seq.length());
  for (std::size_t i = 0; i < seq.length(); ++i) {
    auto z_row = ops::gather_rows(z, {seq.visited[i]});
    rows.push_back(embed_fixation(model, z_row, seq.visited[i], i, seq.dwell[i]));
  }
  return ops::stack_rows(rows);
}

template <typename T>
PredictOutput<T> predict_sequence(const ModelState<T>& model, const Tensor<T>& tokens) {
  const std::size_t len = tokens.rows();
  if (len == 0) throw std::invalid_argument("predict_sequence: empty token sequence");
  if (len > model.config.max_seq_len) {
    throw std::invalid_argument("predict_sequence: sequence longer than max_seq_len");
  }
  const auto& ps = model.online;
  Tensor<T> h = tokens;
  for (std::size_t i = 0; i < model.config.predictor_layers; ++i) {
    h = self_block(ps, "predictor.b" + std::to_string(i), h, model.config.predictor_heads, true);
  }
  h = ln(ps, "predictor.ln_f", h);

  PredictOutput<T> out;
  out.context = h;
  if (len >= 2) {
    std::vector<std::size_t> idx(len - 1);
    for (std::size_t i = 0; i + 1 < len; ++i) idx[i] = i;
    auto trunk = ops::gather_rows(h, std::move(idx));
    auto hidden = ops::gelu(
        ops::add_rowvec(ops::matmul(trunk, ps.at("head.w1")), ps.at("head.b1")));
    out.predictions =
        ops::add_rowvec(ops::matmul(hidden, ps.at("head.w2")), ps.at("head.b2"));
  }
  return out;
}

template <typename T>
Tensor<T> complete_unvisited(const ModelState<T>& model, const Tensor<T>& context,
                             const std::vector<std::size_t>& unvisited) {
  const std::size_t d = model.config.embed_dim;
  if (unvisited.empty()) return Tensor<T>::from({0, d}, {});
  const auto& grid = model.config.grid;
  const auto& ps = model.online;

  std::vector<std::size_t> row_idx, col_idx;
  row_idx.reserve(unvisited.size());
  col_idx.reserve(unvisited.size());
  for (std::size_t p : unvisited) {
    if (p >= grid.patches()) throw std::invalid_argument("complete_unvisited: patch out of range");
    row_idx.push_back(p / grid.cols);
    col_idx.push_back(p % grid.cols);
  }
  auto embeddings = ops::add(ops::gather_rows(ps.at("spatial.row"), std::move(row_idx)),
                             ops::gather_rows(ps.at("spatial.col"), std::move(col_idx)));
  auto queries = ops::add_rowvec(embeddings, ps.at("mask_token"));
  for (std::size_t i = 0; i < model.config.completion_layers; ++i) {
    queries = cross_block(ps, "completion.b" + std::to_string(i), queries, context,
                          model.config.predictor_heads);
  }
  queries = ln(ps, "completion.ln_f", queries);
  return ops::add_rowvec(ops::matmul(queries, ps.at("completion.out.w")),
                         ps.at("completion.out.b"));
}

template <typename T>
Tensor<T> loss_ar(const ModelState<T>& model, const Tensor<T>& predictions,
                  const Tensor<T>& targets) {
  if (!predictions.defined() || predictions.rows() == 0) {
    throw std::invalid_argument("loss_ar: needs at least one prediction (L >= 2)");
  }
  const T beta = static_cast<T>(model.config.smooth_l1_beta);
  auto pred_term = ops::layer_norm(predictions, static_cast<T>(kLnEps));
  auto target_term = targets.detach();
  if (model.config.symmetric_ar_norm) {
    target_term = ops::layer_norm(target_term, static_cast<T>(kLnEps));
  }
  return ops::smooth_l1(pred_term, target_term, beta);
}

template <typename T>
Tensor<T> loss_sc(const ModelState<T>& model, const Tensor<T>& completions,
                  const Tensor<T>& targets) {
  if (!completions.defined() || completions.rows() == 0) return Tensor<T>::scalar(T(0));
  const T beta = static_cast<T>(model.config.smooth_l1_beta);
  auto pred_term = ops::layer_norm(completions, static_cast<T>(kLnEps));
  auto target_term = ops::layer_norm(targets.detach(), static_cast<T>(kLnEps));
  return ops::smooth_l1(pred_term, target_term, beta);
}

template <typename T>
Tensor<T> loss_total(const Tensor<T>& ar, const Tensor<T>& sc, T lambda) {
  if (lambda < T(0)) throw std::invalid_argument("loss_total: lambda must be >= 0");
  return ops::add(ar, ops::scale(sc, lambda));
}

template <typename T>
SampleLosses<T> sample_losses(const ModelState<T>& model, const ImageGray& image,
                              const FixationSequence& seq, T lambda) {
  SampleLosses<T> out;
  if (seq.length() < 2) return out;  // caller skips; Eq-style AR loss needs L >= 2

  auto z = encode(model, image);
  auto z_bar = target_encode(model, image);

  auto tokens = embed_sequence(model, z, seq);
  auto predicted = predict_sequence(model, tokens);

  std::vector<std::size_t> ar_targets(seq.visited.begin() + 1, seq.visited.end());
  out.ar = loss_ar(model, predicted.predictions, ops::gather_rows(z_bar, std::move(ar_targets)));

  const auto unvisited = unvisited_set(seq);
  if (unvisited.empty()) {
    out.sc = Tensor<T>::scalar(T(0));
  } else {
    auto completions = complete_unvisited(model, predicted.context, unvisited);
    out.sc = loss_sc(model, completions, ops::gather_rows(z_bar, unvisited));
  }
  out.total = loss_total(out.ar, out.sc, lambda);
  out.has_ar = true;
  return out;
}

// ---------------------------------------------------------------------------

#define GW_INSTANTIATE_MODEL(T)                                                            \
  template struct ModelState<T>;                                                           \
  template Tensor<T> encode<T>(const ModelState<T>&, const ImageGray&);                    \
  template Tensor<T> target_encode<T>(const ModelState<T>&, const ImageGray&);             \
  template Tensor<T> spatial_embedding<T>(const ModelState<T>&, std::size_t);              \
  template Tensor<T> embed_fixation<T>(const ModelState<T>&, const Tensor<T>&,             \
                                       std::size_t, std::size_t, double);                  \
  template Tensor<T> embed_sequence<T>(const ModelState<T>&, const Tensor<T>&,             \
                                       const FixationSequence&);                           \
  template PredictOutput<T> predict_sequence<T>(const ModelState<T>&, const Tensor<T>&);   \
  template Tensor<T> complete_unvisited<T>(const ModelState<T>&, const Tensor<T>&,         \
                                           const std::vector<std::size_t>&);               \
  template Tensor<T> loss_ar<T>(const ModelState<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> loss_sc<T>(const ModelState<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> loss_total<T>(const Tensor<T>&, const Tensor<T>&, T);                 \
  template SampleLosses<T> sample_losses<T>(const ModelState<T>&, const ImageGray&,        \
                                            const FixationSequence&, T);

GW_INSTANTIATE_MODEL(float)
GW_INSTANTIATE_MODEL(double)

#undef GW_INSTANTIATE_MODEL

}  // namespace gazeworld
