#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "gazeworld/model.hpp"
#include "gazeworld/optim.hpp"
#include "gazeworld/rng.hpp"

using namespace gazeworld;

namespace {

ModelConfig tiny_config(std::size_t d = 8, std::size_t heads = 2) {
  ModelConfig c = ModelConfig::desk_scale(GridSpec{2, 2}, d);
  c.patch_px = 4;
  c.encoder_heads = heads;
  c.predictor_heads = heads;
  c.encoder_layers = 1;
  c.predictor_layers = 1;
  c.completion_layers = 1;
  return c;
}

ImageGray random_image(Rng& rng, const ModelConfig& cfg) {
  ImageGray img;
  img.width = cfg.grid.cols * cfg.patch_px;
  img.height = cfg.grid.rows * cfg.patch_px;
  img.id = "test";
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    img.pixels.push_back(rng.uniform());
  }
  return img;
}

FixationSequence make_seq(const ModelConfig& cfg, std::vector<std::size_t> visited) {
  FixationSequence seq;
  seq.grid = cfg.grid;
  seq.visited = std::move(visited);
  seq.dwell.assign(seq.visited.size(), 0.25);
  return seq;
}

Tensor<double> random_tokens(Rng& rng, std::size_t len, std::size_t d) {
  std::vector<double> data(len * d);
  for (auto& v : data) v = rng.normal();
  return Tensor<double>::from({len, d}, std::move(data));
}

bool bits_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("encode shape contract and determinism") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 1);
  Rng rng(2);
  auto img = random_image(rng, cfg);
  auto z1 = encode(model, img);
  auto z2 = encode(model, img);
  CHECK(z1.shape() == Shape{cfg.grid.patches(), cfg.embed_dim});
  CHECK(bits_equal(z1.data(), z2.data()));

  ImageGray bad = img;
  bad.width += cfg.patch_px;
  for (std::size_t i = 0; i < cfg.patch_px * bad.height; ++i) bad.pixels.push_back(0.0);
  CHECK_THROWS_AS(encode(model, bad), std::invalid_argument);
}

TEST_CASE("patch embedding is per-patch: swapping patches swaps rows") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 1);
  Rng rng(3);
  auto img = random_image(rng, cfg);

  ImageGray swapped = img;  // swap patch 0 and patch 3 pixel blocks
  const std::size_t px = cfg.patch_px;
  for (std::size_t y = 0; y < px; ++y) {
    for (std::size_t x = 0; x < px; ++x) {
      std::swap(swapped.pixels[y * img.width + x],
                swapped.pixels[(px + y) * img.width + px + x]);
    }
  }

  // Patch-embedding stage only (linear map per patch row, before position
  // embeddings and attention).
  auto embed_stage = [&](const ImageGray& im) {
    const std::size_t n = cfg.grid.patches(), p2 = px * px;
    std::vector<double> rows(n * p2);
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t r0 = p / cfg.grid.cols * px, c0 = p % cfg.grid.cols * px;
      for (std::size_t y = 0; y < px; ++y) {
        for (std::size_t x = 0; x < px; ++x) {
          rows[p * p2 + y * px + x] = im.pixels[(r0 + y) * im.width + c0 + x];
        }
      }
    }
    auto xt = Tensor<double>::from({n, p2}, std::move(rows));
    return ops::add_rowvec(ops::matmul(xt, model.online.at("encoder.patch_embed.w")),
                           model.online.at("encoder.patch_embed.b"));
  };
  auto e0 = embed_stage(img);
  auto e1 = embed_stage(swapped);
  const std::size_t d = cfg.embed_dim;
  for (std::size_t j = 0; j < d; ++j) {
    CHECK(e1.data()[0 * d + j] == e0.data()[3 * d + j]);
    CHECK(e1.data()[3 * d + j] == e0.data()[0 * d + j]);
    CHECK(e1.data()[1 * d + j] == e0.data()[1 * d + j]);
    CHECK(e1.data()[2 * d + j] == e0.data()[2 * d + j]);
  }
}

TEST_CASE("target encoder matches online at init and is isolated afterwards") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 7);
  Rng rng(8);
  auto img = random_image(rng, cfg);

  auto z = encode(model, img);
  auto zbar = target_encode(model, img);
  CHECK(bits_equal(z.data(), zbar.data()));
  CHECK_FALSE(zbar.requires_grad());

  auto seq = make_seq(cfg, {0, 2, 3});
  auto losses = sample_losses(model, img, seq, 1.0);
  REQUIRE(losses.has_ar);
  losses.total.backward();
  for (auto& [name, t] : model.target.items) {
    CHECK_FALSE(t.has_grad());
    CHECK_FALSE(t.requires_grad());
  }
  // every online module received gradient somewhere
  bool any = false;
  for (auto& [name, t] : model.online.items) any = any || t.has_grad();
  CHECK(any);

  SUBCASE("after a tau=0.5 EMA step the target differs from old and new online") {
    auto z_old = encode(model, img).detach();
    // move online params with one crude gradient step
    for (auto& t : model.online_encoder_params()) {
      auto buf = t.raw_data();
      for (auto& v : buf) v += 0.01;
    }
    auto z_new = encode(model, img).detach();
    auto targets = model.target_params();
    ema_update(targets, model.online_encoder_params(), 0.5);
    auto z_tgt = target_encode(model, img);
    CHECK_FALSE(bits_equal(z_tgt.data(), z_old.data()));
    CHECK_FALSE(bits_equal(z_tgt.data(), z_new.data()));
  }
}

TEST_CASE("embed_fixation structure") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 4);
  Rng rng(5);
  auto img = random_image(rng, cfg);
  auto z = encode(model, img);
  auto z_row = ops::gather_rows(z, {1});

  auto h = embed_fixation(model, z_row, 1, 0, 0.3);
  CHECK(h.shape() == Shape{1, cfg.embed_dim});

  SUBCASE("rank changes the embedding") {
    auto h2 = embed_fixation(model, z_row, 1, 1, 0.3);
    CHECK_FALSE(bits_equal(h.data(), h2.data()));
  }
  SUBCASE("duration path is linear in log1p(dwell)") {
    const double d1 = 0.3, d2 = 1.7;
    auto ha = embed_fixation(model, z_row, 1, 0, d1);
    auto hb = embed_fixation(model, z_row, 1, 0, d2);
    const auto wd = model.online.at("embedder.wd").data();
    const double delta = std::log1p(d2) - std::log1p(d1);
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
      CHECK(hb.data()[j] - ha.data()[j] == doctest::Approx(wd[j] * delta).epsilon(1e-10));
    }
  }
  SUBCASE("rank overflow and nonpositive dwell are errors") {
    CHECK_THROWS_AS(embed_fixation(model, z_row, 1, cfg.max_seq_len, 0.3),
                    std::invalid_argument);
    CHECK_THROWS_AS(embed_fixation(model, z_row, 1, 0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("predict_sequence causality is bit-exact") {
  auto cfg = tiny_config();
  cfg.max_seq_len = 12;
  auto model = ModelState<double>::init(cfg, 9);
  Rng rng(10);

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 2 + rng.below(8);
    auto tokens = random_tokens(rng, len, cfg.embed_dim);
    auto base = predict_sequence(model, tokens);

    const std::size_t j = 1 + rng.below(len - 1);  // perturbed token position
    auto data = std::vector<double>(tokens.data().begin(), tokens.data().end());
    for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
      data[j * cfg.embed_dim + c] += rng.normal(0.0, 3.0);
    }
    auto perturbed = predict_sequence(model, Tensor<double>::from({len, cfg.embed_dim}, data));

    // predictions strictly before the perturbed token are bit-identical
    for (std::size_t r = 0; r < j - 1 + 0; ++r) {
      for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
        CHECK(base.predictions.data()[r * cfg.embed_dim + c] ==
              perturbed.predictions.data()[r * cfg.embed_dim + c]);
      }
    }
    // context rows before the perturbed position are bit-identical too
    for (std::size_t r = 0; r < j; ++r) {
      for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
        CHECK(base.context.data()[r * cfg.embed_dim + c] ==
              perturbed.context.data()[r * cfg.embed_dim + c]);
      }
    }
  }
}

TEST_CASE("predict_sequence edge cases") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 11);
  Rng rng(12);

  SUBCASE("L=1 yields context only") {
    auto out = predict_sequence(model, random_tokens(rng, 1, cfg.embed_dim));
    CHECK(out.context.rows() == 1);
    CHECK_FALSE(out.predictions.defined());
  }
  SUBCASE("sequence longer than max_seq_len is rejected") {
    CHECK_THROWS_AS(predict_sequence(model, random_tokens(rng, cfg.max_seq_len + 1,
                                                          cfg.embed_dim)),
                    std::invalid_argument);
  }
  SUBCASE("changing the first token changes every prediction") {
    auto tokens = random_tokens(rng, 4, cfg.embed_dim);
    auto base = predict_sequence(model, tokens);
    auto data = std::vector<double>(tokens.data().begin(), tokens.data().end());
    data[0] += 1.0;
    auto out = predict_sequence(model, Tensor<double>::from({4, cfg.embed_dim}, data));
    for (std::size_t r = 0; r < 3; ++r) {
      bool differs = false;
      for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
        differs = differs ||
                  base.predictions.data()[r * cfg.embed_dim + c] !=
                      out.predictions.data()[r * cfg.embed_dim + c];
      }
      CHECK(differs);
    }
  }
}

TEST_CASE("complete_unvisited") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 13);
  Rng rng(14);
  auto context = random_tokens(rng, 3, cfg.embed_dim);

  SUBCASE("one output row per unvisited patch") {
    auto out = complete_unvisited(model, context, {1, 3});
    CHECK(out.shape() == Shape{2, cfg.embed_dim});
  }
  SUBCASE("empty set yields empty output and zero SC loss") {
    auto out = complete_unvisited(model, context, {});
    CHECK(out.rows() == 0);
    auto l = loss_sc(model, out, out);
    CHECK(l.item() == 0.0);
  }
  SUBCASE("patches with equal spatial embeddings complete identically") {
    // Patches 1 (row 0, col 1) and 3 (row 1, col 1): force equal embeddings
    // by copying row-embedding 1 into row-embedding 0.
    auto rows = model.online.at("spatial.row").raw_data();
    const std::size_t d = cfg.embed_dim;
    for (std::size_t j = 0; j < d; ++j) rows[j] = rows[d + j];
    auto out = complete_unvisited(model, context, {1, 3});
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(out.data()[j] == out.data()[d + j]);
    }
  }
}

TEST_CASE("loss values and stop-gradient placement") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 15);
  Rng rng(16);

  SUBCASE("loss_ar is zero when LN(pred) equals target") {
    auto pred = random_tokens(rng, 2, cfg.embed_dim);
    auto target = ops::layer_norm(pred, 1e-5).detach();
    CHECK(loss_ar(model, pred, target).item() == 0.0);
  }
  SUBCASE("loss_sc is zero when completions equal targets") {
    auto r = random_tokens(rng, 2, cfg.embed_dim);
    CHECK(loss_sc(model, r, r).item() == doctest::Approx(0.0));
  }
  SUBCASE("hand-computed 2-vector AR loss, d=2") {
    ModelConfig c2 = tiny_config(2, 1);
    auto m2 = ModelState<double>::init(c2, 17);
    auto pred = Tensor<double>::from({1, 2}, {1.0, 3.0});
    auto target = Tensor<double>::from({1, 2}, {0.5, -0.25});
    // LN([1,3]) with eps: mean 2, var 1 -> [(1-2)/s, (3-2)/s], s=sqrt(1+1e-5)
    const double s = std::sqrt(1.0 + 1e-5);
    const double y0 = -1.0 / s, y1 = 1.0 / s;
    auto huber = [](double d) {
      return std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
    };
    const double expect = (huber(y0 - 0.5) + huber(y1 + 0.25)) / 2.0;
    CHECK(loss_ar(m2, pred, target).item() == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("hand-computed single-patch SC loss, d=2") {
    ModelConfig c2 = tiny_config(2, 1);
    auto m2 = ModelState<double>::init(c2, 18);
    auto r = Tensor<double>::from({1, 2}, {2.0, 0.0});
    auto t = Tensor<double>::from({1, 2}, {-4.0, 4.0});
    // both sides normalized: LN(r) = [1/s, -1/s], LN(t) = [-1/s', 1/s']
    const double s = std::sqrt(1.0 + 1e-5);   // var(r)=1
    const double s2 = std::sqrt(16.0 + 1e-5); // var(t)=16
    const double d0 = 1.0 / s - -4.0 / s2;
    const double d1 = -1.0 / s - 4.0 / s2;
    auto huber = [](double d) {
      return std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
    };
    const double expect = (huber(d0) + huber(d1)) / 2.0;
    CHECK(loss_sc(m2, r, t).item() == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("loss_total combination") {
    auto a = Tensor<double>::scalar(0.3);
    auto b = Tensor<double>::scalar(0.2);
    CHECK(loss_total(a, b, 0.0).item() == doctest::Approx(0.3));
    CHECK(loss_total(a, b, 1.0).item() == doctest::Approx(0.5));
  }
}

TEST_CASE("completion-decoder gradients scale linearly with lambda") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 19);
  Rng rng(20);
  auto img = random_image(rng, cfg);
  auto seq = make_seq(cfg, {0, 2});

  auto grads_for = [&](double lambda) {
    for (auto& [name, t] : model.online.items) t.zero_grad();
    auto losses = sample_losses(model, img, seq, lambda);
    losses.total.backward();
    std::vector<double> out;
    for (auto& [name, t] : model.online.items) {
      if (name.starts_with("completion.")) {
        out.insert(out.end(), t.grad().begin(), t.grad().end());
      }
    }
    return out;
  };
  auto g1 = grads_for(1.0);
  auto g2 = grads_for(2.0);
  REQUIRE(g1.size() == g2.size());
  double max_ratio_err = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) {
    if (std::abs(g1[i]) > 1e-9) {
      max_ratio_err = std::max(max_ratio_err, std::abs(g2[i] / g1[i] - 2.0));
    }
  }
  CHECK(max_ratio_err < 1e-9);
}

TEST_CASE("coverage partition: AR targets, completion targets, and s1 tile the grid") {
  auto cfg = tiny_config();
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = cfg.grid.patches();
    const std::size_t len = 1 + rng.below(n);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    perm.resize(len);
    auto seq = make_seq(cfg, perm);
    auto u = unvisited_set(seq);

    std::set<std::size_t> tiles;
    tiles.insert(seq.visited[0]);
    for (std::size_t i = 1; i < seq.visited.size(); ++i) {
      CHECK(tiles.insert(seq.visited[i]).second);  // AR targets disjoint from s1
    }
    for (std::size_t p : u) CHECK(tiles.insert(p).second);
    CHECK(tiles.size() == n);
  }
}

TEST_CASE("full-model gradient check on a tiny instance") {
  ModelConfig cfg = tiny_config(4, 2);
  auto model = ModelState<double>::init(cfg, 23);
  Rng rng(24);
  auto img = random_image(rng, cfg);
  auto seq = make_seq(cfg, {2, 0, 3});

  auto f = [&] { return sample_losses(model, img, seq, 1.0).total; };
  const auto report = grad_check(f, model.online_params(), 1e-5);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("sample_losses skips L<2 and determinism holds") {
  auto cfg = tiny_config();
  auto model = ModelState<double>::init(cfg, 25);
  Rng rng(26);
  auto img = random_image(rng, cfg);

  auto short_losses = sample_losses(model, img, make_seq(cfg, {1}), 1.0);
  CHECK_FALSE(short_losses.has_ar);

  auto seq = make_seq(cfg, {1, 2, 0});
  auto a = sample_losses(model, img, seq, 1.0);
  auto b = sample_losses(model, img, seq, 1.0);
  CHECK(a.total.item() == b.total.item());
}

TEST_CASE("model config serialization round trip and validation") {
  auto cfg = tiny_config();
  auto j = cfg.to_json();
  auto back = ModelConfig::from_json(j);
  CHECK(back == cfg);

  ModelConfig bad = cfg;
  bad.embed_dim = 7;  // not divisible by heads
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ModelConfig bad2 = cfg;
  bad2.max_seq_len = 1;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);

  auto paper = ModelConfig::paper_scale();
  CHECK(paper.embed_dim == 768);
  CHECK(paper.predictor_layers == 8);
  CHECK(paper.predictor_heads == 12);
  paper.validate();
}
