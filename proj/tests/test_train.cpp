#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "gazeworld/train.hpp"

using namespace gazeworld;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model() {
  ModelConfig c = ModelConfig::desk_scale(GridSpec{2, 2}, 8);
  c.patch_px = 4;
  c.encoder_layers = 1;
  c.predictor_layers = 1;
  c.completion_layers = 1;
  c.encoder_heads = 2;
  c.predictor_heads = 2;
  return c;
}

TrainConfig small_train(std::size_t epochs = 2) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.learning_rate = 1e-3;
  t.seed = 42;
  t.precision = "float64";
  return t;
}

SyntheticDataset small_data(std::uint64_t seed = 5, std::size_t n = 12) {
  return synth_world(seed, n, GridSpec{2, 2}, GazeRule::kIntensityOrder, 4);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool params_equal(ModelState<double>& a, ModelState<double>& b) {
  if (a.online.items.size() != b.online.items.size()) return false;
  for (std::size_t i = 0; i < a.online.items.size(); ++i) {
    const auto& [n1, t1] = a.online.items[i];
    const auto& [n2, t2] = b.online.items[i];
    if (n1 != n2 || t1.size() != t2.size()) return false;
    if (std::memcmp(t1.data().data(), t2.data().data(), t1.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.target.items.size(); ++i) {
    if (std::memcmp(a.target.items[i].second.data().data(),
                    b.target.items[i].second.data().data(),
                    a.target.items[i].second.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("pretrain_step skips short sequences") {
  auto mc = small_model();
  auto model = ModelState<double>::init(mc, 1);
  AdamW<double> opt(AdamWConfig<double>{}, model.online_params());
  auto ds = small_data();
  auto seqs = std::vector<FixationSequence>{};
  for (const auto& r : ds.records) seqs.push_back(sequence_from_record(r, ds.grid));

  SUBCASE("an all-short batch performs no update") {
    FixationSequence short_seq;
    short_seq.grid = mc.grid;
    short_seq.visited = {1};
    short_seq.dwell = {0.2};
    std::vector<BatchSample> batch{{&ds.images[0], &short_seq}};
    auto before = model.online.items[0].second.data();
    std::vector<double> snapshot(before.begin(), before.end());
    auto out = pretrain_step(model, opt, batch, 0.998, 1.0);
    CHECK_FALSE(out.performed);
    CHECK(out.skipped == 1);
    CHECK(opt.step_count() == 0);
    auto after = model.online.items[0].second.data();
    CHECK(std::equal(after.begin(), after.end(), snapshot.begin()));
  }
  SUBCASE("two identical samples give the same loss as one") {
    auto m1 = ModelState<double>::init(mc, 1);
    AdamW<double> o1(AdamWConfig<double>{}, m1.online_params());
    std::vector<BatchSample> one{{&ds.images[0], &seqs[0]}};
    auto r1 = pretrain_step(m1, o1, one, 0.998, 1.0);

    auto m2 = ModelState<double>::init(mc, 1);
    AdamW<double> o2(AdamWConfig<double>{}, m2.online_params());
    std::vector<BatchSample> two{{&ds.images[0], &seqs[0]}, {&ds.images[0], &seqs[0]}};
    auto r2 = pretrain_step(m2, o2, two, 0.998, 1.0);
    CHECK(r1.l_total == doctest::Approx(r2.l_total).epsilon(1e-12));
  }
  SUBCASE("optimizer step never touches target params; EMA never touches online") {
    std::vector<std::vector<double>> target_before;
    for (auto& [n, t] : model.target.items) {
      target_before.emplace_back(t.data().begin(), t.data().end());
    }
    opt.zero_grad();
    auto losses = sample_losses(model, ds.images[0], seqs[0], 1.0);
    losses.total.backward();
    opt.step();
    std::size_t i = 0;
    for (auto& [n, t] : model.target.items) {
      CHECK(std::equal(t.data().begin(), t.data().end(), target_before[i].begin()));
      ++i;
    }
    std::vector<std::vector<double>> online_before;
    for (auto& t : model.online_params()) {
      online_before.emplace_back(t.data().begin(), t.data().end());
    }
    auto targets = model.target_params();
    ema_update(targets, model.online_encoder_params(), 0.9);
    i = 0;
    for (auto& t : model.online_params()) {
      CHECK(std::equal(t.data().begin(), t.data().end(), online_before[i].begin()));
      ++i;
    }
  }
}

TEST_CASE("ema step follows the scheduled tau exactly") {
  auto mc = small_model();
  auto model = ModelState<double>::init(mc, 3);
  AdamW<double> opt(AdamWConfig<double>{}, model.online_params());
  auto ds = small_data();
  auto seq = sequence_from_record(ds.records[0], ds.grid);

  const double tau = 0.9983;
  std::vector<std::vector<double>> tgt_before;
  for (auto& [n, t] : model.target.items) {
    tgt_before.emplace_back(t.data().begin(), t.data().end());
  }
  std::vector<BatchSample> batch{{&ds.images[0], &seq}};
  pretrain_step(model, opt, batch, tau, 1.0);

  // target' == tau*target + (1-tau)*online_after_step, bitwise
  auto online = model.online_encoder_params();
  std::size_t i = 0;
  for (auto& [n, t] : model.target.items) {
    const auto now = t.data();
    const auto on = online[i].data();
    for (std::size_t j = 0; j < now.size(); ++j) {
      const double expect = tau * tgt_before[i][j] + (1.0 - tau) * on[j];
      CHECK(now[j] == expect);
    }
    ++i;
  }
}

TEST_CASE("run_pretrain determinism and tau trace") {
  auto mc = small_model();
  auto tc = small_train();
  auto ds = small_data();

  auto [ckpt1, rep1] = run_pretrain<double>(mc, tc, ds);
  auto [ckpt2, rep2] = run_pretrain<double>(mc, tc, ds);

  REQUIRE(rep1.steps.size() == rep2.steps.size());
  for (std::size_t i = 0; i < rep1.steps.size(); ++i) {
    CHECK(rep1.steps[i].l_total == rep2.steps[i].l_total);
  }
  CHECK(params_equal(ckpt1.model, ckpt2.model));

  CHECK(rep1.steps.front().tau == 0.998);
  CHECK(rep1.steps.back().tau == 1.0);
  for (std::size_t i = 1; i < rep1.steps.size(); ++i) {
    CHECK(rep1.steps[i].tau >= rep1.steps[i - 1].tau);
  }

  SUBCASE("epochs=0 rejected") {
    TrainConfig bad = tc;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
  SUBCASE("precision mismatch rejected") {
    TrainConfig f32 = tc;
    f32.precision = "float32";
    CHECK_THROWS_AS((run_pretrain<double>(mc, f32, ds)), std::invalid_argument);
  }
}

TEST_CASE("checkpoint persistence") {
  const fs::path dir = fs::temp_directory_path() / "gw_ckpt_test";
  fs::create_directories(dir);
  auto mc = small_model();
  auto tc = small_train(1);
  auto ds = small_data();
  auto [ckpt, report] = run_pretrain<double>(mc, tc, ds);

  SUBCASE("save -> load -> save is byte-identical") {
    save_checkpoint(ckpt, dir / "a.ckpt");
    auto loaded = load_checkpoint<double>(dir / "a.ckpt");
    save_checkpoint(loaded, dir / "b.ckpt");
    CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));
    CHECK(loaded.step == ckpt.step);
    CHECK(loaded.opt_step == ckpt.opt_step);
    CHECK(loaded.dataset_seed == ckpt.dataset_seed);
    CHECK(params_equal(loaded.model, ckpt.model));
  }
  SUBCASE("wrong magic is a distinct error") {
    {
      std::ofstream out(dir / "bad.ckpt", std::ios::binary);
      out << "NOTACKPTfile";
    }
    try {
      load_checkpoint<double>(dir / "bad.ckpt");
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kMagic);
    }
  }
  SUBCASE("truncation is a distinct error") {
    save_checkpoint(ckpt, dir / "c.ckpt");
    auto bytes = file_bytes(dir / "c.ckpt");
    {
      std::ofstream out(dir / "trunc.ckpt", std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    try {
      load_checkpoint<double>(dir / "trunc.ckpt");
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kTruncated);
    }
  }
  SUBCASE("corrupt blob name is a distinct error") {
    save_checkpoint(ckpt, dir / "d.ckpt");
    auto bytes = file_bytes(dir / "d.ckpt");
    const auto pos = bytes.find("encoder.pos");
    REQUIRE(pos != std::string::npos);
    bytes[pos] = 'X';
    {
      std::ofstream out(dir / "corrupt.ckpt", std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    try {
      load_checkpoint<double>(dir / "corrupt.ckpt");
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kCorrupt);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("resume reproduces the uninterrupted run exactly") {
  const fs::path dir = fs::temp_directory_path() / "gw_resume_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto mc = small_model();
  auto ds = small_data();
  TrainConfig full = small_train(4);  // 12 samples / batch 4 = 3 steps/epoch, 12 total
  full.checkpoint_every = 6;

  auto [ckpt_full, rep_full] = run_pretrain<double>(mc, full, ds, dir);
  REQUIRE(rep_full.steps.size() == 12);

  // Interrupt at the periodic step-6 checkpoint and resume with the same
  // full-horizon config; the continuation must match step for step.
  auto mid = load_checkpoint<double>(dir / "step_6.ckpt");
  auto [ckpt_resumed, rep_resumed] = run_pretrain<double>(mc, full, ds, {}, &mid);

  REQUIRE(rep_resumed.steps.size() == 6);
  for (std::size_t i = 0; i < rep_resumed.steps.size(); ++i) {
    const auto& a = rep_full.steps[6 + i];
    const auto& b = rep_resumed.steps[i];
    CHECK(a.step == b.step);
    CHECK(a.l_total == b.l_total);
    CHECK(a.tau == b.tau);
  }
  CHECK(params_equal(ckpt_full.model, ckpt_resumed.model));
  fs::remove_all(dir);
}

TEST_CASE("train report jsonl emission") {
  TrainReport rep;
  for (int i = 0; i < 25; ++i) {
    rep.steps.push_back(StepLog{i, 0.5, 0.25, 0.75, 0.998, 0});
  }
  const fs::path path = fs::temp_directory_path() / "gw_train_log.jsonl";
  write_train_report_jsonl(rep, path, 10);
  std::ifstream in(path);
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++count;
  }
  CHECK(count == 4);  // steps 0, 10, 20 and the final step 24
  fs::remove(path);
}
