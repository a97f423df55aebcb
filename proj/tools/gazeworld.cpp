// Command-line driver wiring synthetic data generation, pretraining, probing,
// scanpath decoding, and metric reporting into reproducible experiments.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gazeworld/checkpoint.hpp"
#include "gazeworld/experiment.hpp"
#include "gazeworld/metrics.hpp"
#include "gazeworld/probes.hpp"
#include "gazeworld/report.hpp"
#include "gazeworld/scanpath_decoder.hpp"
#include "gazeworld/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gazeworld;

namespace {

struct CliContext {
  fs::path workdir = ".";
  fs::path config_path;
  std::vector<std::string> overrides;
  fs::path report_path;  // empty: workdir/<command>_report.json
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig load_config(const CliContext& ctx) {
  json doc;
  if (ctx.config_path.empty()) {
    doc = ExperimentConfig{}.to_json();
  } else {
    std::ifstream in(ctx.config_path);
    if (!in) throw std::runtime_error("cannot open config file: " + ctx.config_path.string());
    in >> doc;
    // Overlay the file on the defaults so partial configs stay valid.
    doc = ExperimentConfig::from_json(doc).to_json();
  }
  for (const auto& assignment : ctx.overrides) {
    doc = ExperimentConfig::apply_override(doc, assignment);
  }
  ExperimentConfig cfg = ExperimentConfig::from_json(doc);
  if (const char* env = std::getenv("GAZEWORLD_SEED")) {
    cfg.override_all_seeds(std::stoull(env));
  }
  return cfg;
}

void emit_report(const CliContext& ctx, const std::string& command, const ExperimentConfig& cfg,
                 double wall, json results) {
  const fs::path path =
      ctx.report_path.empty() ? ctx.workdir / (command + "_report.json") : ctx.report_path;
  const json report = make_report(command, cfg.to_json(), wall, std::move(results));
  write_json(report, path);
  std::cout << "wrote " << path.string() << "\n";
}

json scanpath_to_json(const std::string& image_id, std::size_t task, const Scanpath& path) {
  json fixations = json::array();
  for (const auto& p : path.points) {
    fixations.push_back(json{{"x", p.x}, {"y", p.y}, {"dur", p.duration}});
  }
  return json{{"image_id", image_id}, {"task", task}, {"fixations", fixations}};
}

// ---------------------------------------------------------------------------

int cmd_synth(const CliContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = load_config(ctx);
  const auto ds = synth_world(cfg.data.seed, cfg.data.n_images, cfg.data.grid,
                              parse_gaze_rule(cfg.data.rule), cfg.data.patch_px);
  const fs::path out = ctx.workdir / cfg.data.out_dir;
  save_dataset(ds, out);
  emit_report(ctx, "synth", cfg, seconds_since(t0),
              json{{"dataset_dir", out.string()},
                   {"n_images", ds.size()},
                   {"rule", to_string(ds.rule)},
                   {"seed", ds.seed}});
  return 0;
}

template <typename T>
json run_pretrain_typed(const CliContext& ctx, const ExperimentConfig& cfg,
                        const SyntheticDataset& train_split, const fs::path& ckpt_path) {
  fs::path periodic_dir;
  if (cfg.train.checkpoint_every != 0) {
    periodic_dir = ctx.workdir / "checkpoints";
    fs::create_directories(periodic_dir);
  }
  auto [ckpt, report] = run_pretrain<T>(cfg.model, cfg.train, train_split, periodic_dir);
  save_checkpoint(ckpt, ckpt_path);

  write_train_report_jsonl(report, ctx.workdir / "train_log.jsonl", cfg.train.log_every);
  {
    std::ofstream svg(ctx.workdir / "loss_curve.svg");
    svg << loss_curve_svg(report);
  }
  json out{{"checkpoint", ckpt_path.string()},
           {"steps", report.steps.size()},
           {"skipped_samples", report.skipped_samples},
           {"skipped_steps", report.skipped_steps},
           {"train_log", (ctx.workdir / "train_log.jsonl").string()},
           {"loss_curve", (ctx.workdir / "loss_curve.svg").string()}};
  if (!report.steps.empty()) {
    out["initial_loss"] = report.steps.front().l_total;
    out["final_loss"] = report.steps.back().l_total;
    out["tau_first"] = report.steps.front().tau;
    out["tau_last"] = report.steps.back().tau;
  }
  return out;
}

int cmd_pretrain(const CliContext& ctx, const fs::path& dataset_arg, const fs::path& out_arg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = load_config(ctx);
  const fs::path dataset_dir =
      dataset_arg.empty() ? ctx.workdir / cfg.data.out_dir : ctx.workdir / dataset_arg;
  const auto ds = load_dataset(dataset_dir);
  const auto splits = split_dataset(ds, cfg.data.fractions);
  const fs::path ckpt_path =
      out_arg.empty() ? ctx.workdir / "checkpoint.ckpt" : ctx.workdir / out_arg;

  json results = cfg.train.precision == "float64"
                     ? run_pretrain_typed<double>(ctx, cfg, splits.train, ckpt_path)
                     : run_pretrain_typed<float>(ctx, cfg, splits.train, ckpt_path);
  results["train_size"] = splits.train.size();
  results["val_size"] = splits.val.size();
  results["test_size"] = splits.test.size();
  emit_report(ctx, "pretrain", cfg, seconds_since(t0), std::move(results));
  return 0;
}

template <typename T>
json run_probe_typed(const ExperimentConfig& cfg, const fs::path& ckpt_path) {
  const auto ckpt = load_checkpoint<T>(ckpt_path);
  const auto rule = parse_gaze_rule(cfg.data.rule);
  const std::size_t total = cfg.probe.train_images + cfg.probe.test_images;
  auto world = synth_world(cfg.probe.seed, total, ckpt.config.grid, rule, cfg.data.patch_px);

  SyntheticDataset train, test;
  train.grid = test.grid = world.grid;
  train.seed = test.seed = world.seed;
  for (std::size_t i = 0; i < world.size(); ++i) {
    auto& part = i < cfg.probe.train_images ? train : test;
    part.images.push_back(world.images[i]);
    part.records.push_back(world.records[i]);
    part.labels.push_back(world.labels[i]);
  }
  const auto result =
      run_linear_probe(ckpt.model, train, test, cfg.probe.l2_c, cfg.probe.max_iters);
  return json{{"checkpoint", ckpt_path.string()},
              {"auroc", result.auroc},
              {"accuracy", result.accuracy},
              {"train_images", result.train_size},
              {"test_images", result.test_size}};
}

int cmd_probe(const CliContext& ctx, const fs::path& ckpt_arg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = load_config(ctx);
  const fs::path ckpt_path =
      ckpt_arg.empty() ? ctx.workdir / "checkpoint.ckpt" : ctx.workdir / ckpt_arg;
  json results = checkpoint_precision(ckpt_path) == "float64"
                     ? run_probe_typed<double>(cfg, ckpt_path)
                     : run_probe_typed<float>(cfg, ckpt_path);
  emit_report(ctx, "probe", cfg, seconds_since(t0), std::move(results));
  return 0;
}

template <typename T>
json run_scanpath_typed(const CliContext& ctx, const ExperimentConfig& cfg,
                        const fs::path& ckpt_path) {
  const auto ckpt = load_checkpoint<T>(ckpt_path);
  ScanpathDecoderConfig dec_cfg = cfg.decoder_config();
  dec_cfg.grid = ckpt.config.grid;
  dec_cfg.feature_dim = ckpt.config.embed_dim;

  auto train_set = make_search_dataset(cfg.scanpath.seed, cfg.scanpath.train_samples,
                                       dec_cfg.grid, ckpt.config.patch_px, dec_cfg.n_tasks,
                                       dec_cfg.steps);
  auto test_set = make_search_dataset(cfg.scanpath.seed + 1, cfg.scanpath.test_samples,
                                      dec_cfg.grid, ckpt.config.patch_px, dec_cfg.n_tasks,
                                      dec_cfg.steps);

  auto decoder = ScanpathDecoder<T>::init(dec_cfg, cfg.scanpath.seed);
  const auto train_report =
      train_scanpath_decoder(decoder, ckpt.model, train_set, cfg.scanpath.seed);

  std::ofstream pred_out(ctx.workdir / "scanpath_pred.jsonl");
  std::ofstream truth_out(ctx.workdir / "scanpath_truth.jsonl");
  std::size_t first_fix_hits = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const auto& sample = test_set[i];
    const std::string id = sample.image.id + "_t" + std::to_string(sample.task);
    const auto decoded =
        decode_scanpath(ckpt.model, decoder, sample.image, sample.task, dec_cfg.steps);
    pred_out << scanpath_to_json(id, sample.task, decoded).dump() << '\n';
    truth_out << scanpath_to_json(id, sample.task, sample.path).dump() << '\n';

    const auto want = metrics::quantize({{sample.path.points[0].x, sample.path.points[0].y}},
                                        dec_cfg.grid);
    const auto got =
        metrics::quantize({{decoded.points[0].x, decoded.points[0].y}}, dec_cfg.grid);
    const auto wr = want.cells[0] / dec_cfg.grid.cols, wc = want.cells[0] % dec_cfg.grid.cols;
    const auto gr = got.cells[0] / dec_cfg.grid.cols, gc = got.cells[0] % dec_cfg.grid.cols;
    const auto dr = wr > gr ? wr - gr : gr - wr;
    const auto dc = wc > gc ? wc - gc : gc - wc;
    if (dr <= 1 && dc <= 1) ++first_fix_hits;
  }
  return json{{"checkpoint", ckpt_path.string()},
              {"train_samples", train_set.size()},
              {"test_samples", test_set.size()},
              {"final_epoch_loss", train_report.epoch_loss.back()},
              {"first_fixation_hit_rate",
               static_cast<double>(first_fix_hits) / static_cast<double>(test_set.size())},
              {"predictions", (ctx.workdir / "scanpath_pred.jsonl").string()},
              {"truth", (ctx.workdir / "scanpath_truth.jsonl").string()}};
}

int cmd_scanpath(const CliContext& ctx, const fs::path& ckpt_arg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = load_config(ctx);
  const fs::path ckpt_path =
      ckpt_arg.empty() ? ctx.workdir / "checkpoint.ckpt" : ctx.workdir / ckpt_arg;
  json results = checkpoint_precision(ckpt_path) == "float64"
                     ? run_scanpath_typed<double>(ctx, cfg, ckpt_path)
                     : run_scanpath_typed<float>(ctx, cfg, ckpt_path);
  emit_report(ctx, "scanpath", cfg, seconds_since(t0), std::move(results));
  return 0;
}

struct ScanpathFile {
  std::vector<std::pair<std::string, Scanpath>> entries;  // key = image_id|task
};

ScanpathFile load_scanpath_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scanpath file: " + path.string());
  ScanpathFile out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    Scanpath p;
    for (const auto& f : j.at("fixations")) {
      p.points.push_back(ScanpathPoint{f.at("x").get<double>(), f.at("y").get<double>(),
                                       f.at("dur").get<double>()});
    }
    const std::string key =
        j.at("image_id").get<std::string>() + "|" + std::to_string(j.at("task").get<std::size_t>());
    out.entries.emplace_back(key, std::move(p));
  }
  return out;
}

int cmd_metrics(const CliContext& ctx, const fs::path& pred_arg, const fs::path& truth_arg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = load_config(ctx);
  const auto pred = load_scanpath_jsonl(ctx.workdir / pred_arg);
  const auto truth = load_scanpath_jsonl(ctx.workdir / truth_arg);

  auto to_quantized = [&](const Scanpath& p) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& pt : p.points) xy.emplace_back(pt.x, pt.y);
    return metrics::quantize(xy, cfg.metrics.grid);
  };

  json pairs = json::array();
  double sed_sum = 0, sm_sum = 0, stde_sum = 0;
  metrics::MultiMatchScore mm_sum;
  std::size_t n = 0, mm_n = 0;
  for (const auto& [key, p] : pred.entries) {
    const auto t = std::find_if(truth.entries.begin(), truth.entries.end(),
                                [&](const auto& e) { return e.first == key; });
    if (t == truth.entries.end()) {
      throw std::runtime_error("metrics: no ground truth for " + key);
    }
    const auto qa = to_quantized(p);
    const auto qb = to_quantized(t->second);
    json row{{"id", key},
             {"sed", metrics::sed(qa, qb)},
             {"scanmatch", metrics::scanmatch(qa, qb)},
             {"stde", metrics::stde(qa, qb)}};
    sed_sum += static_cast<double>(metrics::sed(qa, qb));
    sm_sum += metrics::scanmatch(qa, qb);
    stde_sum += metrics::stde(qa, qb);
    if (qa.cells.size() >= 2 && qb.cells.size() >= 2) {
      const auto mm = metrics::multimatch(qa, qb);
      row["multimatch"] = {
          {"vector", mm.vector}, {"direction", mm.direction}, {"position", mm.position}};
      mm_sum.vector += mm.vector;
      mm_sum.direction += mm.direction;
      mm_sum.position += mm.position;
      ++mm_n;
    }
    pairs.push_back(std::move(row));
    ++n;
  }
  if (n == 0) throw std::runtime_error("metrics: no scanpath pairs found");

  json means{{"sed", sed_sum / static_cast<double>(n)},
             {"scanmatch", sm_sum / static_cast<double>(n)},
             {"stde", stde_sum / static_cast<double>(n)}};
  if (mm_n > 0) {
    means["multimatch"] = {{"vector", mm_sum.vector / static_cast<double>(mm_n)},
                           {"direction", mm_sum.direction / static_cast<double>(mm_n)},
                           {"position", mm_sum.position / static_cast<double>(mm_n)}};
  }
  emit_report(ctx, "metrics", cfg, seconds_since(t0),
              json{{"pairs", std::move(pairs)}, {"means", std::move(means)}, {"count", n}});
  return 0;
}

template <typename T>
json run_ablate_typed(const ExperimentConfig& cfg) {
  const std::vector<GazeRule> rules{GazeRule::kIntensityOrder, GazeRule::kRaster,
                                    GazeRule::kRandom};
  json per_seed = json::array();
  std::map<std::string, double> mean_auroc;

  for (std::size_t j = 0; j < cfg.ablate.n_seeds; ++j) {
    const std::uint64_t seed = cfg.ablate.base_seed + j;

    // Probe images are shared across orderings within a seed; probing is
    // gaze-free, so only the pretraining fixations differ.
    const std::size_t total = cfg.probe.train_images + cfg.probe.test_images;
    auto probe_world = synth_world(seed + 1000003, total, cfg.model.grid,
                                   GazeRule::kIntensityOrder, cfg.data.patch_px);
    SyntheticDataset probe_train, probe_test;
    probe_train.grid = probe_test.grid = probe_world.grid;
    for (std::size_t i = 0; i < probe_world.size(); ++i) {
      auto& part = i < cfg.probe.train_images ? probe_train : probe_test;
      part.images.push_back(probe_world.images[i]);
      part.records.push_back(probe_world.records[i]);
      part.labels.push_back(probe_world.labels[i]);
    }

    json row{{"seed", seed}, {"auroc", json::object()}};
    for (const GazeRule rule : rules) {
      auto ds = synth_world(seed, cfg.data.n_images, cfg.model.grid, rule, cfg.data.patch_px);
      ModelConfig mc = cfg.model;
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      tc.checkpoint_every = 0;
      auto [ckpt, report] = run_pretrain<T>(mc, tc, ds);
      const auto probe = run_linear_probe(ckpt.model, probe_train, probe_test, cfg.probe.l2_c,
                                          cfg.probe.max_iters);
      row["auroc"][to_string(rule)] = probe.auroc;
      mean_auroc[to_string(rule)] += probe.auroc / static_cast<double>(cfg.ablate.n_seeds);
    }
    per_seed.push_back(std::move(row));
  }

  const double gaze = mean_auroc["intensity-order"];
  const double raster = mean_auroc["raster"];
  const double random = mean_auroc["random"];
  return json{{"per_seed", std::move(per_seed)},
              {"mean_auroc",
               {{"intensity-order", gaze}, {"raster", raster}, {"random", random}}},
              {"gaze_minus_random", gaze - random},
              {"raster_at_or_below_gaze", raster <= gaze}};
}

int cmd_ablate(const CliContext& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = load_config(ctx);
  json results = cfg.train.precision == "float64" ? run_ablate_typed<double>(cfg)
                                                  : run_ablate_typed<float>(cfg);
  emit_report(ctx, "ablate", cfg, seconds_since(t0), std::move(results));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gazeworld: gaze-ordered world-model pretraining on synthetic data"};
  app.require_subcommand(1);

  CliContext ctx;
  app.add_option("--workdir", ctx.workdir, "root for all relative paths");
  app.add_option("--config", ctx.config_path, "experiment config JSON");
  app.add_option("--set", ctx.overrides, "override config keys, e.g. train.epochs=4");
  app.add_option("--report", ctx.report_path, "report output path");

  auto* synth = app.add_subcommand("synth", "generate a synthetic gaze dataset");
  auto* pretrain = app.add_subcommand("pretrain", "run world-model pretraining");
  fs::path dataset_arg, out_arg, ckpt_arg, pred_arg, truth_arg;
  pretrain->add_option("--dataset", dataset_arg, "dataset directory (default: data.out_dir)");
  pretrain->add_option("--out", out_arg, "checkpoint output path");
  auto* probe = app.add_subcommand("probe", "linear probe of frozen features");
  probe->add_option("--checkpoint", ckpt_arg, "checkpoint path");
  auto* scanpath = app.add_subcommand("scanpath", "train decoder and emit scanpaths");
  scanpath->add_option("--checkpoint", ckpt_arg, "checkpoint path");
  auto* metrics_cmd = app.add_subcommand("metrics", "score predicted vs. true scanpaths");
  metrics_cmd->add_option("--pred", pred_arg, "predicted scanpath JSONL")->required();
  metrics_cmd->add_option("--truth", truth_arg, "ground-truth scanpath JSONL")->required();
  auto* ablate = app.add_subcommand("ablate", "ordering ablation with probe AUROC");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(ctx);
    if (pretrain->parsed()) return cmd_pretrain(ctx, dataset_arg, out_arg);
    if (probe->parsed()) return cmd_probe(ctx, ckpt_arg);
    if (scanpath->parsed()) return cmd_scanpath(ctx, ckpt_arg);
    if (metrics_cmd->parsed()) return cmd_metrics(ctx, pred_arg, truth_arg);
    if (ablate->parsed()) return cmd_ablate(ctx);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 1;
}
