#include "gazeworld/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "gazeworld/rng.hpp"

namespace gazeworld {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay < 0");
  if (lambda_sc < 0.0) throw std::invalid_argument("TrainConfig: lambda_sc < 0");
  if (!(ema_start >= 0.0 && ema_start <= ema_end && ema_end <= 1.0)) {
    throw std::invalid_argument("TrainConfig: need 0 <= ema_start <= ema_end <= 1");
  }
  if (log_every == 0) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
  if (precision != "float32" && precision != "float64") {
    throw std::invalid_argument("TrainConfig: precision must be float32 or float64");
  }
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"weight_decay", weight_decay},
              {"lambda_sc", lambda_sc},
              {"ema_start", ema_start},
              {"ema_end", ema_end},
              {"seed", seed},
              {"log_every", log_every},
              {"checkpoint_every", checkpoint_every},
              {"precision", precision}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.lambda_sc = j.at("lambda_sc").get<double>();
  c.ema_start = j.at("ema_start").get<double>();
  c.ema_end = j.at("ema_end").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.log_every = j.at("log_every").get<std::size_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  c.precision = j.at("precision").get<std::string>();
  c.validate();
  return c;
}

template <typename T>
StepOutcome<T> pretrain_step(ModelState<T>& model, AdamW<T>& optimizer,
                             const std::vector<BatchSample>& batch, T tau, T lambda) {
  if (batch.empty()) throw std::invalid_argument("pretrain_step: empty batch");

  std::vector<const BatchSample*> usable;
  usable.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.seq->length() >= 2) usable.push_back(&s);
  }

  StepOutcome<T> out;
  out.skipped = batch.size() - usable.size();
  if (usable.empty()) return out;  // whole batch unusable; no update at all

  optimizer.zero_grad();
  const T inv = T(1) / static_cast<T>(usable.size());
  for (const BatchSample* s : usable) {
    auto losses = sample_losses(model, *s->image, *s->seq, lambda);
    out.l_ar += static_cast<double>(losses.ar.item());
    out.l_sc += static_cast<double>(losses.sc.item());
    out.l_total += static_cast<double>(losses.total.item());
    ops::scale(losses.total, inv).backward();
  }
  const double dinv = 1.0 / static_cast<double>(usable.size());
  out.l_ar *= dinv;
  out.l_sc *= dinv;
  out.l_total *= dinv;

  optimizer.step();
  auto target = model.target_params();
  ema_update(target, model.online_encoder_params(), tau);
  out.performed = true;
  return out;
}

namespace {

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  Rng rng = Rng::stream(seed, {epoch, 0xDA7A});
  return rng.permutation(n);
}

}  // namespace

template <typename T>
std::pair<Checkpoint<T>, TrainReport> run_pretrain(const ModelConfig& model_config,
                                                   const TrainConfig& train_config,
                                                   const SyntheticDataset& data,
                                                   const std::filesystem::path& checkpoint_dir,
                                                   const Checkpoint<T>* resume) {
  model_config.validate();
  train_config.validate();
  if (data.size() == 0) throw std::invalid_argument("run_pretrain: dataset is empty");
  if (!(data.grid == model_config.grid)) {
    throw std::invalid_argument("run_pretrain: dataset grid does not match model grid");
  }

  const auto t0 = std::chrono::steady_clock::now();

  std::vector<FixationSequence> seqs;
  seqs.reserve(data.size());
  for (const auto& rec : data.records) seqs.push_back(sequence_from_record(rec, data.grid));

  Checkpoint<T> ckpt;
  if (resume != nullptr) {
    if (!(resume->config == model_config)) {
      throw std::invalid_argument("run_pretrain: resume checkpoint config mismatch");
    }
    ckpt = *resume;
  } else {
    ckpt.config = model_config;
    ckpt.model = ModelState<T>::init(model_config, train_config.seed);
    ckpt.dataset_seed = data.seed;
  }
  ckpt.train_config = train_config.to_json();

  AdamWConfig<T> opt_config;
  opt_config.learning_rate = static_cast<T>(train_config.learning_rate);
  opt_config.weight_decay = static_cast<T>(train_config.weight_decay);
  AdamW<T> optimizer(opt_config, ckpt.model.online_params());
  if (!ckpt.opt_m.empty()) optimizer.restore(ckpt.opt_m, ckpt.opt_v, ckpt.opt_step);

  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = (n + train_config.batch_size - 1) / train_config.batch_size;
  const std::int64_t total_steps =
      static_cast<std::int64_t>(train_config.epochs * steps_per_epoch);
  const std::int64_t start_step = resume != nullptr ? resume->step : 0;

  TrainReport report;
  std::vector<std::size_t> order;
  std::size_t order_epoch = SIZE_MAX;

  for (std::int64_t k = start_step; k < total_steps; ++k) {
    const std::size_t epoch = static_cast<std::size_t>(k) / steps_per_epoch;
    const std::size_t pos = static_cast<std::size_t>(k) % steps_per_epoch;
    if (epoch != order_epoch) {
      order = epoch_order(train_config.seed, epoch, n);
      order_epoch = epoch;
    }
    const std::size_t lo = pos * train_config.batch_size;
    const std::size_t hi = std::min(lo + train_config.batch_size, n);
    std::vector<BatchSample> batch;
    batch.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      batch.push_back(BatchSample{&data.images[order[i]], &seqs[order[i]]});
    }

    const double tau = ema_schedule(k, total_steps - 1, train_config.ema_start,
                                    train_config.ema_end);
    const auto outcome = pretrain_step(ckpt.model, optimizer, batch, static_cast<T>(tau),
                                       static_cast<T>(train_config.lambda_sc));
    report.skipped_samples += outcome.skipped;
    if (outcome.performed) {
      report.steps.push_back(
          StepLog{k, outcome.l_ar, outcome.l_sc, outcome.l_total, tau, outcome.skipped});
    } else {
      ++report.skipped_steps;
    }

    ckpt.step = k + 1;
    ckpt.opt_step = optimizer.step_count();
    if (!checkpoint_dir.empty() && train_config.checkpoint_every != 0 &&
        static_cast<std::size_t>(k + 1) % train_config.checkpoint_every == 0) {
      ckpt.opt_m = optimizer.moment1();
      ckpt.opt_v = optimizer.moment2();
      save_checkpoint(ckpt, checkpoint_dir / ("step_" + std::to_string(k + 1) + ".ckpt"));
    }
  }

  ckpt.opt_m = optimizer.moment1();
  ckpt.opt_v = optimizer.moment2();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(ckpt), std::move(report)};
}

void write_train_report_jsonl(const TrainReport& report, const std::filesystem::path& path,
                              std::size_t log_every) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train report: " + path.string());
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const auto& s = report.steps[i];
    if (static_cast<std::size_t>(s.step) % log_every != 0 && i + 1 != report.steps.size()) {
      continue;
    }
    out << json{{"step", s.step},
                {"l_ar", s.l_ar},
                {"l_sc", s.l_sc},
                {"l_total", s.l_total},
                {"tau", s.tau},
                {"skipped", s.skipped}}
               .dump()
        << '\n';
  }
}

template StepOutcome<float> pretrain_step<float>(ModelState<float>&, AdamW<float>&,
                                                 const std::vector<BatchSample>&, float, float);
template StepOutcome<double> pretrain_step<double>(ModelState<double>&, AdamW<double>&,
                                                   const std::vector<BatchSample>&, double,
                                                   double);
template std::pair<Checkpoint<float>, TrainReport> run_pretrain<float>(
    const ModelConfig&, const TrainConfig&, const SyntheticDataset&,
    const std::filesystem::path&, const Checkpoint<float>*);
template std::pair<Checkpoint<double>, TrainReport> run_pretrain<double>(
    const ModelConfig&, const TrainConfig&, const SyntheticDataset&,
    const std::filesystem::path&, const Checkpoint<double>*);

}  // namespace gazeworld
