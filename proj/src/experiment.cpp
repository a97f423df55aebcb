#include "gazeworld/experiment.hpp"

#include <sstream>

namespace gazeworld {

using nlohmann::json;

ConfigError::ConfigError(const std::vector<std::string>& problems_in)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "invalid configuration:";
        for (const auto& p : problems_in) os << "\n  - " << p;
        return os.str();
      }()),
      problems(problems_in) {}

json ExperimentConfig::to_json() const {
  json model_section = model.to_json();
  model_section["seed"] = model_seed;
  return json{
      {"data",
       {{"seed", data.seed},
        {"n_images", data.n_images},
        {"grid", {{"rows", data.grid.rows}, {"cols", data.grid.cols}}},
        {"rule", data.rule},
        {"patch_px", data.patch_px},
        {"fractions", {data.fractions.train, data.fractions.val, data.fractions.test}},
        {"out_dir", data.out_dir}}},
      {"model", model_section},
      {"train", train.to_json()},
      {"probe",
       {{"seed", probe.seed},
        {"train_images", probe.train_images},
        {"test_images", probe.test_images},
        {"l2_c", probe.l2_c},
        {"max_iters", probe.max_iters}}},
      {"scanpath",
       {{"seed", scanpath.seed},
        {"train_samples", scanpath.train_samples},
        {"test_samples", scanpath.test_samples},
        {"d_s", scanpath.d_s},
        {"layers", scanpath.layers},
        {"heads", scanpath.heads},
        {"n_tasks", scanpath.n_tasks},
        {"steps", scanpath.steps},
        {"learning_rate", scanpath.learning_rate},
        {"weight_decay", scanpath.weight_decay},
        {"eta_min", scanpath.eta_min},
        {"epochs", scanpath.epochs},
        {"batch_size", scanpath.batch_size}}},
      {"metrics", {{"grid", {{"rows", metrics.grid.rows}, {"cols", metrics.grid.cols}}}}},
      {"ablate", {{"n_seeds", ablate.n_seeds}, {"base_seed", ablate.base_seed}}},
  };
}

namespace {

// Strict overlay: every key present in `j` must be consumed by a known-field
// handler; unknown keys are collected with their dotted paths.
struct Overlay {
  std::vector<std::string>& problems;

  using Handler = std::function<void(const json&)>;

  void section(const json& j, const std::string& path,
               const std::vector<std::pair<std::string, Handler>>& fields) {
    if (!j.is_object()) {
      problems.push_back(path + ": expected an object");
      return;
    }
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for (const auto& [name, handler] : fields) {
        if (name == key) {
          try {
            handler(value);
          } catch (const json::exception&) {
            problems.push_back(path + "." + key + ": wrong type");
          }
          known = true;
          break;
        }
      }
      if (!known) problems.push_back(path + "." + key + ": unknown key");
    }
  }

  Handler grid_handler(GridSpec& g, const std::string& path) {
    return [this, &g, path](const json& v) {
      section(v, path,
              {{"rows", [&g](const json& x) { g.rows = x.get<std::size_t>(); }},
               {"cols", [&g](const json& x) { g.cols = x.get<std::size_t>(); }}});
    };
  }
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  std::vector<std::string> problems;
  Overlay o{problems};

  auto u64 = [](std::uint64_t& slot) {
    return [&slot](const json& v) { slot = v.get<std::uint64_t>(); };
  };
  auto sz = [](std::size_t& slot) {
    return [&slot](const json& v) { slot = v.get<std::size_t>(); };
  };
  auto dbl = [](double& slot) {
    return [&slot](const json& v) { slot = v.get<double>(); };
  };
  auto str = [](std::string& slot) {
    return [&slot](const json& v) { slot = v.get<std::string>(); };
  };
  auto flag = [](bool& slot) {
    return [&slot](const json& v) { slot = v.get<bool>(); };
  };

  o.section(
      j, "$",
      {{"data",
        [&](const json& v) {
          o.section(v, "data",
                    {{"seed", u64(c.data.seed)},
                     {"n_images", sz(c.data.n_images)},
                     {"grid", o.grid_handler(c.data.grid, "data.grid")},
                     {"rule", str(c.data.rule)},
                     {"patch_px", sz(c.data.patch_px)},
                     {"fractions",
                      [&](const json& f) {
                        if (!f.is_array() || f.size() != 3) {
                          problems.push_back("data.fractions: expected [train, val, test]");
                          return;
                        }
                        c.data.fractions = SplitFractions{f[0].get<double>(), f[1].get<double>(),
                                                          f[2].get<double>()};
                      }},
                     {"out_dir", str(c.data.out_dir)}});
        }},
       {"model",
        [&](const json& v) {
          o.section(v, "model",
                    {{"seed", u64(c.model_seed)},
                     {"grid", o.grid_handler(c.model.grid, "model.grid")},
                     {"patch_px", sz(c.model.patch_px)},
                     {"embed_dim", sz(c.model.embed_dim)},
                     {"encoder_layers", sz(c.model.encoder_layers)},
                     {"encoder_heads", sz(c.model.encoder_heads)},
                     {"predictor_layers", sz(c.model.predictor_layers)},
                     {"predictor_heads", sz(c.model.predictor_heads)},
                     {"completion_layers", sz(c.model.completion_layers)},
                     {"max_seq_len", sz(c.model.max_seq_len)},
                     {"smooth_l1_beta", dbl(c.model.smooth_l1_beta)},
                     {"lambda_sc", dbl(c.model.lambda_sc)},
                     {"symmetric_ar_norm", flag(c.model.symmetric_ar_norm)}});
        }},
       {"train",
        [&](const json& v) {
          o.section(v, "train",
                    {{"epochs", sz(c.train.epochs)},
                     {"batch_size", sz(c.train.batch_size)},
                     {"learning_rate", dbl(c.train.learning_rate)},
                     {"weight_decay", dbl(c.train.weight_decay)},
                     {"lambda_sc", dbl(c.train.lambda_sc)},
                     {"ema_start", dbl(c.train.ema_start)},
                     {"ema_end", dbl(c.train.ema_end)},
                     {"seed", u64(c.train.seed)},
                     {"log_every", sz(c.train.log_every)},
                     {"checkpoint_every", sz(c.train.checkpoint_every)},
                     {"precision", str(c.train.precision)}});
        }},
       {"probe",
        [&](const json& v) {
          o.section(v, "probe",
                    {{"seed", u64(c.probe.seed)},
                     {"train_images", sz(c.probe.train_images)},
                     {"test_images", sz(c.probe.test_images)},
                     {"l2_c", dbl(c.probe.l2_c)},
                     {"max_iters", sz(c.probe.max_iters)}});
        }},
       {"scanpath",
        [&](const json& v) {
          o.section(v, "scanpath",
                    {{"seed", u64(c.scanpath.seed)},
                     {"train_samples", sz(c.scanpath.train_samples)},
                     {"test_samples", sz(c.scanpath.test_samples)},
                     {"d_s", sz(c.scanpath.d_s)},
                     {"layers", sz(c.scanpath.layers)},
                     {"heads", sz(c.scanpath.heads)},
                     {"n_tasks", sz(c.scanpath.n_tasks)},
                     {"steps", sz(c.scanpath.steps)},
                     {"learning_rate", dbl(c.scanpath.learning_rate)},
                     {"weight_decay", dbl(c.scanpath.weight_decay)},
                     {"eta_min", dbl(c.scanpath.eta_min)},
                     {"epochs", sz(c.scanpath.epochs)},
                     {"batch_size", sz(c.scanpath.batch_size)}});
        }},
       {"metrics",
        [&](const json& v) {
          o.section(v, "metrics", {{"grid", o.grid_handler(c.metrics.grid, "metrics.grid")}});
        }},
       {"ablate", [&](const json& v) {
          o.section(v, "ablate",
                    {{"n_seeds", sz(c.ablate.n_seeds)}, {"base_seed", u64(c.ablate.base_seed)}});
        }}});

  if (!problems.empty()) throw ConfigError(problems);

  try {
    parse_gaze_rule(c.data.rule);
    c.model.validate();
    c.train.validate();
    c.decoder_config().validate();
  } catch (const std::exception& e) {
    throw ConfigError({e.what()});
  }
  return c;
}

json ExperimentConfig::apply_override(json doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError({"--set needs key=value, got: " + assignment});
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings pass through
  }

  json* cursor = &doc;
  std::istringstream parts(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(parts, key, '.')) keys.push_back(key);
  if (keys.empty()) throw ConfigError({"--set: empty key path"});
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!cursor->contains(keys[i])) throw ConfigError({"--set: unknown key " + path});
    cursor = &(*cursor)[keys[i]];
  }
  if (!cursor->is_object() || !cursor->contains(keys.back())) {
    throw ConfigError({"--set: unknown key " + path});
  }
  (*cursor)[keys.back()] = value;
  return doc;
}

void ExperimentConfig::override_all_seeds(std::uint64_t seed) {
  data.seed = seed;
  model_seed = seed;
  train.seed = seed;
  probe.seed = seed;
  scanpath.seed = seed;
}

ScanpathDecoderConfig ExperimentConfig::decoder_config() const {
  ScanpathDecoderConfig d;
  d.grid = model.grid;
  d.feature_dim = model.embed_dim;
  d.d_s = scanpath.d_s;
  d.layers = scanpath.layers;
  d.heads = scanpath.heads;
  d.n_tasks = scanpath.n_tasks;
  d.steps = scanpath.steps;
  d.learning_rate = scanpath.learning_rate;
  d.weight_decay = scanpath.weight_decay;
  d.eta_min = scanpath.eta_min;
  d.epochs = scanpath.epochs;
  d.batch_size = scanpath.batch_size;
  return d;
}

}  // namespace gazeworld
