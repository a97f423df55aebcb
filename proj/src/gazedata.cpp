#include "gazeworld/gazedata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gazeworld/rng.hpp"

namespace gazeworld {

using nlohmann::json;

void ImageGray::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("ImageGray: empty dimensions");
  if (pixels.size() != width * height) {
    throw std::invalid_argument("ImageGray: pixel count does not match dimensions");
  }
  for (double p : pixels) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ImageGray: pixel outside [0,1]");
  }
}

void FixationRecord::validate() const {
  if (fixations.empty()) throw std::invalid_argument("FixationRecord: no fixations");
  for (const auto& f : fixations) {
    if (!(f.x >= 0.0 && f.x <= 1.0 && f.y >= 0.0 && f.y <= 1.0)) {
      throw std::invalid_argument("FixationRecord: coordinate outside [0,1]");
    }
    if (!(f.duration > 0.0)) throw std::invalid_argument("FixationRecord: nonpositive duration");
  }
}

void FixationSequence::validate() const {
  grid.validate();
  if (visited.empty()) throw std::invalid_argument("FixationSequence: empty");
  if (dwell.size() != visited.size()) {
    throw std::invalid_argument("FixationSequence: dwell length mismatch");
  }
  std::vector<bool> seen(grid.patches(), false);
  for (std::size_t p : visited) {
    if (p >= grid.patches()) throw std::invalid_argument("FixationSequence: index out of range");
    if (seen[p]) throw std::invalid_argument("FixationSequence: duplicate patch index");
    seen[p] = true;
  }
  for (double d : dwell) {
    if (!(d > 0.0)) throw std::invalid_argument("FixationSequence: nonpositive dwell");
  }
}

GazeRule parse_gaze_rule(const std::string& name) {
  if (name == "intensity-order") return GazeRule::kIntensityOrder;
  if (name == "raster") return GazeRule::kRaster;
  if (name == "random") return GazeRule::kRandom;
  throw std::invalid_argument("unknown gaze rule: " + name);
}

std::string to_string(GazeRule rule) {
  switch (rule) {
    case GazeRule::kIntensityOrder: return "intensity-order";
    case GazeRule::kRaster: return "raster";
    case GazeRule::kRandom: return "random";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// PGM

namespace {

// Skips whitespace and '#' comments, then reads one header token.
std::string next_header_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c) != 0) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && std::isspace(c) == 0 && c != '#') {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  if (c != EOF) in.unget();
  return tok;
}

std::size_t parse_header_number(std::istream& in, const char* what) {
  const std::string tok = next_header_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char ch) {
        return std::isdigit(static_cast<unsigned char>(ch)) != 0;
      })) {
    throw PgmError(PgmError::Kind::kHeader, std::string("PGM: invalid ") + what + " field");
  }
  return static_cast<std::size_t>(std::stoull(tok));
}

}  // namespace

ImageGray parse_pgm(std::istream& in, std::string id) {
  std::string magic = next_header_token(in);
  if (magic != "P2" && magic != "P5") {
    throw PgmError(PgmError::Kind::kMagic, "PGM: malformed magic number '" + magic + "'");
  }
  const bool binary = magic == "P5";

  ImageGray img;
  img.id = std::move(id);
  img.width = parse_header_number(in, "width");
  img.height = parse_header_number(in, "height");
  const std::size_t maxval = parse_header_number(in, "maxval");
  if (img.width == 0 || img.height == 0) {
    throw PgmError(PgmError::Kind::kHeader, "PGM: zero dimension");
  }
  if (maxval == 0 || maxval > 65535) {
    throw PgmError(PgmError::Kind::kMaxval, "PGM: maxval out of range");
  }

  const std::size_t count = img.width * img.height;
  img.pixels.resize(count);
  const double inv = 1.0 / static_cast<double>(maxval);

  if (binary) {
    // Exactly one whitespace byte after maxval, then raw samples.
    const int sep = in.get();
    if (sep == EOF || std::isspace(sep) == 0) {
      throw PgmError(PgmError::Kind::kHeader, "PGM: missing separator after maxval");
    }
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    std::vector<char> buf(count * bytes_per);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
      throw PgmError(PgmError::Kind::kTruncated, "PGM: truncated pixel data");
    }
    if (in.peek() != EOF) {
      throw PgmError(PgmError::Kind::kCountMismatch, "PGM: trailing bytes after pixel data");
    }
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t v;
      if (bytes_per == 1) {
        v = static_cast<unsigned char>(buf[i]);
      } else {
        v = static_cast<std::size_t>(static_cast<unsigned char>(buf[2 * i])) << 8 |
            static_cast<unsigned char>(buf[2 * i + 1]);
      }
      if (v > maxval) {
        throw PgmError(PgmError::Kind::kCountMismatch, "PGM: sample exceeds maxval");
      }
      img.pixels[i] = static_cast<double>(v) * inv;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string tok = next_header_token(in);
      if (tok.empty()) {
        throw PgmError(PgmError::Kind::kTruncated,
                       "PGM: truncated pixel data (" + std::to_string(i) + " of " +
                           std::to_string(count) + " values)");
      }
      if (!std::all_of(tok.begin(), tok.end(), [](char ch) {
            return std::isdigit(static_cast<unsigned char>(ch)) != 0;
          })) {
        throw PgmError(PgmError::Kind::kHeader, "PGM: invalid sample '" + tok + "'");
      }
      const std::size_t v = static_cast<std::size_t>(std::stoull(tok));
      if (v > maxval) {
        throw PgmError(PgmError::Kind::kCountMismatch, "PGM: sample exceeds maxval");
      }
      img.pixels[i] = static_cast<double>(v) * inv;
    }
    if (!next_header_token(in).empty()) {
      throw PgmError(PgmError::Kind::kCountMismatch, "PGM: extra samples after pixel data");
    }
  }
  return img;
}

ImageGray parse_pgm(const std::string& bytes, std::string id) {
  std::istringstream in(bytes);
  return parse_pgm(in, std::move(id));
}

std::string write_pgm(const ImageGray& img) {
  img.validate();
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double p : img.pixels) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(p * 255.0))));
  }
  return out;
}

ImageGray load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open PGM file: " + path.string());
  return parse_pgm(in, path.stem().string());
}

void save_pgm(const ImageGray& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write PGM file: " + path.string());
  const std::string bytes = write_pgm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("I/O error writing PGM file: " + path.string());
}

// ---------------------------------------------------------------------------
// Fixation JSONL

FixationRecord parse_fixation_jsonl(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FixationParseError(FixationParseError::Kind::kJson,
                             std::string("fixation record: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string()) {
    throw FixationParseError(FixationParseError::Kind::kMissingKey,
                             "fixation record: missing or invalid 'image_id'");
  }
  if (!j.contains("fixations") || !j["fixations"].is_array()) {
    throw FixationParseError(FixationParseError::Kind::kMissingKey,
                             "fixation record: missing or invalid 'fixations'");
  }
  FixationRecord rec;
  rec.image_id = j["image_id"].get<std::string>();
  if (j["fixations"].empty()) {
    throw FixationParseError(FixationParseError::Kind::kEmpty,
                             "fixation record: empty fixation array");
  }
  for (const auto& f : j["fixations"]) {
    if (!f.is_object() || !f.contains("x") || !f.contains("y") || !f.contains("dur") ||
        !f["x"].is_number() || !f["y"].is_number() || !f["dur"].is_number()) {
      throw FixationParseError(FixationParseError::Kind::kMissingKey,
                               "fixation record: fixation needs numeric x, y, dur");
    }
    Fixation fx{f["x"].get<double>(), f["y"].get<double>(), f["dur"].get<double>()};
    if (!(fx.x >= 0.0 && fx.x <= 1.0 && fx.y >= 0.0 && fx.y <= 1.0)) {
      throw FixationParseError(FixationParseError::Kind::kCoordRange,
                               "fixation record: coordinate outside [0,1]");
    }
    if (!(fx.duration > 0.0)) {
      throw FixationParseError(FixationParseError::Kind::kDuration,
                               "fixation record: nonpositive duration");
    }
    rec.fixations.push_back(fx);
  }
  return rec;
}

std::string fixation_to_jsonl(const FixationRecord& record) {
  json fixations = json::array();
  for (const auto& f : record.fixations) {
    fixations.push_back(json{{"x", f.x}, {"y", f.y}, {"dur", f.duration}});
  }
  return json{{"image_id", record.image_id}, {"fixations", fixations}}.dump();
}

std::vector<FixationRecord> load_fixation_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fixation file: " + path.string());
  std::vector<FixationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_fixation_jsonl(line));
  }
  return out;
}

void save_fixation_jsonl(const std::vector<FixationRecord>& records,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fixation file: " + path.string());
  for (const auto& r : records) out << fixation_to_jsonl(r) << '\n';
}

// ---------------------------------------------------------------------------
// Patch pipeline

std::vector<std::pair<std::size_t, double>> assign_patches(const FixationRecord& record,
                                                           const GridSpec& grid) {
  record.validate();
  grid.validate();
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(record.fixations.size());
  for (const auto& f : record.fixations) {
    const auto row = std::min(static_cast<std::size_t>(f.y * static_cast<double>(grid.rows)),
                              grid.rows - 1);
    const auto col = std::min(static_cast<std::size_t>(f.x * static_cast<double>(grid.cols)),
                              grid.cols - 1);
    out.emplace_back(row * grid.cols + col, f.duration);
  }
  return out;
}

FixationSequence dedup_first_visit(const std::vector<std::pair<std::size_t, double>>& assigned,
                                   const GridSpec& grid) {
  if (assigned.empty()) throw std::invalid_argument("dedup_first_visit: empty input");
  grid.validate();
  FixationSequence seq;
  seq.grid = grid;
  std::vector<std::size_t> position(grid.patches(), SIZE_MAX);
  for (const auto& [patch, dur] : assigned) {
    if (patch >= grid.patches()) {
      throw std::invalid_argument("dedup_first_visit: patch index out of range");
    }
    if (position[patch] == SIZE_MAX) {
      position[patch] = seq.visited.size();
      seq.visited.push_back(patch);
      seq.dwell.push_back(dur);
    } else {
      seq.dwell[position[patch]] += dur;
    }
  }
  return seq;
}

std::vector<std::size_t> unvisited_set(const FixationSequence& seq) {
  seq.validate();
  std::vector<bool> seen(seq.grid.patches(), false);
  for (std::size_t p : seq.visited) seen[p] = true;
  std::vector<std::size_t> out;
  out.reserve(seq.grid.patches() - seq.visited.size());
  for (std::size_t p = 0; p < seen.size(); ++p) {
    if (!seen[p]) out.push_back(p);
  }
  return out;
}

FixationSequence sequence_from_record(const FixationRecord& record, const GridSpec& grid) {
  return dedup_first_visit(assign_patches(record, grid), grid);
}

// ---------------------------------------------------------------------------
// Synthetic worlds

namespace {

constexpr double kIntensityLo = 0.15;
constexpr double kIntensitySpan = 0.7;
constexpr std::uint64_t kImageStream = 1;
constexpr std::uint64_t kFixationStream = 2;
constexpr std::uint64_t kSplitStream = 3;

std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%05zu", i);
  return buf;
}

}  // namespace

SyntheticDataset synth_world(std::uint64_t seed, std::size_t n_images, const GridSpec& grid,
                             GazeRule rule, std::size_t patch_px) {
  grid.validate();
  if (n_images == 0) throw std::invalid_argument("synth_world: n_images must be >= 1");
  if (patch_px == 0) throw std::invalid_argument("synth_world: patch_px must be >= 1");

  const std::size_t N = grid.patches();
  const std::size_t visits = N == 1 ? 1 : std::min(N, std::max<std::size_t>(2, N / 2));

  SyntheticDataset ds;
  ds.seed = seed;
  ds.grid = grid;
  ds.rule = rule;
  ds.images.reserve(n_images);
  ds.records.reserve(n_images);
  ds.labels.reserve(n_images);

  const std::size_t width = grid.cols * patch_px;
  const std::size_t height = grid.rows * patch_px;
  const double sigma = 0.35 * static_cast<double>(patch_px);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  for (std::size_t i = 0; i < n_images; ++i) {
    // Image content draws from a stream independent of the gaze rule so that
    // the same seed yields identical images/labels across rules.
    Rng img_rng = Rng::stream(seed, {i, kImageStream});
    Rng fix_rng = Rng::stream(seed, {i, kFixationStream});

    // rank[p] in 0..N-1; higher rank -> brighter patch; ordering is strict.
    const std::vector<std::size_t> rank = img_rng.permutation(N);
    std::vector<double> intensity(N);
    for (std::size_t p = 0; p < N; ++p) {
      const double slot = static_cast<double>(rank[p]) + 0.25 + 0.5 * img_rng.uniform();
      intensity[p] = kIntensityLo + kIntensitySpan * slot / static_cast<double>(N);
    }

    ImageGray img;
    img.width = width;
    img.height = height;
    img.id = image_name(i);
    img.pixels.assign(width * height, 0.0);
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t gr = y / patch_px;
      const double cy = (static_cast<double>(gr) + 0.5) * static_cast<double>(patch_px);
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t gc = x / patch_px;
        const double cx = (static_cast<double>(gc) + 0.5) * static_cast<double>(patch_px);
        const double dy = static_cast<double>(y) + 0.5 - cy;
        const double dx = static_cast<double>(x) + 0.5 - cx;
        img.pixels[y * width + x] =
            intensity[gr * grid.cols + gc] * std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    }

    std::size_t brightest = 0;
    for (std::size_t p = 0; p < N; ++p) {
      if (rank[p] == N - 1) brightest = p;
    }
    const int label = brightest % grid.cols < grid.cols / 2 ? 1 : 0;

    std::vector<std::size_t> order;
    switch (rule) {
      case GazeRule::kIntensityOrder: {
        order.resize(N);
        for (std::size_t p = 0; p < N; ++p) order[N - 1 - rank[p]] = p;
        order.resize(visits);
        break;
      }
      case GazeRule::kRaster: {
        for (std::size_t p = 0; p < visits; ++p) order.push_back(p);
        break;
      }
      case GazeRule::kRandom: {
        order = fix_rng.permutation(N);
        order.resize(visits);
        break;
      }
    }

    FixationRecord rec;
    rec.image_id = img.id;
    for (std::size_t p : order) {
      const double jx = fix_rng.uniform(-0.3, 0.3);
      const double jy = fix_rng.uniform(-0.3, 0.3);
      Fixation f;
      f.x = (static_cast<double>(p % grid.cols) + 0.5 + jx) / static_cast<double>(grid.cols);
      f.y = (static_cast<double>(p / grid.cols) + 0.5 + jy) / static_cast<double>(grid.rows);
      f.duration = 0.08 + 0.3 * intensity[p];
      rec.fixations.push_back(f);
    }

    ds.images.push_back(std::move(img));
    ds.records.push_back(std::move(rec));
    ds.labels.push_back(label);
  }
  return ds;
}

DatasetSplits split_dataset(const SyntheticDataset& ds, const SplitFractions& fr) {
  if (!(fr.train > 0.0) || fr.val < 0.0 || fr.test < 0.0) {
    throw std::invalid_argument("split_dataset: fractions must be positive");
  }
  if (std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split_dataset: fractions must sum to 1");
  }
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::lround(fr.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::lround(fr.val * static_cast<double>(n)));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw std::invalid_argument("split_dataset: degenerate fractions produce an empty split");
  }
  const std::size_t n_test = n - n_train - n_val;

  Rng rng = Rng::stream(ds.seed, {kSplitStream});
  std::vector<std::size_t> idx = rng.permutation(n);

  auto take = [&](std::size_t from, std::size_t count) {
    SyntheticDataset part;
    part.seed = ds.seed;
    part.grid = ds.grid;
    part.rule = ds.rule;
    for (std::size_t i = from; i < from + count; ++i) {
      part.images.push_back(ds.images[idx[i]]);
      part.records.push_back(ds.records[idx[i]]);
      part.labels.push_back(ds.labels[idx[i]]);
    }
    return part;
  };
  DatasetSplits out;
  out.train = take(0, n_train);
  out.val = take(n_train, n_val);
  out.test = take(n_train + n_val, n_test);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directory IO

void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");

  json images = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::string file = "images/" + ds.images[i].id + ".pgm";
    save_pgm(ds.images[i], dir / file);
    images.push_back(json{{"id", ds.images[i].id}, {"file", file}, {"label", ds.labels[i]}});
  }
  const json manifest = {
      {"seed", ds.seed},
      {"grid", {{"rows", ds.grid.rows}, {"cols", ds.grid.cols}}},
      {"rule", to_string(ds.rule)},
      {"images", images},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest: " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';

  save_fixation_jsonl(ds.records, dir / "fixations.jsonl");
}

SyntheticDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open manifest: " + (dir / "manifest.json").string());
  json manifest;
  in >> manifest;

  SyntheticDataset ds;
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  ds.grid = GridSpec{manifest.at("grid").at("rows").get<std::size_t>(),
                     manifest.at("grid").at("cols").get<std::size_t>()};
  ds.rule = parse_gaze_rule(manifest.at("rule").get<std::string>());

  std::vector<FixationRecord> records = load_fixation_jsonl(dir / "fixations.jsonl");
  for (const auto& entry : manifest.at("images")) {
    const std::string id = entry.at("id").get<std::string>();
    ImageGray img = load_pgm(dir / entry.at("file").get<std::string>());
    img.id = id;
    ds.images.push_back(std::move(img));
    ds.labels.push_back(entry.at("label").get<int>());
    auto rec = std::find_if(records.begin(), records.end(),
                            [&](const FixationRecord& r) { return r.image_id == id; });
    if (rec == records.end()) {
      throw std::runtime_error("dataset: no fixation record for image " + id);
    }
    ds.records.push_back(*rec);
  }
  return ds;
}

}  // namespace gazeworld
