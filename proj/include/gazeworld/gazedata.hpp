#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gazeworld {

struct GridSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t patches() const { return rows * cols; }
  bool operator==(const GridSpec&) const = default;
  void validate() const {
    if (rows == 0 || cols == 0) throw std::invalid_argument("GridSpec: rows/cols must be >= 1");
  }
};

// Grayscale image with row-major pixels normalized to [0,1].
struct ImageGray {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;
  std::string id;

  void validate() const;
};

struct Fixation {
  double x = 0.0;
  double y = 0.0;
  double duration = 0.0;  // seconds (unit is a convention of this project)
};

// Raw per-image gaze trace, ordered as recorded.
struct FixationRecord {
  std::string image_id;
  std::vector<Fixation> fixations;

  void validate() const;
};

// Deduplicated first-visit-ordered unique patch indices with merged dwells.
struct FixationSequence {
  std::vector<std::size_t> visited;
  std::vector<double> dwell;
  GridSpec grid;

  std::size_t length() const { return visited.size(); }
  void validate() const;
};

enum class GazeRule { kIntensityOrder, kRaster, kRandom };

GazeRule parse_gaze_rule(const std::string& name);
std::string to_string(GazeRule rule);

struct SyntheticDataset {
  std::vector<ImageGray> images;
  std::vector<FixationRecord> records;
  std::vector<int> labels;  // 1 when the brightest patch is in the left half
  std::uint64_t seed = 0;
  GridSpec grid;
  GazeRule rule = GazeRule::kIntensityOrder;

  std::size_t size() const { return images.size(); }
};

// ---------------------------------------------------------------------------
// PGM (P2/P5, maxval <= 65535)

struct PgmError : std::runtime_error {
  enum class Kind { kMagic, kHeader, kMaxval, kTruncated, kCountMismatch };
  PgmError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

ImageGray parse_pgm(std::istream& in, std::string id = "");
ImageGray parse_pgm(const std::string& bytes, std::string id = "");
// Binary P5, maxval 255. parse_pgm(write_pgm(img)) is the identity on the
// quantized pixel bytes.
std::string write_pgm(const ImageGray& img);
ImageGray load_pgm(const std::filesystem::path& path);
void save_pgm(const ImageGray& img, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// JSONL fixation records: {"image_id": str, "fixations": [{"x","y","dur"}]}

struct FixationParseError : std::runtime_error {
  enum class Kind { kJson, kMissingKey, kCoordRange, kDuration, kEmpty };
  FixationParseError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
  Kind kind;
};

FixationRecord parse_fixation_jsonl(const std::string& line);
std::string fixation_to_jsonl(const FixationRecord& record);
std::vector<FixationRecord> load_fixation_jsonl(const std::filesystem::path& path);
void save_fixation_jsonl(const std::vector<FixationRecord>& records,
                         const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Fixation -> patch-grid pipeline

// Nearest-patch assignment; coordinates of exactly 1.0 clamp to the last
// row/column. Returns (patch index, duration) in the original order.
std::vector<std::pair<std::size_t, double>> assign_patches(const FixationRecord& record,
                                                           const GridSpec& grid);

// Keeps the first occurrence of each patch, in order; dwell is the sum of all
// visit durations of that patch.
FixationSequence dedup_first_visit(const std::vector<std::pair<std::size_t, double>>& assigned,
                                   const GridSpec& grid);

// {0..N-1} \ visited, ascending.
std::vector<std::size_t> unvisited_set(const FixationSequence& seq);

FixationSequence sequence_from_record(const FixationRecord& record, const GridSpec& grid);

// ---------------------------------------------------------------------------
// Synthetic worlds

// Images are grids of Gaussian blobs whose peak intensities form a strict
// per-image ranking. Under kIntensityOrder the gaze visits the brightest
// patches in descending order (the planted sequential regularity); kRaster
// visits patches 0,1,2,... and kRandom a random subset in random order.
// Images and labels depend only on (seed, image index), never on the rule.
SyntheticDataset synth_world(std::uint64_t seed, std::size_t n_images, const GridSpec& grid,
                             GazeRule rule, std::size_t patch_px = 8);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  SyntheticDataset train;
  SyntheticDataset val;
  SyntheticDataset test;
};

// Disjoint, covering, shuffled by the dataset seed. Throws if any split
// would be empty or the fractions do not sum to 1 (within 1e-9).
DatasetSplits split_dataset(const SyntheticDataset& ds, const SplitFractions& fr);

// ---------------------------------------------------------------------------
// Dataset directory layout: manifest.json + images/*.pgm + fixations.jsonl

void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir);
SyntheticDataset load_dataset(const std::filesystem::path& dir);

}  // namespace gazeworld
