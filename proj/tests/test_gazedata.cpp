#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "gazeworld/gazedata.hpp"
#include "gazeworld/rng.hpp"

using namespace gazeworld;

TEST_CASE("parse_pgm ascii and binary") {
  SUBCASE("2x2 P2 rescales linearly") {
    auto img = parse_pgm(std::string("P2\n2 2\n255\n0 255 255 0\n"));
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.pixels == std::vector<double>{0.0, 1.0, 1.0, 0.0});
  }
  SUBCASE("1x1 P5 single byte") {
    std::string bytes = "P5\n1 1\n255\n";
    bytes.push_back(static_cast<char>(0x80));
    auto img = parse_pgm(bytes);
    CHECK(img.pixels[0] == doctest::Approx(128.0 / 255.0));
  }
  SUBCASE("16-bit P5 is big-endian") {
    std::string bytes = "P5\n1 1\n65535\n";
    bytes.push_back(static_cast<char>(0x01));
    bytes.push_back(static_cast<char>(0x00));
    auto img = parse_pgm(bytes);
    CHECK(img.pixels[0] == doctest::Approx(256.0 / 65535.0));
  }
  SUBCASE("comments in header are skipped") {
    auto img = parse_pgm(std::string("P2 # magic\n# size next\n1 1\n255\n42\n"));
    CHECK(img.pixels[0] == doctest::Approx(42.0 / 255.0));
  }
  SUBCASE("malformed magic") {
    CHECK_THROWS_WITH_AS(parse_pgm(std::string("P6\n1 1\n255\nx")),
                         doctest::Contains("magic"), PgmError);
  }
  SUBCASE("truncation: header claims 3x3 but only 8 values") {
    try {
      parse_pgm(std::string("P2\n3 3\n255\n1 2 3 4 5 6 7 8\n"));
      FAIL("expected PgmError");
    } catch (const PgmError& e) {
      CHECK(e.kind == PgmError::Kind::kTruncated);
    }
  }
  SUBCASE("binary truncation") {
    try {
      parse_pgm(std::string("P5\n2 2\n255\nab"));
      FAIL("expected PgmError");
    } catch (const PgmError& e) {
      CHECK(e.kind == PgmError::Kind::kTruncated);
    }
  }
  SUBCASE("extra samples rejected") {
    try {
      parse_pgm(std::string("P2\n1 1\n255\n1 2\n"));
      FAIL("expected PgmError");
    } catch (const PgmError& e) {
      CHECK(e.kind == PgmError::Kind::kCountMismatch);
    }
  }
  SUBCASE("maxval out of range") {
    try {
      parse_pgm(std::string("P2\n1 1\n70000\n1\n"));
      FAIL("expected PgmError");
    } catch (const PgmError& e) {
      CHECK(e.kind == PgmError::Kind::kMaxval);
    }
  }
}

TEST_CASE("pgm write/parse round trip preserves quantized bytes") {
  Rng rng(17);
  ImageGray img;
  img.width = 13;
  img.height = 7;
  img.id = "x";
  for (std::size_t i = 0; i < 91; ++i) img.pixels.push_back(rng.uniform());
  const auto bytes1 = write_pgm(img);
  const auto round = parse_pgm(bytes1);
  const auto bytes2 = write_pgm(round);
  CHECK(bytes1 == bytes2);
}

TEST_CASE("parse_fixation_jsonl") {
  SUBCASE("valid single fixation") {
    auto rec = parse_fixation_jsonl(
        R"({"image_id":"a","fixations":[{"x":0.5,"y":0.5,"dur":0.2}]})");
    CHECK(rec.image_id == "a");
    CHECK(rec.fixations.size() == 1);
    CHECK(rec.fixations[0].duration == 0.2);
  }
  SUBCASE("round trip through serializer") {
    auto rec = parse_fixation_jsonl(
        R"({"image_id":"b","fixations":[{"x":0.1,"y":0.9,"dur":1.5},{"x":0.3,"y":0.3,"dur":0.4}]})");
    auto again = parse_fixation_jsonl(fixation_to_jsonl(rec));
    CHECK(again.image_id == rec.image_id);
    CHECK(again.fixations.size() == rec.fixations.size());
    CHECK(again.fixations[1].x == rec.fixations[1].x);
  }
  auto kind_of = [](const std::string& line) {
    try {
      parse_fixation_jsonl(line);
    } catch (const FixationParseError& e) {
      return e.kind;
    }
    return FixationParseError::Kind::kJson;
  };
  SUBCASE("errors are distinct") {
    CHECK(kind_of("not json") == FixationParseError::Kind::kJson);
    CHECK(kind_of(R"({"fixations":[]})") == FixationParseError::Kind::kMissingKey);
    CHECK(kind_of(R"({"image_id":"a","fixations":[{"x":1.2,"y":0.5,"dur":0.2}]})") ==
          FixationParseError::Kind::kCoordRange);
    CHECK(kind_of(R"({"image_id":"a","fixations":[{"x":0.2,"y":0.5,"dur":0}]})") ==
          FixationParseError::Kind::kDuration);
    CHECK(kind_of(R"({"image_id":"a","fixations":[]})") == FixationParseError::Kind::kEmpty);
    CHECK(kind_of(R"({"image_id":"a","fixations":[{"x":0.2,"y":0.5}]})") ==
          FixationParseError::Kind::kMissingKey);
  }
}

TEST_CASE("assign_patches corner cases") {
  const GridSpec grid{4, 4};
  auto rec = [](double x, double y) {
    FixationRecord r;
    r.image_id = "i";
    r.fixations.push_back(Fixation{x, y, 0.1});
    return r;
  };
  CHECK(assign_patches(rec(0.0, 0.0), grid)[0].first == 0);
  CHECK(assign_patches(rec(0.99, 0.99), grid)[0].first == 15);
  // row floor(0.6*4)=2, col floor(0.3*4)=1 -> patch 9
  CHECK(assign_patches(rec(0.3, 0.6), grid)[0].first == 9);
  // exact 1.0 clamps to the last row/column
  CHECK(assign_patches(rec(1.0, 1.0), grid)[0].first == 15);
}

TEST_CASE("assign_patches is total on the unit square") {
  Rng rng(23);
  const GridSpec grid{3, 5};
  FixationRecord r;
  r.image_id = "f";
  for (int i = 0; i < 500; ++i) {
    r.fixations.push_back(Fixation{rng.uniform(), rng.uniform(), 0.1});
  }
  for (const auto& [patch, dur] : assign_patches(r, grid)) CHECK(patch < grid.patches());
}

TEST_CASE("dedup_first_visit merges dwell and keeps first-visit order") {
  const GridSpec grid{4, 4};
  SUBCASE("worked example") {
    std::vector<std::pair<std::size_t, double>> assigned{
        {3, 1.0}, {3, 1.0}, {5, 2.0}, {3, 1.0}, {7, 4.0}};
    auto seq = dedup_first_visit(assigned, grid);
    CHECK(seq.visited == std::vector<std::size_t>{3, 5, 7});
    CHECK(seq.dwell == std::vector<double>{3.0, 2.0, 4.0});
  }
  SUBCASE("single fixation") {
    auto seq = dedup_first_visit({{9, 0.5}}, grid);
    CHECK(seq.visited == std::vector<std::size_t>{9});
  }
  SUBCASE("already unique is unchanged") {
    auto seq = dedup_first_visit({{0, 1.0}, {1, 1.0}, {2, 1.0}}, grid);
    CHECK(seq.visited == std::vector<std::size_t>{0, 1, 2});
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(dedup_first_visit({}, grid), std::invalid_argument);
  }
}

TEST_CASE("dedup preserves first-occurrence order against a brute-force scan") {
  Rng rng(31);
  const GridSpec grid{4, 4};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<std::size_t, double>> assigned;
    const std::size_t len = 1 + rng.below(30);
    for (std::size_t i = 0; i < len; ++i) {
      assigned.emplace_back(rng.below(16), 0.1 + rng.uniform());
    }
    auto seq = dedup_first_visit(assigned, grid);
    // brute force: first occurrence order
    std::vector<std::size_t> expect;
    for (const auto& [p, d] : assigned) {
      if (std::find(expect.begin(), expect.end(), p) == expect.end()) expect.push_back(p);
    }
    CHECK(seq.visited == expect);
    double total_in = 0, total_out = 0;
    for (const auto& [p, d] : assigned) total_in += d;
    for (double d : seq.dwell) total_out += d;
    CHECK(total_out == doctest::Approx(total_in));  // dwell mass is conserved
  }
}

TEST_CASE("unvisited_set complements visited") {
  const GridSpec g2{2, 2};
  FixationSequence seq;
  seq.grid = g2;
  seq.visited = {0, 1};
  seq.dwell = {0.1, 0.1};
  CHECK(unvisited_set(seq) == std::vector<std::size_t>{2, 3});

  seq.visited = {0, 1, 2, 3};
  seq.dwell = {0.1, 0.1, 0.1, 0.1};
  CHECK(unvisited_set(seq).empty());

  FixationSequence s9;
  s9.grid = GridSpec{3, 3};
  s9.visited = {5};
  s9.dwell = {0.2};
  auto u = unvisited_set(s9);
  CHECK(u.size() == 8);
  CHECK(std::find(u.begin(), u.end(), 5) == u.end());
}

TEST_CASE("visited/unvisited partition property") {
  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    const GridSpec grid{1 + rng.below(5), 1 + rng.below(5)};
    FixationRecord r;
    r.image_id = "p";
    const std::size_t len = 1 + rng.below(20);
    for (std::size_t i = 0; i < len; ++i) {
      r.fixations.push_back(Fixation{rng.uniform(), rng.uniform(), 0.1});
    }
    auto seq = sequence_from_record(r, grid);
    auto u = unvisited_set(seq);
    CHECK(seq.visited.size() + u.size() == grid.patches());
    std::set<std::size_t> all(seq.visited.begin(), seq.visited.end());
    for (std::size_t p : u) CHECK(all.insert(p).second);  // no overlap
    CHECK(all.size() == grid.patches());
  }
}

TEST_CASE("synth_world determinism and planted rules") {
  const GridSpec grid{4, 4};
  SUBCASE("same seed twice is identical") {
    auto a = synth_world(1, 5, grid, GazeRule::kIntensityOrder);
    auto b = synth_world(1, 5, grid, GazeRule::kIntensityOrder);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.images[i].pixels == b.images[i].pixels);
      CHECK(a.labels[i] == b.labels[i]);
      CHECK(a.records[i].fixations.size() == b.records[i].fixations.size());
      for (std::size_t t = 0; t < a.records[i].fixations.size(); ++t) {
        CHECK(a.records[i].fixations[t].x == b.records[i].fixations[t].x);
        CHECK(a.records[i].fixations[t].duration == b.records[i].fixations[t].duration);
      }
    }
  }
  SUBCASE("images and labels do not depend on the rule") {
    auto a = synth_world(9, 4, grid, GazeRule::kIntensityOrder);
    auto b = synth_world(9, 4, grid, GazeRule::kRaster);
    auto c = synth_world(9, 4, grid, GazeRule::kRandom);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.images[i].pixels == b.images[i].pixels);
      CHECK(a.images[i].pixels == c.images[i].pixels);
      CHECK(a.labels[i] == b.labels[i]);
      CHECK(a.labels[i] == c.labels[i]);
    }
  }
  SUBCASE("raster rule visits the raster prefix") {
    auto ds = synth_world(2, 3, grid, GazeRule::kRaster);
    for (const auto& rec : ds.records) {
      auto seq = sequence_from_record(rec, grid);
      for (std::size_t i = 0; i < seq.visited.size(); ++i) CHECK(seq.visited[i] == i);
    }
  }
  SUBCASE("intensity rule visits in descending intensity rank (sort oracle)") {
    auto ds = synth_world(3, 6, grid, GazeRule::kIntensityOrder, 8);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto seq = sequence_from_record(ds.records[i], grid);
      // oracle: rank patches by peak pixel value
      const auto& img = ds.images[i];
      std::vector<double> peak(grid.patches(), 0.0);
      for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
          const std::size_t p = y / 8 * grid.cols + x / 8;
          peak[p] = std::max(peak[p], img.pixels[y * img.width + x]);
        }
      }
      std::vector<std::size_t> order(grid.patches());
      for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return peak[a] > peak[b]; });
      order.resize(seq.visited.size());
      CHECK(seq.visited == order);
    }
  }
  SUBCASE("label marks brightest patch in the left half") {
    auto ds = synth_world(4, 20, grid, GazeRule::kIntensityOrder);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto seq = sequence_from_record(ds.records[i], grid);
      const std::size_t brightest = seq.visited[0];
      CHECK(ds.labels[i] == (brightest % grid.cols < grid.cols / 2 ? 1 : 0));
    }
  }
}

TEST_CASE("split_dataset sizes, coverage, determinism") {
  const GridSpec grid{2, 2};
  auto ds = synth_world(5, 10, grid, GazeRule::kIntensityOrder, 4);
  auto splits = split_dataset(ds, SplitFractions{0.8, 0.1, 0.1});
  CHECK(splits.train.size() == 8);
  CHECK(splits.val.size() == 1);
  CHECK(splits.test.size() == 1);

  std::multiset<std::string> ids;
  for (const auto& part : {splits.train, splits.val, splits.test}) {
    for (const auto& img : part.images) ids.insert(img.id);
  }
  CHECK(ids.size() == 10);
  for (const auto& img : ds.images) CHECK(ids.count(img.id) == 1);

  auto splits2 = split_dataset(ds, SplitFractions{0.8, 0.1, 0.1});
  for (std::size_t i = 0; i < splits.train.size(); ++i) {
    CHECK(splits.train.images[i].id == splits2.train.images[i].id);
  }

  CHECK_THROWS_AS(split_dataset(ds, SplitFractions{1.0, 0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(ds, SplitFractions{0.5, 0.2, 0.2}), std::invalid_argument);
}

TEST_CASE("dataset directory round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gw_test_dataset";
  fs::remove_all(dir);
  const GridSpec grid{4, 4};
  auto ds = synth_world(6, 4, grid, GazeRule::kIntensityOrder);
  save_dataset(ds, dir);
  auto loaded = load_dataset(dir);
  CHECK(loaded.size() == ds.size());
  CHECK(loaded.grid == ds.grid);
  CHECK(loaded.seed == ds.seed);
  CHECK(loaded.labels == ds.labels);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(loaded.images[i].id == ds.images[i].id);
    // pixels pass through a 255-level quantization on disk
    for (std::size_t px = 0; px < ds.images[i].pixels.size(); ++px) {
      CHECK(loaded.images[i].pixels[px] ==
            doctest::Approx(ds.images[i].pixels[px]).epsilon(1e-2));
    }
    CHECK(loaded.records[i].fixations.size() == ds.records[i].fixations.size());
  }
  fs::remove_all(dir);
}
