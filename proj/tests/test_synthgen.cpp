#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mllp/synthgen.hpp"

using namespace mllp;
namespace fs = std::filesystem;

namespace {
int count_class(const Sample& s, CellClass c) {
  int n = 0;
  for (const auto& cell : *s.cells) n += cell.cls == c;
  return n;
}
}  // namespace

TEST_CASE("generate_sample enforces exact class counts") {
  GenConfig cfg;
  cfg.seed = 4;
  cfg.grid_size = 96;
  cfg.n_tumor = 100;
  cfg.n_nontumor = 0;
  cfg.target_r = 0.25;
  cfg.min_separation = 6.0;
  const Sample s = generate_sample(cfg);
  CHECK(count_class(s, CellClass::PosTumor) == 25);
  CHECK(count_class(s, CellClass::NegTumor) == 75);
  CHECK(s.true_r == 0.25);
  CHECK(s.interval == IntervalId::I1_25);
}

TEST_CASE("round-half-up positive count") {
  GenConfig cfg;
  cfg.seed = 5;
  cfg.grid_size = 32;
  cfg.n_tumor = 3;
  cfg.n_nontumor = 0;
  cfg.target_r = 0.5;
  const Sample s = generate_sample(cfg);
  CHECK(count_class(s, CellClass::PosTumor) == 2);  // round(1.5) = 2
  CHECK(s.true_r == 2.0 / 3.0);
  CHECK(s.interval == IntervalId::I50_75);
}

TEST_CASE("generate_sample is a pure function of cfg") {
  GenConfig cfg;
  cfg.seed = 987;
  cfg.grid_size = 48;
  cfg.n_tumor = 12;
  cfg.n_nontumor = 4;
  cfg.target_r = 0.4;
  const Sample a = generate_sample(cfg);
  const Sample b = generate_sample(cfg);
  CHECK(a.image.data() == b.image.data());
  CHECK(a.cells->size() == b.cells->size());
  CHECK(a.true_r == b.true_r);
}

TEST_CASE("pairwise separation and value range") {
  GenConfig cfg;
  cfg.seed = 31;
  cfg.grid_size = 64;
  cfg.n_tumor = 24;
  cfg.n_nontumor = 10;
  cfg.target_r = 0.6;
  const Sample s = generate_sample(cfg);
  CHECK(s.image.all_finite());
  CHECK(s.image.min_value() >= 0.0);
  CHECK(s.image.max_value() <= 1.0);
  const auto& cells = *s.cells;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j) {
      const double dr = cells[i].row - cells[j].row, dc = cells[i].col - cells[j].col;
      CHECK(dr * dr + dc * dc >= cfg.min_separation * cfg.min_separation);
    }
}

TEST_CASE("placement failure raises a helpful error") {
  GenConfig cfg;
  cfg.seed = 1;
  cfg.grid_size = 16;
  cfg.n_tumor = 200;
  cfg.target_r = 0.5;
  CHECK_THROWS_WITH_AS(generate_sample(cfg), doctest::Contains("larger grid"),
                       std::runtime_error);
}

TEST_CASE("benchmark profiles") {
  const auto root = fs::temp_directory_path() / "mllp_bench";
  fs::remove_all(root);

  SUBCASE("easy: 200 samples, deterministic manifest, 5% annotated") {
    generate_benchmark(BenchmarkProfile::Easy, 1, (root / "easy_a").string());
    generate_benchmark(BenchmarkProfile::Easy, 1, (root / "easy_b").string());
    auto read = [](const fs::path& p) {
      std::ifstream f(p);
      std::stringstream ss;
      ss << f.rdbuf();
      return ss.str();
    };
    CHECK(read(root / "easy_a/manifest.json") == read(root / "easy_b/manifest.json"));
    const auto ds = load_dataset((root / "easy_a").string());
    CHECK(ds.size() == 200);
    int annotated = 0;
    for (const auto& s : ds) annotated += s.cells.has_value();
    CHECK(annotated == 10);
  }

  SUBCASE("imbalanced: narrow bucket dominates the 50-75% bucket") {
    generate_benchmark(BenchmarkProfile::Imbalanced, 2, (root / "imb").string());
    const auto ds = load_dataset((root / "imb").string());
    CHECK(ds.size() == 300);
    int n_narrow = 0, n_5075 = 0;
    for (const auto& s : ds) {
      n_narrow += s.interval == IntervalId::I0_1;
      n_5075 += s.interval == IntervalId::I50_75;
    }
    CHECK(n_5075 < n_narrow);
    CHECK(n_narrow > 100);
  }

  SUBCASE("distractor: non-tumor load and annotate_all") {
    generate_benchmark(BenchmarkProfile::Distractor, 3, (root / "dis").string(), true);
    const auto ds = load_dataset((root / "dis").string());
    CHECK(ds.size() == 200);
    for (const auto& s : ds) {
      REQUIRE(s.cells.has_value());  // annotate_all
      int tumor = 0, non = 0;
      for (const auto& c : *s.cells) (c.cls == CellClass::NonTumor ? non : tumor)++;
      CHECK(non >= tumor / 2);
    }
  }
}
