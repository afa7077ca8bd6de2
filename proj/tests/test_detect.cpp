#include <cmath>

#include "doctest.h"
#include "mllp/detect.hpp"
#include "mllp/rng.hpp"
#include "mllp/synthgen.hpp"

using namespace mllp;

TEST_CASE("gt heatmap values") {
  SUBCASE("one cell at center") {
    const auto h = render_gt_heatmap({{4, 4, CellClass::PosTumor}}, 9, 9, 1.0);
    CHECK(h.at(4, 4) == 1.0);
    CHECK(h.max_value() == 1.0);
    CHECK(h.min_value() >= 0.0);
  }
  SUBCASE("no cells") {
    const auto h = render_gt_heatmap({}, 5, 5, 1.0);
    CHECK(h.max_value() == 0.0);
  }
  SUBCASE("two cells 2px apart: midpoint is max of two equal terms") {
    const auto h = render_gt_heatmap({{4, 3, CellClass::PosTumor}, {4, 5, CellClass::NegTumor}},
                                     9, 9, 1.0);
    CHECK(h.at(4, 4) == doctest::Approx(0.60653065971263).epsilon(1e-12));
    CHECK(h.at(4, 3) == 1.0);  // exp(-2) from the neighbor never exceeds 1
  }
  CHECK_THROWS_AS(render_gt_heatmap({}, 3, 3, 0.0), std::invalid_argument);
}

TEST_CASE("detection loss and gradient") {
  ImageGrid a(1, 1, 1, 0.0), b(1, 1, 1, 1.0);
  ImageGrid grad;
  CHECK(detection_loss(a, a, nullptr) == 0.0);
  CHECK(detection_loss(a, b, &grad) == 1.0);
  CHECK(grad.at(0, 0) == 2.0);
  CHECK_THROWS_AS(detection_loss(a, ImageGrid(2, 2, 1)), std::invalid_argument);

  // finite-difference oracle on a random 4x4 pair
  Rng rng(8);
  ImageGrid t(4, 4, 1), e(4, 4, 1);
  for (double& v : t.data()) v = rng.uniform();
  for (double& v : e.data()) v = rng.uniform();
  ImageGrid g;
  detection_loss(t, e, &g);
  const double h = 1e-6;
  for (int i = 0; i < 16; ++i) {
    ImageGrid ep = e, em = e;
    ep.data()[i] += h;
    em.data()[i] -= h;
    const double fd = (detection_loss(t, ep, nullptr) - detection_loss(t, em, nullptr)) / (2 * h);
    CHECK(std::abs(g.data()[i] - fd) / std::max(std::abs(fd), 1e-9) < 1e-6);
  }
}

TEST_CASE("find_peaks") {
  SUBCASE("single blob gives one peak at its center") {
    const auto h = render_gt_heatmap({{10, 12, CellClass::PosTumor}}, 21, 21, 2.0);
    const auto peaks = find_peaks(h, 0.3, 3.0);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0] == std::pair(10, 12));
  }
  SUBCASE("all-zero map gives no peaks") {
    CHECK(find_peaks(ImageGrid(8, 8, 1, 0.0), 0.3, 3.0).empty());
  }
  SUBCASE("two equal peaks 1px apart are merged, lexicographic winner") {
    ImageGrid h(7, 7, 1, 0.0);
    h.at(3, 3) = 0.9;
    h.at(3, 4) = 0.9;
    const auto peaks = find_peaks(h, 0.3, 3.0);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0] == std::pair(3, 3));
  }
  SUBCASE("accepted peaks form a valid packing") {
    Rng rng(17);
    ImageGrid h(32, 32, 1);
    for (double& v : h.data()) v = rng.uniform();
    const double radius = 4.0;
    const auto peaks = find_peaks(h, 0.1, radius);
    for (std::size_t i = 0; i < peaks.size(); ++i)
      for (std::size_t j = i + 1; j < peaks.size(); ++j) {
        const double dr = peaks[i].first - peaks[j].first;
        const double dc = peaks[i].second - peaks[j].second;
        CHECK(dr * dr + dc * dc >= radius * radius);
      }
  }
}

TEST_CASE("classify_cells") {
  const Model zero{classifier_topology(),
                   std::vector<double>(classifier_topology().param_count(), 0.0)};
  GenConfig cfg;
  cfg.seed = 3;
  cfg.grid_size = 32;
  cfg.n_tumor = 6;
  cfg.target_r = 0.5;
  const Sample s = generate_sample(cfg);

  SUBCASE("all-zero model scores exactly 0.5") {
    const auto dets = classify_cells(zero, s.image, {{3, 3}, {10, 20}});
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].tumor_score == 0.5);
    CHECK(dets[1].tumor_score == 0.5);
  }
  SUBCASE("empty positions give empty output") {
    CHECK(classify_cells(zero, s.image, {}).empty());
  }
  SUBCASE("scores are batch-independent") {
    const Model m = Model::init(classifier_topology(), 55);
    const auto one = classify_cells(m, s.image, {{7, 9}});
    const auto batch = classify_cells(m, s.image, {{2, 2}, {7, 9}, {30, 30}});
    CHECK(one[0].tumor_score == batch[1].tumor_score);
  }
}

TEST_CASE("classifier loss") {
  SUBCASE("perfect predictions give ~0") {
    CHECK(classifier_loss({1.0, 0.0}, {1, 0}, nullptr) == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("uninformative 0.5 scores give ln 2") {
    CHECK(classifier_loss({0.5, 0.5, 0.5}, {1, 0, 1}, nullptr) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("empty matched set is defined as 0 with a warning") {
    bool warn = false;
    std::vector<double> d;
    CHECK(classifier_loss({}, {}, &d, &warn) == 0.0);
    CHECK(warn);
    CHECK(d.empty());
  }
  SUBCASE("gradient matches finite differences through the logistic") {
    Rng rng(12);
    std::vector<double> logits(10);
    std::vector<int> labels(10);
    for (int i = 0; i < 10; ++i) {
      logits[i] = rng.uniform(-3, 3);
      labels[i] = rng.uniform() < 0.5;
    }
    auto eval = [&](const std::vector<double>& lg, std::vector<double>* d) {
      std::vector<double> scores(lg.size());
      for (std::size_t i = 0; i < lg.size(); ++i) scores[i] = logistic(lg[i]);
      return classifier_loss(scores, labels, d);
    };
    std::vector<double> d;
    eval(logits, &d);
    const double h = 1e-6;
    for (int i = 0; i < 10; ++i) {
      auto lp = logits, lm = logits;
      lp[i] += h;
      lm[i] -= h;
      const double fd = (eval(lp, nullptr) - eval(lm, nullptr)) / (2 * h);
      CHECK(std::abs(d[i] - fd) / std::max(std::abs(fd), 1e-9) < 1e-5);
    }
  }
}

TEST_CASE("build_mask") {
  SUBCASE("no tumor detections, no mask") {
    const auto m = build_mask({{5, 5, 0.4}}, 11, 11, 2.0);
    CHECK(m.max_value() == 0.0);
  }
  SUBCASE("one tumor detection, alpha 2: exactly 9 interior pixels") {
    const auto m = build_mask({{5, 5, 0.9}}, 11, 11, 2.0);
    int ones = 0;
    for (double v : m.data()) {
      CHECK((v == 0.0 || v == 1.0));
      ones += v == 1.0;
    }
    CHECK(ones == 9);  // brute-force count of offsets with d < 2
  }
  SUBCASE("union of overlapping disks stays binary and is monotone") {
    const auto one = build_mask({{4, 4, 0.9}}, 11, 11, 3.0);
    const auto two = build_mask({{4, 4, 0.9}, {5, 6, 0.8}}, 11, 11, 3.0);
    for (std::size_t i = 0; i < one.data().size(); ++i) {
      CHECK((two.data()[i] == 0.0 || two.data()[i] == 1.0));
      if (one.data()[i] == 1.0) CHECK(two.data()[i] == 1.0);  // adding never unsets
    }
  }
}

TEST_CASE("stage-1 training contracts") {
  GenConfig cfg;
  cfg.seed = 9;
  cfg.grid_size = 48;
  cfg.n_tumor = 10;
  cfg.n_nontumor = 4;
  cfg.target_r = 0.5;
  std::vector<Sample> ds = {generate_sample(cfg, "t0")};
  cfg.seed = 10;
  ds.push_back(generate_sample(cfg, "t1"));

  DetectHyper hp;
  hp.seed = 3;

  SUBCASE("0 epochs returns the initialized model unchanged") {
    hp.epochs = 0;
    const Model m = train_detector(ds, hp);
    CHECK(m.params == Model::init(detector_topology(), hp.seed).params);
  }
  SUBCASE("fixed seed gives identical parameters") {
    hp.epochs = 3;
    const Model a = train_detector(ds, hp);
    const Model b = train_detector(ds, hp);
    CHECK(a.params == b.params);
  }
  SUBCASE("training loss ends below the all-zero-model loss") {
    hp.epochs = 30;
    TrainLog log;
    const Model m = train_detector(ds, hp, &log);
    const Model zero{detector_topology(),
                     std::vector<double>(detector_topology().param_count(), 0.0)};
    double zero_loss = 0.0, trained_loss = 0.0;
    for (const auto& s : ds) {
      const auto gt = render_gt_heatmap(*s.cells, s.image.height(), s.image.width(), hp.sigma);
      zero_loss += detection_loss(gt, nn_forward(zero, s.image), nullptr);
      trained_loss += detection_loss(gt, nn_forward(m, s.image), nullptr);
    }
    CHECK(trained_loss < zero_loss);
  }
  SUBCASE("unannotated dataset is a configuration error") {
    auto blank = ds;
    for (auto& s : blank) s.cells.reset();
    CHECK_THROWS_AS(train_detector(blank, hp), std::runtime_error);
    CHECK_THROWS_AS(train_classifier(blank, Model::init(detector_topology(), 1), hp),
                    std::runtime_error);
  }
}

TEST_CASE("oracle mask uses tumor cells only") {
  GenConfig cfg;
  cfg.seed = 21;
  cfg.grid_size = 32;
  cfg.n_tumor = 4;
  cfg.n_nontumor = 3;
  cfg.target_r = 0.5;
  const Sample s = generate_sample(cfg);
  const auto m = oracle_mask(s, 3.0);
  for (const auto& c : *s.cells) {
    if (c.cls != CellClass::NonTumor) CHECK(m.at(c.row, c.col) == 1.0);
  }
  Sample stripped = s;
  stripped.cells.reset();
  CHECK_THROWS_AS(oracle_mask(stripped, 3.0), std::runtime_error);
}
