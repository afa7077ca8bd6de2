#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "mllp/detect.hpp"
#include "mllp/propnet.hpp"
#include "mllp/rng.hpp"
#include "mllp/synthgen.hpp"

using namespace mllp;

namespace {

// all-zero weights with head biases chosen so the maps are the constants
// (p, n) everywhere
Model constant_map_model(double p, double n, int downsample = 1) {
  Model m = Model::init(proportion_topology(downsample), 0);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  auto inv_softplus = [](double y) { return std::log(std::exp(y) - 1.0); };
  // the last conv's biases are the final two parameters
  m.params[m.params.size() - 2] = inv_softplus(p);
  m.params[m.params.size() - 1] = inv_softplus(n);
  return m;
}

ImageGrid random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImageGrid g(h, w, 3);
  for (double& v : g.data()) v = rng.uniform();
  return g;
}

}  // namespace

TEST_CASE("masked aggregation") {
  const Model m = constant_map_model(1.0, 1.0);
  const ImageGrid img = random_image(4, 4, 1);
  ImageGrid mask(4, 4, 1, 0.0);
  mask.at(0, 0) = mask.at(1, 2) = mask.at(3, 3) = 1.0;

  const auto est = prop_forward(m, img, mask);
  CHECK(est.s_p == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(est.s_n == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(est.r_hat == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(est.degenerate);

  SUBCASE("r_hat follows the score ratio") {
    const Model m31 = constant_map_model(3.0, 1.0);
    const auto e = prop_forward(m31, img, mask);
    CHECK(e.r_hat == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("empty mask is degenerate") {
    const auto e = prop_forward(m, img, ImageGrid(4, 4, 1, 0.0));
    CHECK(e.degenerate);
    CHECK(e.r_hat == 0.5);
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(prop_forward(m, img, ImageGrid(3, 3, 1, 1.0)), std::invalid_argument);
  }
}

TEST_CASE("unmasked forward equals the all-ones mask bitwise") {
  const Model m = Model::init(proportion_topology(2), 77);
  const ImageGrid img = random_image(16, 16, 2);
  const auto a = prop_forward_unmasked(m, img);
  const auto b = prop_forward(m, img, ImageGrid(16, 16, 1, 1.0));
  CHECK(a.s_p == b.s_p);
  CHECK(a.s_n == b.s_n);
  CHECK(a.r_hat == b.r_hat);
  // softplus-positive maps on a nonempty grid never degenerate
  CHECK_FALSE(a.degenerate);
  CHECK(a.r_hat > 0.0);
  CHECK(a.r_hat < 1.0);
}

TEST_CASE("scale invariance of the ratio") {
  const ImageGrid img = random_image(6, 6, 3);
  ImageGrid mask(6, 6, 1, 0.0);
  mask.at(2, 2) = mask.at(4, 1) = 1.0;
  for (double c : {2.0, 7.5}) {
    const auto a = prop_forward(constant_map_model(0.8, 0.3), img, mask);
    const auto b = prop_forward(constant_map_model(c * 0.8, c * 0.3), img, mask);
    CHECK(a.r_hat == doctest::Approx(b.r_hat).epsilon(1e-9));
  }
}

TEST_CASE("mask downsampling is a max-pool") {
  ImageGrid mask(8, 8, 1, 0.0);
  mask.at(0, 1) = 1.0;  // single pixel marks its 2x2 cell
  mask.at(7, 7) = 1.0;
  const auto d = downsample_mask(mask, 2);
  CHECK(d.height() == 4);
  CHECK(d.at(0, 0) == 1.0);
  CHECK(d.at(3, 3) == 1.0);
  int ones = 0;
  for (double v : d.data()) ones += v == 1.0;
  CHECK(ones == 2);
  CHECK(downsample_mask(mask, 1).data() == mask.data());
}

TEST_CASE("growing the mask where the positive share exceeds r_hat raises r_hat") {
  const Model m = Model::init(proportion_topology(1), 31);
  const ImageGrid img = random_image(8, 8, 5);
  ImageGrid mask(8, 8, 1, 0.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) mask.at(r, c) = 1.0;
  const auto est = prop_forward(m, img, mask);
  const ImageGrid maps = nn_forward(m, img);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      if (mask.at(r, c) == 1.0) continue;
      const double fp = maps.at(r, c, 0), fn = maps.at(r, c, 1);
      if (fp <= est.r_hat * (fp + fn)) continue;
      ImageGrid grown = mask;
      grown.at(r, c) = 1.0;
      CHECK(prop_forward(m, img, grown).r_hat >= est.r_hat);
    }
}

namespace {
std::vector<Sample> toy_dataset(int n, int size, std::uint64_t seed) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    GenConfig cfg;
    cfg.seed = mix_seed(seed, i);
    cfg.grid_size = size;
    cfg.n_tumor = 8;
    cfg.n_nontumor = 2;
    cfg.target_r = (i % 2) ? 0.7 : 0.2;
    out.push_back(generate_sample(cfg, "p" + std::to_string(i)));
  }
  return out;
}
}  // namespace

TEST_CASE("batch parameter gradient matches finite differences") {
  const auto ds = toy_dataset(2, 32, 42);
  std::vector<ImageGrid> masks;
  for (const auto& s : ds) masks.push_back(oracle_mask(s, 3.0));

  PropHyper hp;
  hp.downsample = 2;
  Model m = Model::init(proportion_topology(hp.downsample), 5);

  auto batch_loss = [&](const Model& model, std::vector<double>* grads) {
    double total = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      ForwardCache cache;
      const ImageGrid maps = nn_forward(model, ds[i].image, grads ? &cache : nullptr);
      const ImageGrid md = downsample_mask(masks[i], hp.downsample);
      double sp = 0, sn = 0;
      for (int r = 0; r < maps.height(); ++r)
        for (int c = 0; c < maps.width(); ++c) {
          sp += maps.at(r, c, 0) * md.at(r, c);
          sn += maps.at(r, c, 1) * md.at(r, c);
        }
      const double rh = sp / (sp + sn);
      const auto lv = loss_for_interval(ds[i].interval, rh, LossMode::WFL);
      total += lv.value / ds.size();
      if (grads) {
        const double t2 = (sp + sn) * (sp + sn);
        ImageGrid dm(maps.height(), maps.width(), 2);
        for (int r = 0; r < maps.height(); ++r)
          for (int c = 0; c < maps.width(); ++c) {
            dm.at(r, c, 0) = lv.d_r_hat * sn / t2 * md.at(r, c) / ds.size();
            dm.at(r, c, 1) = -lv.d_r_hat * sp / t2 * md.at(r, c) / ds.size();
          }
        nn_backward(model, cache, dm, *grads);
      }
    }
    return total;
  };

  std::vector<double> grads(m.params.size(), 0.0);
  batch_loss(m, &grads);
  Rng pick(99);
  const double h = 1e-5;
  for (int t = 0; t < 60; ++t) {
    const std::size_t i = pick.uniform_int(m.params.size());
    Model mp = m, mm = m;
    mp.params[i] += h;
    mm.params[i] -= h;
    const double fd = (batch_loss(mp, nullptr) - batch_loss(mm, nullptr)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(grads[i]), 1e-7});
    CHECK(std::abs(grads[i] - fd) / denom < 1e-4);
  }
}

TEST_CASE("training contracts") {
  const auto ds = toy_dataset(12, 32, 7);
  std::vector<ImageGrid> masks;
  for (const auto& s : ds) masks.push_back(oracle_mask(s, 3.0));

  PropHyper hp;
  hp.seed = 2;
  hp.downsample = 2;

  SUBCASE("0 epochs returns the initialized model") {
    hp.epochs = 0;
    const Model m = train_proportion(ds, masks, LossMode::WFL, hp);
    CHECK(m.params == Model::init(proportion_topology(hp.downsample), mix_seed(hp.seed, 0x9a0)).params);
  }
  SUBCASE("deterministic for a fixed seed; mask copies change nothing") {
    hp.epochs = 4;
    const Model a = train_proportion(ds, masks, LossMode::WFL, hp);
    auto mask_copies = masks;  // recomputed/copied masks give identical gradients
    const Model b = train_proportion(ds, mask_copies, LossMode::WFL, hp);
    CHECK(a.params == b.params);
  }
  SUBCASE("missing mask is an error") {
    CHECK_THROWS_AS(train_proportion(ds, {}, LossMode::WFL, hp), std::runtime_error);
    CHECK_THROWS_AS(train_proportion({}, {}, LossMode::WFL, hp), std::runtime_error);
  }
}

TEST_CASE("visualization sidecar is self-consistent") {
  namespace fs = std::filesystem;
  const Model m = Model::init(proportion_topology(2), 3);
  const ImageGrid img = random_image(16, 16, 9);
  ImageGrid mask(16, 16, 1, 0.0);
  for (int r = 4; r < 10; ++r)
    for (int c = 4; c < 10; ++c) mask.at(r, c) = 1.0;
  const auto est = prop_forward(m, img, mask);
  const auto prefix = (fs::temp_directory_path() / "mllp_vis").string();
  export_visualization(est, prefix);

  std::ifstream f(prefix + ".json");
  REQUIRE(f.good());
  nlohmann::json j;
  f >> j;
  CHECK(j["degenerate"].get<bool>() == est.degenerate);
  const double sp = j["s_p"].get<double>(), sn = j["s_n"].get<double>();
  CHECK(j["r_hat"].get<double>() == doctest::Approx(sp / (sp + sn)).epsilon(1e-12));
  // exported maps are at map resolution (input / downsample)
  const ImageGrid pos = load_pnm(prefix + "_positive.ppm");
  CHECK(pos.height() * m.topo.downsample() == img.height());
}
