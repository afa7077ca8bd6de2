#include "mllp/propnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "mllp/rng.hpp"

namespace mllp {

ImageGrid downsample_mask(const ImageGrid& mask, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample_mask: bad factor");
  if (factor == 1) return mask;
  const int h = (mask.height() + factor - 1) / factor;
  const int w = (mask.width() + factor - 1) / factor;
  ImageGrid out(h, w, 1, 0.0);
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask.at(r, c) != 0.0) out.at(r / factor, c / factor) = 1.0;
  return out;
}

namespace {

ProportionEstimate aggregate(const ImageGrid& maps, const ImageGrid& mask_d) {
  if (maps.height() != mask_d.height() || maps.width() != mask_d.width())
    throw std::invalid_argument("prop_forward: mask/map shape mismatch");
  ProportionEstimate est;
  est.mask_d = mask_d;
  est.pos_map = ImageGrid(maps.height(), maps.width(), 1);
  est.neg_map = ImageGrid(maps.height(), maps.width(), 1);
  for (int r = 0; r < maps.height(); ++r)
    for (int c = 0; c < maps.width(); ++c) {
      const double m = mask_d.at(r, c);
      est.pos_map.at(r, c) = maps.at(r, c, 0) * m;
      est.neg_map.at(r, c) = maps.at(r, c, 1) * m;
      est.s_p += est.pos_map.at(r, c);
      est.s_n += est.neg_map.at(r, c);
    }
  const double total = est.s_p + est.s_n;
  if (total <= kDegenerateSumEps) {
    est.degenerate = true;
    est.r_hat = 0.5;
  } else {
    est.r_hat = est.s_p / total;
  }
  return est;
}

}  // namespace

ProportionEstimate prop_forward(const Model& model, const ImageGrid& image, const ImageGrid& mask,
                                int threads) {
  if (mask.height() != image.height() || mask.width() != image.width())
    throw std::invalid_argument("prop_forward: mask/image shape mismatch");
  const ImageGrid maps = nn_forward(model, image, nullptr, threads);
  return aggregate(maps, downsample_mask(mask, model.topo.downsample()));
}

ProportionEstimate prop_forward_unmasked(const Model& model, const ImageGrid& image, int threads) {
  return prop_forward(model, image, ImageGrid(image.height(), image.width(), 1, 1.0), threads);
}

namespace {

// One sample's loss and parameter-gradient contribution.
double sample_loss_grad(const Model& model, const Sample& s, const ImageGrid& mask_d,
                        LossMode mode, std::vector<double>* grads, double grad_scale,
                        int threads, bool* degenerate) {
  ForwardCache cache;
  const ImageGrid maps = nn_forward(model, s.image, grads ? &cache : nullptr, threads);
  double s_p = 0.0, s_n = 0.0;
  for (int r = 0; r < maps.height(); ++r)
    for (int c = 0; c < maps.width(); ++c) {
      s_p += maps.at(r, c, 0) * mask_d.at(r, c);
      s_n += maps.at(r, c, 1) * mask_d.at(r, c);
    }
  const double total = s_p + s_n;
  if (total <= kDegenerateSumEps) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  const double r_hat = s_p / total;
  const LossValue lv = loss_for_interval(s.interval, r_hat, mode);
  if (grads) {
    const double d_sp = lv.d_r_hat * s_n / (total * total);
    const double d_sn = -lv.d_r_hat * s_p / (total * total);
    ImageGrid d_maps(maps.height(), maps.width(), 2);
    for (int r = 0; r < maps.height(); ++r)
      for (int c = 0; c < maps.width(); ++c) {
        d_maps.at(r, c, 0) = d_sp * mask_d.at(r, c) * grad_scale;
        d_maps.at(r, c, 1) = d_sn * mask_d.at(r, c) * grad_scale;
      }
    nn_backward(model, cache, d_maps, *grads, threads);
  }
  return lv.value;
}

}  // namespace

Model train_proportion(const std::vector<Sample>& dataset, const std::vector<ImageGrid>& masks,
                       LossMode mode, const PropHyper& hp, PropTrainLog* log) {
  if (dataset.empty()) throw std::runtime_error("train_proportion: empty dataset");
  if (masks.size() != dataset.size())
    throw std::runtime_error("train_proportion: mask missing for some sample");
  Model model = Model::init(proportion_topology(hp.downsample), mix_seed(hp.seed, 0x9a0));
  if (hp.epochs <= 0) return model;

  const int d = model.topo.downsample();
  std::vector<ImageGrid> masks_d;
  masks_d.reserve(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].height() != dataset[i].image.height() ||
        masks[i].width() != dataset[i].image.width())
      throw std::runtime_error("train_proportion: mask shape mismatch for sample " +
                               dataset[i].id);
    masks_d.push_back(downsample_mask(masks[i], d));
  }

  // deterministic 80/20 train/val split for early stopping
  std::vector<std::size_t> indices(dataset.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  Rng split_rng(mix_seed(hp.seed, 0xe5));
  split_rng.shuffle(indices);
  const std::size_t n_val = std::max<std::size_t>(1, indices.size() / 5);
  std::vector<std::size_t> val(indices.begin(), indices.begin() + n_val);
  std::vector<std::size_t> train(indices.begin() + n_val, indices.end());
  if (train.empty()) train = val;

  Rng rng(mix_seed(hp.seed, 0xba7c4));
  SgdState sgd(model.params.size(), hp.momentum);
  std::vector<double> best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1, since_best = 0;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(train);
    double train_loss = 0.0;
    std::size_t train_used = 0;
    for (std::size_t start = 0; start < train.size(); start += hp.batch) {
      const std::size_t end = std::min(train.size(), start + hp.batch);
      std::vector<double> grads(model.params.size(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = train[k];
        bool degenerate = false;
        const double loss =
            sample_loss_grad(model, dataset[i], masks_d[i], mode, &grads,
                             1.0 / static_cast<double>(end - start), hp.threads, &degenerate);
        if (!degenerate) {
          train_loss += loss;
          ++train_used;
        }
      }
      sgd.step(model.params, grads, hp.lr);
    }
    double val_loss = 0.0;
    std::size_t val_used = 0;
    for (std::size_t i : val) {
      bool degenerate = false;
      const double loss =
          sample_loss_grad(model, dataset[i], masks_d[i], mode, nullptr, 1.0, 1, &degenerate);
      if (!degenerate) {
        val_loss += loss;
        ++val_used;
      }
    }
    val_loss = val_used ? val_loss / val_used : 0.0;
    if (log) {
      log->train_loss.push_back(train_used ? train_loss / train_used : 0.0);
      log->val_loss.push_back(val_loss);
    }
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = model.params;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= hp.patience) {
      if (log) log->stopped_early = true;
      break;
    }
  }
  model.params = std::move(best_params);
  if (log) log->best_epoch = best_epoch;
  return model;
}

namespace {

ImageGrid colorize(const ImageGrid& map, int red_ch) {
  // single-channel map rendered into the chosen color channel, normalized
  const double mx = std::max(map.max_value(), 1e-12);
  ImageGrid out(map.height(), map.width(), 3, 0.0);
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) out.at(r, c, red_ch) = map.at(r, c) / mx;
  return out;
}

}  // namespace

void export_visualization(const ProportionEstimate& est, const std::string& out_prefix) {
  save_pnm(est.mask_d, out_prefix + "_mask.pgm", 8);
  save_pnm(colorize(est.pos_map, 0), out_prefix + "_positive.ppm", 8);
  save_pnm(colorize(est.neg_map, 2), out_prefix + "_negative.ppm", 8);
  ImageGrid overlay(est.pos_map.height(), est.pos_map.width(), 3, 0.0);
  const double mx =
      std::max({est.pos_map.max_value(), est.neg_map.max_value(), 1e-12});
  for (int r = 0; r < overlay.height(); ++r)
    for (int c = 0; c < overlay.width(); ++c) {
      overlay.at(r, c, 0) = est.pos_map.at(r, c) / mx;
      overlay.at(r, c, 2) = est.neg_map.at(r, c) / mx;
    }
  save_pnm(overlay, out_prefix + "_overlay.ppm", 8);
  nlohmann::json sidecar = {{"s_p", est.s_p},
                            {"s_n", est.s_n},
                            {"r_hat", est.r_hat},
                            {"degenerate", est.degenerate}};
  std::ofstream f(out_prefix + ".json");
  if (!f) throw std::runtime_error("export_visualization: cannot write sidecar");
  f << sidecar.dump(1) << "\n";
}

void save_prop_train_log(const PropTrainLog& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_prop_train_log: cannot write " + path);
  f << "epoch,train_loss,val_loss,stopped_early\n";
  f.precision(12);
  for (std::size_t i = 0; i < log.train_loss.size(); ++i)
    f << i << ',' << log.train_loss[i] << ',' << log.val_loss[i] << ','
      << (log.stopped_early && i + 1 == log.train_loss.size() ? 1 : 0) << '\n';
}

}  // namespace mllp
