#include "mllp/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mllp/rng.hpp"

namespace mllp {

ImageGrid render_gt_heatmap(const std::vector<CellRecord>& cells, int height, int width,
                            double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("render_gt_heatmap: sigma must be positive");
  ImageGrid h(height, width, 1, 0.0);
  const double denom = 2.0 * sigma * sigma;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      double best = 0.0;
      for (const auto& cell : cells) {
        const double dr = r - cell.row, dc = c - cell.col;
        best = std::max(best, std::exp(-(dr * dr + dc * dc) / denom));
      }
      h.at(r, c) = best;
    }
  return h;
}

double detection_loss(const ImageGrid& target, const ImageGrid& estimate, ImageGrid* d_estimate) {
  if (!target.same_shape(estimate)) throw std::invalid_argument("detection_loss: shape mismatch");
  if (d_estimate) *d_estimate = ImageGrid(target.height(), target.width(), target.channels());
  double loss = 0.0;
  for (std::size_t i = 0; i < target.data().size(); ++i) {
    const double diff = estimate.data()[i] - target.data()[i];
    loss += diff * diff;
    if (d_estimate) d_estimate->data()[i] = 2.0 * diff;
  }
  return loss;
}

std::vector<std::pair<int, int>> find_peaks(const ImageGrid& heatmap, double threshold,
                                            double nms_radius) {
  struct Cand {
    double value;
    int row, col;
  };
  std::vector<Cand> cands;
  for (int r = 0; r < heatmap.height(); ++r)
    for (int c = 0; c < heatmap.width(); ++c) {
      const double v = heatmap.at(r, c);
      if (v < threshold) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (heatmap.in_bounds(r + dr, c + dc) && heatmap.at(r + dr, c + dc) > v) {
            is_max = false;
            break;
          }
        }
      if (is_max) cands.push_back({v, r, c});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.value != b.value) return a.value > b.value;
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  });
  std::vector<std::pair<int, int>> out;
  const double r2 = nms_radius * nms_radius;
  for (const auto& c : cands) {
    bool ok = true;
    for (const auto& p : out) {
      const double dr = p.first - c.row, dc = p.second - c.col;
      if (dr * dr + dc * dc < r2) { ok = false; break; }
    }
    if (ok) out.emplace_back(c.row, c.col);
  }
  return out;
}

std::vector<Detection> classify_cells(const Model& classifier, const ImageGrid& image,
                                      const std::vector<std::pair<int, int>>& positions,
                                      int threads) {
  std::vector<Detection> out;
  if (positions.empty()) return out;
  const ImageGrid logits = nn_forward(classifier, image, nullptr, threads);
  out.reserve(positions.size());
  for (const auto& p : positions)
    out.push_back({p.first, p.second, logistic(logits.at(p.first, p.second))});
  return out;
}

double classifier_loss(const std::vector<double>& scores, const std::vector<int>& labels,
                       std::vector<double>* d_logits, bool* empty_warning) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("classifier_loss: size mismatch");
  if (empty_warning) *empty_warning = scores.empty();
  if (d_logits) d_logits->assign(scores.size(), 0.0);
  if (scores.empty()) return 0.0;
  const double eps = 1e-7;
  const double n = static_cast<double>(scores.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], eps, 1.0 - eps);
    loss += labels[i] ? -std::log(s) : -std::log(1.0 - s);
    if (d_logits) (*d_logits)[i] = (s - labels[i]) / n;
  }
  return loss / n;
}

ImageGrid build_mask(const std::vector<Detection>& detections, int height, int width,
                     double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("build_mask: alpha must be positive");
  ImageGrid m(height, width, 1, 0.0);
  const int reach = static_cast<int>(std::ceil(alpha));
  const double a2 = alpha * alpha;
  for (const auto& d : detections) {
    if (!(d.tumor_score > 0.5)) continue;
    for (int r = d.row - reach; r <= d.row + reach; ++r)
      for (int c = d.col - reach; c <= d.col + reach; ++c) {
        if (!m.in_bounds(r, c)) continue;
        const double dr = r - d.row, dc = c - d.col;
        if (dr * dr + dc * dc < a2) m.at(r, c) = 1.0;
      }
  }
  return m;
}

namespace {

std::vector<std::size_t> annotated_indices(const std::vector<Sample>& dataset) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset[i].cells && !dataset[i].cells->empty()) idx.push_back(i);
  if (idx.empty())
    throw std::runtime_error("stage-1 training requires cell-annotated samples; none found");
  return idx;
}

}  // namespace

Model train_detector(const std::vector<Sample>& dataset, const DetectHyper& hp, TrainLog* log) {
  const auto idx = annotated_indices(dataset);
  Model model = Model::init(detector_topology(), hp.seed);
  if (hp.epochs <= 0) return model;

  std::vector<ImageGrid> gt;
  gt.reserve(idx.size());
  for (auto i : idx)
    gt.push_back(render_gt_heatmap(*dataset[i].cells, dataset[i].image.height(),
                                   dataset[i].image.width(), hp.sigma));

  Rng rng(mix_seed(hp.seed, 0xd37));
  SgdState sgd(model.params.size(), hp.momentum);
  std::vector<std::size_t> order(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch) {
      const std::size_t end = std::min(order.size(), start + hp.batch);
      std::vector<double> grads(model.params.size(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = dataset[idx[order[k]]];
        ForwardCache cache;
        const ImageGrid est = nn_forward(model, s.image, &cache, hp.threads);
        ImageGrid d_est;
        const double loss = detection_loss(gt[order[k]], est, &d_est);
        epoch_loss += loss;
        // mean-per-pixel scaling for a stable step size
        const double scale = 1.0 / (static_cast<double>(d_est.size()) * (end - start));
        for (double& v : d_est.data()) v *= scale;
        nn_backward(model, cache, d_est, grads, hp.threads);
      }
      sgd.step(model.params, grads, hp.lr);
    }
    if (log) log->epoch_loss.push_back(epoch_loss / order.size());
  }
  return model;
}

namespace {

// Greedy one-to-one matching of detections to GT cells in ascending
// distance order; returns (detection index, label) pairs for matched ones.
std::vector<std::pair<std::size_t, int>> match_labels(
    const std::vector<std::pair<int, int>>& positions, const std::vector<CellRecord>& cells,
    double match_radius) {
  struct Pair {
    double d2;
    std::size_t pi, gi;
  };
  std::vector<Pair> pairs;
  const double r2 = match_radius * match_radius;
  for (std::size_t p = 0; p < positions.size(); ++p)
    for (std::size_t g = 0; g < cells.size(); ++g) {
      const double dr = positions[p].first - cells[g].row;
      const double dc = positions[p].second - cells[g].col;
      const double d2 = dr * dr + dc * dc;
      if (d2 <= r2) pairs.push_back({d2, p, g});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return std::pair(a.pi, a.gi) < std::pair(b.pi, b.gi);
  });
  std::vector<bool> p_used(positions.size(), false), g_used(cells.size(), false);
  std::vector<std::pair<std::size_t, int>> out;
  for (const auto& pr : pairs) {
    if (p_used[pr.pi] || g_used[pr.gi]) continue;
    p_used[pr.pi] = g_used[pr.gi] = true;
    out.push_back({pr.pi, cells[pr.gi].cls != CellClass::NonTumor ? 1 : 0});
  }
  return out;
}

}  // namespace

Model train_classifier(const std::vector<Sample>& dataset, const Model& detector,
                       const DetectHyper& hp, TrainLog* log) {
  const auto idx = annotated_indices(dataset);
  Model model = Model::init(classifier_topology(), mix_seed(hp.seed, 0xc1a));
  if (hp.epochs <= 0) return model;

  // stage-1 detector is frozen: extract training positions once
  struct SampleBatch {
    std::size_t sample;
    std::vector<std::pair<int, int>> positions;
    std::vector<int> labels;
  };
  std::vector<SampleBatch> batches;
  for (auto i : idx) {
    const ImageGrid heat = nn_forward(detector, dataset[i].image, nullptr, hp.threads);
    const auto peaks = find_peaks(heat, hp.peak_threshold, hp.nms_radius);
    const auto matched = match_labels(peaks, *dataset[i].cells, hp.match_radius);
    SampleBatch b;
    b.sample = i;
    for (const auto& [pi, label] : matched) {
      b.positions.push_back(peaks[pi]);
      b.labels.push_back(label);
    }
    if (!b.positions.empty()) batches.push_back(std::move(b));
  }
  if (batches.empty())
    throw std::runtime_error("train_classifier: detector produced no matched detections");

  Rng rng(mix_seed(hp.seed, 0xc1b));
  SgdState sgd(model.params.size(), hp.momentum);
  std::vector<std::size_t> order(batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch) {
      const std::size_t end = std::min(order.size(), start + hp.batch);
      std::vector<double> grads(model.params.size(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const SampleBatch& b = batches[order[k]];
        ForwardCache cache;
        const ImageGrid logits = nn_forward(model, dataset[b.sample].image, &cache, hp.threads);
        std::vector<double> scores(b.positions.size());
        for (std::size_t p = 0; p < b.positions.size(); ++p)
          scores[p] = logistic(logits.at(b.positions[p].first, b.positions[p].second));
        std::vector<double> d_logits;
        epoch_loss += classifier_loss(scores, b.labels, &d_logits);
        ImageGrid d_out(logits.height(), logits.width(), 1, 0.0);
        for (std::size_t p = 0; p < b.positions.size(); ++p)
          d_out.at(b.positions[p].first, b.positions[p].second) = d_logits[p] / (end - start);
        nn_backward(model, cache, d_out, grads, hp.threads);
      }
      sgd.step(model.params, grads, hp.lr);
    }
    if (log) log->epoch_loss.push_back(epoch_loss / order.size());
  }
  return model;
}

ImageGrid oracle_mask(const Sample& s, double alpha) {
  if (!s.cells)
    throw std::runtime_error("oracle_mask: sample " + s.id + " has no cell annotations");
  std::vector<Detection> dets;
  for (const auto& c : *s.cells)
    if (c.cls != CellClass::NonTumor) dets.push_back({c.row, c.col, 1.0});
  return build_mask(dets, s.image.height(), s.image.width(), alpha);
}

std::vector<Detection> detect_cells(const Model& detector, const Model& classifier,
                                    const ImageGrid& image, const DetectHyper& hp, int threads) {
  const ImageGrid heat = nn_forward(detector, image, nullptr, threads);
  const auto peaks = find_peaks(heat, hp.peak_threshold, hp.nms_radius);
  return classify_cells(classifier, image, peaks, threads);
}

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_train_log: cannot write " + path);
  f << "epoch,loss\n";
  f.precision(12);
  for (std::size_t i = 0; i < log.epoch_loss.size(); ++i) f << i << ',' << log.epoch_loss[i] << '\n';
}

}  // namespace mllp
