#include "mllp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mllp/rng.hpp"

namespace mllp {

ConfusionMatrix bucketize_predictions(const std::vector<double>& r_hats,
                                      const std::vector<IntervalId>& truths) {
  if (r_hats.size() != truths.size())
    throw std::invalid_argument("bucketize_predictions: length mismatch");
  ConfusionMatrix m{};
  for (std::size_t i = 0; i < r_hats.size(); ++i)
    ++m[static_cast<int>(truths[i])][static_cast<int>(interval_of(r_hats[i]))];
  return m;
}

MacroMetrics macro_metrics(const ConfusionMatrix& c) {
  MacroMetrics out;
  for (int i = 0; i < kNumIntervals; ++i) {
    long row = 0, col = 0;
    for (int j = 0; j < kNumIntervals; ++j) {
      row += c[i][j];
      col += c[j][i];
    }
    const double diag = static_cast<double>(c[i][i]);
    out.recall[i] = row ? diag / row : 0.0;
    out.precision[i] = col ? diag / col : 0.0;
    const double pr = out.precision[i] + out.recall[i];
    out.f1[i] = pr > 0.0 ? 2.0 * out.precision[i] * out.recall[i] / pr : 0.0;
    out.m_recall += out.recall[i] / kNumIntervals;
    out.m_precision += out.precision[i] / kNumIntervals;
    out.m_f1 += out.f1[i] / kNumIntervals;
  }
  return out;
}

DetectionMetrics detection_metrics(const std::vector<Detection>& pred,
                                   const std::vector<CellRecord>& gt, double match_radius) {
  if (match_radius <= 0.0) throw std::invalid_argument("detection_metrics: bad match radius");
  struct Pair {
    double d2;
    std::size_t pi, gi;
  };
  std::vector<Pair> pairs;
  const double r2 = match_radius * match_radius;
  for (std::size_t p = 0; p < pred.size(); ++p)
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double dr = pred[p].row - gt[g].row, dc = pred[p].col - gt[g].col;
      const double d2 = dr * dr + dc * dc;
      if (d2 <= r2) pairs.push_back({d2, p, g});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return std::pair(a.pi, a.gi) < std::pair(b.pi, b.gi);
  });
  std::vector<bool> p_used(pred.size(), false), g_used(gt.size(), false);
  long tp = 0;
  for (const auto& pr : pairs) {
    if (p_used[pr.pi] || g_used[pr.gi]) continue;
    p_used[pr.pi] = g_used[pr.gi] = true;
    ++tp;
  }
  DetectionMetrics m;
  m.precision = pred.empty() ? 0.0 : static_cast<double>(tp) / pred.size();
  m.recall = gt.empty() ? 0.0 : static_cast<double>(tp) / gt.size();
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

MaskMode mask_mode_from_name(const std::string& name) {
  if (name == "masked") return MaskMode::Masked;
  if (name == "unmasked") return MaskMode::Unmasked;
  if (name == "oracle-mask") return MaskMode::OracleMask;
  throw std::runtime_error("unknown mask mode: " + name);
}

std::string mask_mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::Masked: return "masked";
    case MaskMode::Unmasked: return "unmasked";
    case MaskMode::OracleMask: return "oracle-mask";
  }
  throw std::logic_error("mask_mode_name: bad mode");
}

std::vector<ImageGrid> compute_masks(const std::vector<Sample>& dataset, const Model* detector,
                                     const Model* classifier, const PipelineConfig& cfg) {
  std::vector<ImageGrid> masks;
  masks.reserve(dataset.size());
  for (const auto& s : dataset) {
    switch (cfg.mask_mode) {
      case MaskMode::Unmasked:
        masks.emplace_back(s.image.height(), s.image.width(), 1, 1.0);
        break;
      case MaskMode::OracleMask:
        masks.push_back(oracle_mask(s, cfg.detect.alpha));
        break;
      case MaskMode::Masked: {
        if (!detector || !classifier)
          throw std::runtime_error("compute_masks: masked mode requires stage-1 models");
        const auto dets = detect_cells(*detector, *classifier, s.image, cfg.detect, cfg.threads);
        masks.push_back(build_mask(dets, s.image.height(), s.image.width(), cfg.detect.alpha));
        break;
      }
    }
  }
  return masks;
}

EvalReport cross_validate(const std::vector<Sample>& dataset, int k, const PipelineConfig& cfg) {
  if (k < 2) throw std::invalid_argument("cross_validate: k must be >= 2");
  if (static_cast<std::size_t>(k) > dataset.size())
    throw std::invalid_argument("cross_validate: more folds than samples");

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng fold_rng(mix_seed(cfg.seed, 0xf01d));
  fold_rng.shuffle(order);
  std::vector<int> fold_of(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = static_cast<int>(i % k);

  EvalReport report;
  double det_f1_sum = 0.0;
  int det_f1_folds = 0;

  for (int fold = 0; fold < k; ++fold) {
    std::vector<Sample> train_set;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (fold_of[i] == fold) test_idx.push_back(i);
      else train_set.push_back(dataset[i]);
    }

    PipelineConfig fold_cfg = cfg;
    fold_cfg.detect.seed = mix_seed(cfg.seed, 0x100 + fold);
    fold_cfg.detect.threads = cfg.threads;
    fold_cfg.classify.seed = fold_cfg.detect.seed;
    fold_cfg.classify.threads = cfg.threads;
    fold_cfg.prop.seed = mix_seed(cfg.seed, 0x200 + fold);
    fold_cfg.prop.threads = cfg.threads;
    // geometry fields are owned by `detect`
    fold_cfg.classify.sigma = fold_cfg.detect.sigma;
    fold_cfg.classify.peak_threshold = fold_cfg.detect.peak_threshold;
    fold_cfg.classify.nms_radius = fold_cfg.detect.nms_radius;
    fold_cfg.classify.alpha = fold_cfg.detect.alpha;
    fold_cfg.classify.match_radius = fold_cfg.detect.match_radius;

    Model detector, classifier;
    const bool masked = cfg.mask_mode == MaskMode::Masked;
    if (masked) {
      detector = train_detector(train_set, fold_cfg.detect);
      classifier = train_classifier(train_set, detector, fold_cfg.classify);
    }
    const auto train_masks =
        compute_masks(train_set, masked ? &detector : nullptr, masked ? &classifier : nullptr,
                      fold_cfg);
    const Model prop =
        train_proportion(train_set, train_masks, cfg.loss_mode, fold_cfg.prop);

    std::vector<double> r_hats;
    std::vector<IntervalId> truths;
    DetectionMetrics det_acc;
    int det_count = 0;
    for (std::size_t i : test_idx) {
      const Sample& s = dataset[i];
      ImageGrid mask(s.image.height(), s.image.width(), 1, 1.0);
      if (cfg.mask_mode == MaskMode::OracleMask) {
        mask = oracle_mask(s, cfg.detect.alpha);
      } else if (masked) {
        const auto dets = detect_cells(detector, classifier, s.image, fold_cfg.detect,
                                       cfg.threads);
        mask = build_mask(dets, s.image.height(), s.image.width(), fold_cfg.detect.alpha);
        if (s.cells) {
          det_acc.f1 += detection_metrics(dets, *s.cells, fold_cfg.detect.match_radius).f1;
          ++det_count;
        }
      }
      const auto est = prop_forward(prop, s.image, mask, cfg.threads);
      r_hats.push_back(est.r_hat);
      truths.push_back(s.interval);
    }

    const ConfusionMatrix cm = bucketize_predictions(r_hats, truths);
    const MacroMetrics mm = macro_metrics(cm);
    for (int i = 0; i < kNumIntervals; ++i) {
      report.per_interval_recall[i] += mm.recall[i] / k;
      for (int j = 0; j < kNumIntervals; ++j) report.confusion[i][j] += cm[i][j];
    }
    report.m_recall += mm.m_recall / k;
    report.m_precision += mm.m_precision / k;
    report.m_f1 += mm.m_f1 / k;
    if (det_count > 0) {
      det_f1_sum += det_acc.f1 / det_count;
      ++det_f1_folds;
    }
  }
  if (det_f1_folds > 0) report.detection_f1 = det_f1_sum / det_f1_folds;
  return report;
}

void save_report_json(const EvalReport& report, const std::string& path) {
  nlohmann::json j;
  j["confusion"] = nlohmann::json::array();
  for (int i = 0; i < kNumIntervals; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < kNumIntervals; ++c) row.push_back(report.confusion[i][c]);
    j["confusion"].push_back(row);
  }
  for (int i = 0; i < kNumIntervals; ++i)
    j["per_interval_recall"].push_back(report.per_interval_recall[i]);
  j["m_recall"] = report.m_recall;
  j["m_precision"] = report.m_precision;
  j["m_f1"] = report.m_f1;
  if (report.detection_f1) j["detection_f1"] = *report.detection_f1;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_report_json: cannot write " + path);
  f << j.dump(1) << "\n";
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  os << "  0-1%   1-25%  25-50% 50-75% 75-100% mRecall mPrecision mF1\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "  %.3f  %.3f  %.3f  %.3f  %.3f   %.3f   %.3f      %.3f\n",
                report.per_interval_recall[0], report.per_interval_recall[1],
                report.per_interval_recall[2], report.per_interval_recall[3],
                report.per_interval_recall[4], report.m_recall, report.m_precision, report.m_f1);
  os << buf;
  return os.str();
}

}  // namespace mllp
