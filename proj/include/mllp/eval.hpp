#ifndef MLLP_EVAL_HPP_
#define MLLP_EVAL_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mllp/detect.hpp"
#include "mllp/propnet.hpp"

namespace mllp {

using ConfusionMatrix = std::array<std::array<long, kNumIntervals>, kNumIntervals>;

struct MacroMetrics {
  std::array<double, kNumIntervals> recall{};
  std::array<double, kNumIntervals> precision{};
  std::array<double, kNumIntervals> f1{};
  double m_recall = 0.0;
  double m_precision = 0.0;
  double m_f1 = 0.0;
};

/// Aggregated evaluation result. The confusion matrix is summed over
/// folds; macro metrics and per-interval recalls are unweighted means of
/// the per-fold values.
struct EvalReport {
  ConfusionMatrix confusion{};
  std::array<double, kNumIntervals> per_interval_recall{};
  double m_recall = 0.0;
  double m_precision = 0.0;
  double m_f1 = 0.0;
  std::optional<double> detection_f1;
};

/// Accumulates (true interval, interval_of(r_hat)) counts.
ConfusionMatrix bucketize_predictions(const std::vector<double>& r_hats,
                                      const std::vector<IntervalId>& truths);

/// Per-class recall/precision/F1 with zero-denominator convention 0, and
/// their unweighted macro means. m_f1 is the mean of per-class F1 values.
MacroMetrics macro_metrics(const ConfusionMatrix& confusion);

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Greedy one-to-one matching in ascending distance order within
/// match_radius; standard precision/recall/F1 with empty-set convention 0.
DetectionMetrics detection_metrics(const std::vector<Detection>& pred,
                                   const std::vector<CellRecord>& gt, double match_radius);

enum class MaskMode { Masked, Unmasked, OracleMask };

MaskMode mask_mode_from_name(const std::string& name);
std::string mask_mode_name(MaskMode m);

struct PipelineConfig {
  DetectHyper detect;
  DetectHyper classify;  // classifier training knobs; geometry comes from `detect`
  PropHyper prop;
  LossMode loss_mode = LossMode::WFL;
  MaskMode mask_mode = MaskMode::Masked;
  int folds = 4;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Per-sample masks under the configured mask mode. Masked mode runs the
/// given stage-1 models; oracle mode needs annotations on every sample.
std::vector<ImageGrid> compute_masks(const std::vector<Sample>& dataset, const Model* detector,
                                     const Model* classifier, const PipelineConfig& cfg);

/// Deterministic k-fold cross-validation of the full pipeline: stage-1 is
/// retrained per fold on the annotated samples of the training split
/// (masked mode), stage-2 on the training split's interval labels, and the
/// held-out fold is bucketized. detection_f1 is reported in masked mode
/// when test folds contain annotated samples.
EvalReport cross_validate(const std::vector<Sample>& dataset, int k, const PipelineConfig& cfg);

void save_report_json(const EvalReport& report, const std::string& path);

/// Aligned text table in clinical column order
/// (0-1% ... 75-100%, mRecall, mPrecision, mF1).
std::string report_table(const EvalReport& report);

}  // namespace mllp

#endif  // MLLP_EVAL_HPP_
