#ifndef MLLP_DETECT_HPP_
#define MLLP_DETECT_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include "mllp/dataset.hpp"
#include "mllp/nn.hpp"

namespace mllp {

/// Predicted cell position with tumor score in [0,1]; score > 0.5 means
/// the position is classified as a tumor cell.
struct Detection {
  int row = 0;
  int col = 0;
  double tumor_score = 0.5;
};

/// Ground-truth heatmap: max over cells of a unit Gaussian bump at each
/// cell center. Empty cell list gives an all-zero map.
ImageGrid render_gt_heatmap(const std::vector<CellRecord>& cells, int height, int width,
                            double sigma);

/// Sum-of-squares heatmap loss; gradient w.r.t. the estimate is
/// 2*(estimate - target) elementwise.
double detection_loss(const ImageGrid& target, const ImageGrid& estimate,
                      ImageGrid* d_estimate = nullptr);

/// Local maxima >= threshold, greedily accepted in descending value order
/// with Euclidean non-maximum suppression. Ties break by (row, col).
std::vector<std::pair<int, int>> find_peaks(const ImageGrid& heatmap, double threshold,
                                            double nms_radius);

/// Runs the classifier's feature stack once over the full image, then
/// reads the per-position logit at each query position.
std::vector<Detection> classify_cells(const Model& classifier, const ImageGrid& image,
                                      const std::vector<std::pair<int, int>>& positions,
                                      int threads = 1);

/// Mean binary cross-entropy over (score, label) pairs; gradient w.r.t.
/// each logit is (score - label) / N. Scores are clamped to
/// [eps, 1-eps] before logs. An empty batch gives 0 loss, empty gradient
/// and sets *empty_warning when provided.
double classifier_loss(const std::vector<double>& scores, const std::vector<int>& labels,
                       std::vector<double>* d_logits, bool* empty_warning = nullptr);

/// Binary tumor mask: 1 at pixels closer than alpha to any detection with
/// tumor_score > 0.5.
ImageGrid build_mask(const std::vector<Detection>& detections, int height, int width,
                     double alpha);

struct DetectHyper {
  double sigma = 1.5;           // GT heatmap scale (generator cell_radius / 2)
  double peak_threshold = 0.3;
  double nms_radius = 3.0;      // min_separation / 2
  double alpha = 3.0;           // mask disk radius (generator cell_radius)
  double match_radius = 3.0;    // GT matching radius for classifier labels
  double lr = 0.05;
  int batch = 2;
  int epochs = 120;
  // 0.9 lets early background pressure overshoot every head logit below the
  // clamp at once (dead net); 0.5 keeps all folds/seeds alive
  double momentum = 0.5;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

/// Trains the heatmap detector on the cell-annotated samples. Throws if
/// none are annotated. Deterministic for a fixed seed and thread count.
Model train_detector(const std::vector<Sample>& dataset, const DetectHyper& hp,
                     TrainLog* log = nullptr);

/// Trains the tumor/non-tumor classifier on the detector's own outputs:
/// peaks are extracted with the trained detector, matched greedily to the
/// nearest GT cell within match_radius, and unmatched detections are
/// dropped from the BCE.
Model train_classifier(const std::vector<Sample>& dataset, const Model& detector,
                       const DetectHyper& hp, TrainLog* log = nullptr);

/// Mask built from ground-truth cell annotations (tumor classes only),
/// bypassing stage-1. Throws if the sample carries no annotations.
ImageGrid oracle_mask(const Sample& s, double alpha);

/// Full stage-1 inference: heatmap, peaks, per-peak tumor scores.
std::vector<Detection> detect_cells(const Model& detector, const Model& classifier,
                                    const ImageGrid& image, const DetectHyper& hp,
                                    int threads = 1);

void save_train_log(const TrainLog& log, const std::string& path);

}  // namespace mllp

#endif  // MLLP_DETECT_HPP_
