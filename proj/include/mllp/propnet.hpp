#ifndef MLLP_PROPNET_HPP_
#define MLLP_PROPNET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mllp/dataset.hpp"
#include "mllp/losses.hpp"
#include "mllp/nn.hpp"

namespace mllp {

inline constexpr double kDegenerateSumEps = 1e-12;

/// Masked aggregation result: scores, ratio, and the masked maps kept for
/// visualization.
struct ProportionEstimate {
  double s_p = 0.0;
  double s_n = 0.0;
  double r_hat = 0.5;
  bool degenerate = false;  // mask empty at map resolution
  ImageGrid pos_map;        // F_p (x) M at map resolution
  ImageGrid neg_map;        // F_n (x) M
  ImageGrid mask_d;         // downsampled mask
};

/// Max-pools a full-resolution binary mask to map resolution: a map cell
/// is tumor if any covered pixel is.
ImageGrid downsample_mask(const ImageGrid& mask, int factor);

/// Masked forward: s_p/s_n are the sums of the masked positive/negative
/// maps and r_hat = s_p / (s_p + s_n). An empty mask sets the degenerate
/// flag and r_hat = 0.5.
ProportionEstimate prop_forward(const Model& model, const ImageGrid& image,
                                const ImageGrid& mask, int threads = 1);

/// forward with an all-ones mask.
ProportionEstimate prop_forward_unmasked(const Model& model, const ImageGrid& image,
                                         int threads = 1);

struct PropHyper {
  double lr = 0.02;
  int batch = 8;
  int epochs = 100;
  int patience = 30;   // early stopping on validation loss
  double momentum = 0.9;
  int downsample = 2;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct PropTrainLog {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  bool stopped_early = false;
  int best_epoch = -1;
};

/// Stage-2 training against interval labels only. masks[i] is the frozen
/// stage-1 mask for dataset[i] (full image resolution); no gradient flows
/// into stage-1. Degenerate samples (empty mask) are skipped. Deterministic
/// for fixed seed and thread count.
Model train_proportion(const std::vector<Sample>& dataset, const std::vector<ImageGrid>& masks,
                       LossMode mode, const PropHyper& hp, PropTrainLog* log = nullptr);

/// Writes mask/positive/negative/overlay pixmaps plus a JSON sidecar
/// {s_p, s_n, r_hat, degenerate}.
void export_visualization(const ProportionEstimate& est, const std::string& out_prefix);

void save_prop_train_log(const PropTrainLog& log, const std::string& path);

}  // namespace mllp

#endif  // MLLP_PROPNET_HPP_
