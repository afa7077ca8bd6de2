#ifndef MLLP_CONFIG_HPP_
#define MLLP_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "mllp/eval.hpp"
#include "mllp/synthgen.hpp"

namespace mllp {

/// Orchestration config for the CLI. JSON round-trips losslessly; unknown
/// keys are rejected with the offending path named.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;

  std::string dataset_path = "data";
  std::string output_path = "out";
  std::string checkpoint_path = "checkpoints";

  std::string generator_profile = "easy";
  std::uint64_t generator_seed = 1;
  bool generator_annotate_all = false;

  DetectHyper detector;      // detector training + peak/mask geometry
  DetectHyper classifier;    // classifier training (geometry fields shared)
  PropHyper proportion;

  LossMode loss_mode = LossMode::WFL;
  MaskMode mask_mode = MaskMode::Masked;
  int eval_folds = 4;

  /// Pipeline view with geometry taken from `detector` and the classifier
  /// training knobs folded in.
  PipelineConfig pipeline() const;
};

RunConfig default_run_config();

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

/// Applies the MASKED_LLP_SEED environment variable, when set, on top of
/// the configured seed.
void apply_env_seed(RunConfig& cfg);

}  // namespace mllp

#endif  // MLLP_CONFIG_HPP_
