#ifndef MLLP_SYNTHGEN_HPP_
#define MLLP_SYNTHGEN_HPP_

#include <array>
#include <cstdint>
#include <string>

#include "mllp/dataset.hpp"

namespace mllp {

/// Per-channel mean colors and rendering knobs for the three cell classes.
struct Appearance {
  std::array<double, 3> pos_intensity = {0.90, 0.30, 0.20};
  std::array<double, 3> neg_intensity = {0.20, 0.30, 0.90};
  std::array<double, 3> nontumor_intensity = {0.30, 0.85, 0.30};
  double noise_std = 0.02;
  // Fraction of non-tumor cells rendered with the positive-tumor color.
  // Shape (annular profile) remains the only cue separating them.
  double confusability = 0.0;
};

struct GenConfig {
  std::uint64_t seed = 0;
  int grid_size = 64;      // square
  int n_tumor = 24;        // >= 1
  int n_nontumor = 8;
  double target_r = 0.5;   // round(target_r * n_tumor) positive cells, round-half-up
  double min_separation = 6.0;
  double cell_radius = 3.0;
  Appearance appearance;
};

/// Renders one synthetic core image with exact ground truth. Pure function
/// of cfg: identical cfg (including seed) gives a bit-identical Sample.
/// Throws std::runtime_error if cell placement fails after 1e5 attempts.
Sample generate_sample(const GenConfig& cfg, const std::string& id = "sample");

enum class BenchmarkProfile { Easy, Imbalanced, Distractor };

BenchmarkProfile profile_from_name(const std::string& name);
std::string profile_name(BenchmarkProfile p);

/// Writes a complete benchmark dataset directory for the given profile.
/// The first 5% of samples carry cell annotations; annotate_all keeps the
/// annotations on every sample (oracle-mask experiments).
void generate_benchmark(BenchmarkProfile profile, std::uint64_t seed, const std::string& out_dir,
                        bool annotate_all = false);

/// In-memory variant of generate_benchmark; produces the same samples.
std::vector<Sample> generate_benchmark_samples(BenchmarkProfile profile, std::uint64_t seed,
                                               bool annotate_all = false);

}  // namespace mllp

#endif  // MLLP_SYNTHGEN_HPP_
