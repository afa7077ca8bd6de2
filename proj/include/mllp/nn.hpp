#ifndef MLLP_NN_HPP_
#define MLLP_NN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mllp/grid.hpp"
#include "mllp/kernels.hpp"

namespace mllp {

// Clamp01 is a hard saturation clamp(x, 0, 1) with pass-through gradient
// strictly inside the interval; unlike a sigmoid it exerts no pull once a
// background pixel reaches 0, which keeps sparse heatmap regression alive.
enum class LayerKind { Conv, ReLU, Sigmoid, Softplus, Clamp01, Upsample2x };

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  kernels::ConvShape conv;  // used only when kind == Conv
};

/// Fixed small convolutional topology: an ordered layer list plus a name.
struct Topology {
  std::string name;
  std::vector<LayerSpec> layers;

  std::size_t param_count() const;
  /// Spatial downsampling factor of the full stack (product of strides
  /// divided by upsampling factors).
  int downsample() const;
};

/// Flat parameter vector + fixed topology.
struct Model {
  Topology topo;
  std::vector<double> params;

  static Model init(Topology t, std::uint64_t seed);
};

/// Per-layer inputs retained by forward() for the backward pass.
struct ForwardCache {
  std::vector<ImageGrid> acts;  // acts[i] is the input to layer i; back() is the output
};

ImageGrid nn_forward(const Model& m, const ImageGrid& input, ForwardCache* cache = nullptr,
                     int threads = 1);

/// Backpropagates d_output through the cached forward pass, accumulating
/// parameter gradients into d_params (size = param_count, not cleared).
void nn_backward(const Model& m, const ForwardCache& cache, const ImageGrid& d_output,
                 std::vector<double>& d_params, int threads = 1);

// Fixed topologies for the three networks.
Topology detector_topology();                 // 4-conv encoder-decoder, sigmoid heatmap head
Topology classifier_topology();               // 3 convs (8,16,16) + per-position linear head
Topology proportion_topology(int downsample); // two-channel softplus head, d in {1,2,4}

/// Checkpoint I/O: JSON header (topology, seed, hyperparams) followed by a
/// little-endian 64-bit-float parameter blob.
void save_checkpoint(const std::string& path, const Model& m, std::uint64_t seed,
                     const std::string& hyperparams_json = "{}");
Model load_checkpoint(const std::string& path);

/// Momentum gradient-descent state (deterministic).
struct SgdState {
  std::vector<double> velocity;
  double momentum = 0.9;

  explicit SgdState(std::size_t n, double momentum = 0.9)
      : velocity(n, 0.0), momentum(momentum) {}
  void step(std::vector<double>& params, const std::vector<double>& grads, double lr);
};

double logistic(double x);
double softplus(double x);

}  // namespace mllp

#endif  // MLLP_NN_HPP_
