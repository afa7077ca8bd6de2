#ifndef MLLP_KERNELS_HPP_
#define MLLP_KERNELS_HPP_

#include "mllp/grid.hpp"

namespace mllp {
namespace kernels {

// 2-D convolution kernels, HWC layout, zero ("same") padding, square
// kernel of odd size. Weights are laid out [oc][ky][kx][ic], followed by
// one bias per output channel.
//
// Every kernel exists in a serial reference form and an OpenMP form. Both
// use gather formulations only (each output element is produced by exactly
// one iteration), so results are bitwise identical for any thread count;
// threads <= 1 selects the serial path. The serial versions are the
// reference implementations used by the tests and the benchmark.

struct ConvShape {
  int in_ch = 1;
  int out_ch = 1;
  int kernel = 3;  // odd
  int stride = 1;

  int weight_count() const { return out_ch * kernel * kernel * in_ch; }
  int param_count() const { return weight_count() + out_ch; }
  int out_dim(int in_dim) const { return (in_dim + stride - 1) / stride; }
};

void conv2d_forward_serial(const ImageGrid& in, const double* params, const ConvShape& s,
                           ImageGrid& out);
void conv2d_forward_omp(const ImageGrid& in, const double* params, const ConvShape& s,
                        ImageGrid& out, int threads);

// Gradient w.r.t. the input (gather over contributing output positions).
void conv2d_backward_input_serial(const ImageGrid& d_out, const double* params,
                                  const ConvShape& s, ImageGrid& d_in);
void conv2d_backward_input_omp(const ImageGrid& d_out, const double* params, const ConvShape& s,
                               ImageGrid& d_in, int threads);

// Gradient w.r.t. weights and biases, accumulated into d_params.
void conv2d_backward_params_serial(const ImageGrid& in, const ImageGrid& d_out,
                                   const ConvShape& s, double* d_params);
void conv2d_backward_params_omp(const ImageGrid& in, const ImageGrid& d_out, const ConvShape& s,
                                double* d_params, int threads);

// Dispatchers: serial when threads <= 1, OpenMP otherwise.
void conv2d_forward(const ImageGrid& in, const double* params, const ConvShape& s, ImageGrid& out,
                    int threads);
void conv2d_backward_input(const ImageGrid& d_out, const double* params, const ConvShape& s,
                           ImageGrid& d_in, int threads);
void conv2d_backward_params(const ImageGrid& in, const ImageGrid& d_out, const ConvShape& s,
                            double* d_params, int threads);

}  // namespace kernels
}  // namespace mllp

#endif  // MLLP_KERNELS_HPP_
