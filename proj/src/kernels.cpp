#include "mllp/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mllp {
namespace kernels {

namespace {

inline double conv_out_at(const ImageGrid& in, const double* params, const ConvShape& s, int oy,
                          int ox, int oc) {
  const int pad = s.kernel / 2;
  const int K = s.kernel;
  double acc = params[s.weight_count() + oc];  // bias
  const double* w = params + oc * K * K * s.in_ch;
  for (int ky = 0; ky < K; ++ky) {
    const int y = oy * s.stride + ky - pad;
    if (y < 0 || y >= in.height()) continue;
    for (int kx = 0; kx < K; ++kx) {
      const int x = ox * s.stride + kx - pad;
      if (x < 0 || x >= in.width()) continue;
      const double* wrow = w + (ky * K + kx) * s.in_ch;
      for (int ic = 0; ic < s.in_ch; ++ic) acc += in.at(y, x, ic) * wrow[ic];
    }
  }
  return acc;
}

inline double conv_din_at(const ImageGrid& d_out, const double* params, const ConvShape& s, int y,
                          int x, int ic) {
  const int pad = s.kernel / 2;
  const int K = s.kernel;
  double acc = 0.0;
  for (int ky = 0; ky < K; ++ky) {
    const int num_y = y + pad - ky;
    if (num_y < 0 || num_y % s.stride != 0) continue;
    const int oy = num_y / s.stride;
    if (oy >= d_out.height()) continue;
    for (int kx = 0; kx < K; ++kx) {
      const int num_x = x + pad - kx;
      if (num_x < 0 || num_x % s.stride != 0) continue;
      const int ox = num_x / s.stride;
      if (ox >= d_out.width()) continue;
      for (int oc = 0; oc < s.out_ch; ++oc)
        acc += d_out.at(oy, ox, oc) * params[((oc * K + ky) * K + kx) * s.in_ch + ic];
    }
  }
  return acc;
}

// Accumulates every d_param entry owned by output channel oc; one owner
// per entry keeps the summation order fixed regardless of threading.
inline void conv_dparams_channel(const ImageGrid& in, const ImageGrid& d_out, const ConvShape& s,
                                 double* d_params, int oc) {
  const int pad = s.kernel / 2;
  const int K = s.kernel;
  for (int ky = 0; ky < K; ++ky)
    for (int kx = 0; kx < K; ++kx)
      for (int ic = 0; ic < s.in_ch; ++ic) {
        double acc = 0.0;
        for (int oy = 0; oy < d_out.height(); ++oy) {
          const int y = oy * s.stride + ky - pad;
          if (y < 0 || y >= in.height()) continue;
          for (int ox = 0; ox < d_out.width(); ++ox) {
            const int x = ox * s.stride + kx - pad;
            if (x < 0 || x >= in.width()) continue;
            acc += d_out.at(oy, ox, oc) * in.at(y, x, ic);
          }
        }
        d_params[((oc * K + ky) * K + kx) * s.in_ch + ic] += acc;
      }
  double acc = 0.0;
  for (int oy = 0; oy < d_out.height(); ++oy)
    for (int ox = 0; ox < d_out.width(); ++ox) acc += d_out.at(oy, ox, oc);
  d_params[s.weight_count() + oc] += acc;
}

}  // namespace

void conv2d_forward_serial(const ImageGrid& in, const double* params, const ConvShape& s,
                           ImageGrid& out) {
  for (int oy = 0; oy < out.height(); ++oy)
    for (int ox = 0; ox < out.width(); ++ox)
      for (int oc = 0; oc < s.out_ch; ++oc) out.at(oy, ox, oc) = conv_out_at(in, params, s, oy, ox, oc);
}

void conv2d_forward_omp(const ImageGrid& in, const double* params, const ConvShape& s,
                        ImageGrid& out, int threads) {
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static)
  for (int oy = 0; oy < out.height(); ++oy)
    for (int ox = 0; ox < out.width(); ++ox)
      for (int oc = 0; oc < s.out_ch; ++oc) out.at(oy, ox, oc) = conv_out_at(in, params, s, oy, ox, oc);
#else
  (void)threads;
  conv2d_forward_serial(in, params, s, out);
#endif
}

void conv2d_backward_input_serial(const ImageGrid& d_out, const double* params,
                                  const ConvShape& s, ImageGrid& d_in) {
  for (int y = 0; y < d_in.height(); ++y)
    for (int x = 0; x < d_in.width(); ++x)
      for (int ic = 0; ic < s.in_ch; ++ic) d_in.at(y, x, ic) = conv_din_at(d_out, params, s, y, x, ic);
}

void conv2d_backward_input_omp(const ImageGrid& d_out, const double* params, const ConvShape& s,
                               ImageGrid& d_in, int threads) {
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static)
  for (int y = 0; y < d_in.height(); ++y)
    for (int x = 0; x < d_in.width(); ++x)
      for (int ic = 0; ic < s.in_ch; ++ic) d_in.at(y, x, ic) = conv_din_at(d_out, params, s, y, x, ic);
#else
  (void)threads;
  conv2d_backward_input_serial(d_out, params, s, d_in);
#endif
}

void conv2d_backward_params_serial(const ImageGrid& in, const ImageGrid& d_out,
                                   const ConvShape& s, double* d_params) {
  for (int oc = 0; oc < s.out_ch; ++oc) conv_dparams_channel(in, d_out, s, d_params, oc);
}

void conv2d_backward_params_omp(const ImageGrid& in, const ImageGrid& d_out, const ConvShape& s,
                                double* d_params, int threads) {
#ifdef _OPENMP
#pragma omp parallel for num_threads(threads) schedule(static)
  for (int oc = 0; oc < s.out_ch; ++oc) conv_dparams_channel(in, d_out, s, d_params, oc);
#else
  (void)threads;
  conv2d_backward_params_serial(in, d_out, s, d_params);
#endif
}

void conv2d_forward(const ImageGrid& in, const double* params, const ConvShape& s, ImageGrid& out,
                    int threads) {
  if (threads <= 1) conv2d_forward_serial(in, params, s, out);
  else conv2d_forward_omp(in, params, s, out, threads);
}

void conv2d_backward_input(const ImageGrid& d_out, const double* params, const ConvShape& s,
                           ImageGrid& d_in, int threads) {
  if (threads <= 1) conv2d_backward_input_serial(d_out, params, s, d_in);
  else conv2d_backward_input_omp(d_out, params, s, d_in, threads);
}

void conv2d_backward_params(const ImageGrid& in, const ImageGrid& d_out, const ConvShape& s,
                            double* d_params, int threads) {
  if (threads <= 1) conv2d_backward_params_serial(in, d_out, s, d_params);
  else conv2d_backward_params_omp(in, d_out, s, d_params, threads);
}

}  // namespace kernels
}  // namespace mllp
