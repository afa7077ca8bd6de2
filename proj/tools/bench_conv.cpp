// Benchmark comparing the serial reference conv kernels against the
// OpenMP variants, with a bitwise agreement check.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "mllp/kernels.hpp"
#include "mllp/rng.hpp"

using namespace mllp;
using kernels::ConvShape;

namespace {

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

ImageGrid random_grid(int h, int w, int c, Rng& rng) {
  ImageGrid g(h, w, c);
  for (double& v : g.data()) v = rng.uniform(-1.0, 1.0);
  return g;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_ms();
    f();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

bool bitwise_equal(const ImageGrid& a, const ImageGrid& b) {
  return std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 4;
  Rng rng(42);
  std::printf("conv2d kernels, serial reference vs OpenMP (%d threads)\n", threads);
  std::printf("%-28s %10s %10s %8s %s\n", "case", "serial ms", "omp ms", "speedup", "bitwise");

  struct Case {
    int size;
    ConvShape shape;
  };
  const Case cases[] = {
      {64, {3, 8, 3, 1}},
      {128, {8, 16, 3, 1}},
      {256, {8, 16, 3, 2}},
      {256, {16, 16, 3, 1}},
  };
  bool all_equal = true;
  for (const auto& c : cases) {
    const ImageGrid in = random_grid(c.size, c.size, c.shape.in_ch, rng);
    std::vector<double> params(c.shape.param_count());
    for (double& v : params) v = rng.uniform(-0.5, 0.5);
    ImageGrid out_s(c.shape.out_dim(c.size), c.shape.out_dim(c.size), c.shape.out_ch);
    ImageGrid out_p = out_s;

    const double ts = time_best_of(3, [&] {
      kernels::conv2d_forward_serial(in, params.data(), c.shape, out_s);
    });
    const double tp = time_best_of(3, [&] {
      kernels::conv2d_forward_omp(in, params.data(), c.shape, out_p, threads);
    });
    const bool eq = bitwise_equal(out_s, out_p);
    all_equal &= eq;
    char name[64];
    std::snprintf(name, sizeof(name), "fwd %dx%d %d->%d s%d", c.size, c.size, c.shape.in_ch,
                  c.shape.out_ch, c.shape.stride);
    std::printf("%-28s %10.3f %10.3f %7.2fx %s\n", name, ts, tp, ts / tp, eq ? "yes" : "NO");

    // backward w.r.t. params
    std::vector<double> dp_s(params.size(), 0.0), dp_p(params.size(), 0.0);
    const double tbs = time_best_of(3, [&] {
      std::fill(dp_s.begin(), dp_s.end(), 0.0);
      kernels::conv2d_backward_params_serial(in, out_s, c.shape, dp_s.data());
    });
    const double tbp = time_best_of(3, [&] {
      std::fill(dp_p.begin(), dp_p.end(), 0.0);
      kernels::conv2d_backward_params_omp(in, out_s, c.shape, dp_p.data(), threads);
    });
    const bool eqb = std::memcmp(dp_s.data(), dp_p.data(), dp_s.size() * sizeof(double)) == 0;
    all_equal &= eqb;
    std::snprintf(name, sizeof(name), "bwd-params %dx%d %d->%d", c.size, c.size, c.shape.in_ch,
                  c.shape.out_ch);
    std::printf("%-28s %10.3f %10.3f %7.2fx %s\n", name, tbs, tbp, tbs / tbp, eqb ? "yes" : "NO");
  }
  return all_equal ? 0 : 1;
}
