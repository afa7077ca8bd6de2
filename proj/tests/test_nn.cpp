#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mllp/kernels.hpp"
#include "mllp/nn.hpp"
#include "mllp/rng.hpp"

using namespace mllp;
using kernels::ConvShape;

namespace {

ImageGrid random_grid(int h, int w, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ImageGrid g(h, w, c);
  for (double& v : g.data()) v = rng.uniform(lo, hi);
  return g;
}

// naive convolution oracle, written independently of the kernels
ImageGrid conv_oracle(const ImageGrid& in, const std::vector<double>& p, const ConvShape& s) {
  const int pad = s.kernel / 2;
  ImageGrid out(s.out_dim(in.height()), s.out_dim(in.width()), s.out_ch);
  for (int oy = 0; oy < out.height(); ++oy)
    for (int ox = 0; ox < out.width(); ++ox)
      for (int oc = 0; oc < s.out_ch; ++oc) {
        double acc = p[s.weight_count() + oc];
        for (int ky = 0; ky < s.kernel; ++ky)
          for (int kx = 0; kx < s.kernel; ++kx)
            for (int ic = 0; ic < s.in_ch; ++ic) {
              const int y = oy * s.stride + ky - pad, x = ox * s.stride + kx - pad;
              if (y < 0 || y >= in.height() || x < 0 || x >= in.width()) continue;
              acc += in.at(y, x, ic) * p[((oc * s.kernel + ky) * s.kernel + kx) * s.in_ch + ic];
            }
        out.at(oy, ox, oc) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv forward matches the naive oracle") {
  Rng rng(1);
  for (const ConvShape s : {ConvShape{3, 4, 3, 1}, ConvShape{2, 3, 3, 2}, ConvShape{4, 2, 1, 1},
                            ConvShape{1, 5, 5, 1}}) {
    const ImageGrid in = random_grid(9, 7, s.in_ch, rng);
    std::vector<double> p(s.param_count());
    for (double& v : p) v = rng.uniform(-0.7, 0.7);
    ImageGrid out(s.out_dim(9), s.out_dim(7), s.out_ch);
    kernels::conv2d_forward_serial(in, p.data(), s, out);
    const ImageGrid want = conv_oracle(in, p, s);
    REQUIRE(out.same_shape(want));
    for (std::size_t i = 0; i < out.data().size(); ++i)
      CHECK(out.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("omp kernels agree bitwise with the serial reference") {
  Rng rng(2);
  const ConvShape s{3, 8, 3, 2};
  const ImageGrid in = random_grid(33, 31, s.in_ch, rng);
  std::vector<double> p(s.param_count());
  for (double& v : p) v = rng.uniform(-0.7, 0.7);

  ImageGrid out_s(s.out_dim(33), s.out_dim(31), s.out_ch), out_p = out_s;
  kernels::conv2d_forward_serial(in, p.data(), s, out_s);
  for (int threads : {2, 3, 8}) {
    kernels::conv2d_forward_omp(in, p.data(), s, out_p, threads);
    CHECK(out_s.data() == out_p.data());
  }

  ImageGrid din_s(33, 31, s.in_ch), din_p = din_s;
  kernels::conv2d_backward_input_serial(out_s, p.data(), s, din_s);
  kernels::conv2d_backward_input_omp(out_s, p.data(), s, din_p, 4);
  CHECK(din_s.data() == din_p.data());

  std::vector<double> dp_s(p.size(), 0.0), dp_p(p.size(), 0.0);
  kernels::conv2d_backward_params_serial(in, out_s, s, dp_s.data());
  kernels::conv2d_backward_params_omp(in, out_s, s, dp_p.data(), 4);
  CHECK(dp_s == dp_p);
}

namespace {

// scalar objective for finite-difference checks: sum of squared outputs
double half_sq_objective(const Model& m, const ImageGrid& in, std::vector<double>* grads) {
  ForwardCache cache;
  const ImageGrid out = nn_forward(m, in, grads ? &cache : nullptr);
  double obj = 0.0;
  for (double v : out.data()) obj += 0.5 * v * v;
  if (grads) {
    ImageGrid d_out = out;  // d(0.5 v^2)/dv = v
    nn_backward(m, cache, d_out, *grads);
  }
  return obj;
}

void check_param_gradients(Topology topo, int h, int w, std::uint64_t seed, double tol) {
  Model m = Model::init(topo, seed);
  Rng rng(mix_seed(seed, 9));
  const ImageGrid in = random_grid(h, w, 3, rng, 0.0, 1.0);
  std::vector<double> grads(m.params.size(), 0.0);
  half_sq_objective(m, in, &grads);
  const double step = 1e-5;
  Rng pick(mix_seed(seed, 10));
  for (int t = 0; t < 40; ++t) {  // spot-check a subset of parameters
    const std::size_t i = pick.uniform_int(m.params.size());
    Model mp = m, mm = m;
    mp.params[i] += step;
    mm.params[i] -= step;
    const double fd =
        (half_sq_objective(mp, in, nullptr) - half_sq_objective(mm, in, nullptr)) / (2 * step);
    const double denom = std::max({std::abs(fd), std::abs(grads[i]), 1e-6});
    CHECK(std::abs(grads[i] - fd) / denom < tol);
  }
}

}  // namespace

TEST_CASE("backprop matches finite differences on all three topologies") {
  check_param_gradients(detector_topology(), 12, 12, 21, 1e-4);
  check_param_gradients(classifier_topology(), 10, 10, 22, 1e-4);
  check_param_gradients(proportion_topology(2), 12, 12, 23, 1e-4);
  check_param_gradients(proportion_topology(4), 16, 16, 24, 1e-4);
}

TEST_CASE("downsample factors") {
  CHECK(detector_topology().downsample() == 1);
  CHECK(classifier_topology().downsample() == 1);
  CHECK(proportion_topology(1).downsample() == 1);
  CHECK(proportion_topology(2).downsample() == 2);
  CHECK(proportion_topology(4).downsample() == 4);
}

TEST_CASE("checkpoint round-trip") {
  Model m = Model::init(proportion_topology(2), 99);
  const auto path = std::filesystem::temp_directory_path() / "mllp_test.ckpt";
  save_checkpoint(path.string(), m, 99, R"({"lr":0.01})");
  const Model l = load_checkpoint(path.string());
  CHECK(l.topo.name == m.topo.name);
  REQUIRE(l.topo.layers.size() == m.topo.layers.size());
  CHECK(l.params == m.params);  // bitwise through the LE blob
}

TEST_CASE("model init is deterministic") {
  const Model a = Model::init(detector_topology(), 5);
  const Model b = Model::init(detector_topology(), 5);
  const Model c = Model::init(detector_topology(), 6);
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);
}
