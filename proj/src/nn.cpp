#include "mllp/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mllp/rng.hpp"

using nlohmann::json;

namespace mllp {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

std::size_t Topology::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers)
    if (l.kind == LayerKind::Conv) n += static_cast<std::size_t>(l.conv.param_count());
  return n;
}

int Topology::downsample() const {
  int d = 1;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Conv) d *= l.conv.stride;
    if (l.kind == LayerKind::Upsample2x) {
      if (d % 2 != 0) throw std::logic_error("Topology: upsample below stride budget");
      d /= 2;
    }
  }
  return d;
}

Model Model::init(Topology t, std::uint64_t seed) {
  Model m;
  m.topo = std::move(t);
  m.params.resize(m.topo.param_count());
  Rng rng(mix_seed(seed, 0x1717));
  std::size_t off = 0;
  for (std::size_t li = 0; li < m.topo.layers.size(); ++li) {
    const auto& l = m.topo.layers[li];
    if (l.kind != LayerKind::Conv) continue;
    const int fan_in = l.conv.in_ch * l.conv.kernel * l.conv.kernel;
    const double limit = std::sqrt(6.0 / fan_in);
    for (int i = 0; i < l.conv.weight_count(); ++i)
      m.params[off + i] = rng.uniform(-limit, limit);
    for (int i = 0; i < l.conv.out_ch; ++i) m.params[off + l.conv.weight_count() + i] = 0.0;
    off += l.conv.param_count();
  }
  return m;
}

ImageGrid nn_forward(const Model& m, const ImageGrid& input, ForwardCache* cache, int threads) {
  ImageGrid cur = input;
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(cur);
  }
  std::size_t off = 0;
  for (const auto& l : m.topo.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        if (cur.channels() != l.conv.in_ch)
          throw std::runtime_error("nn_forward: channel mismatch in " + m.topo.name);
        ImageGrid out(l.conv.out_dim(cur.height()), l.conv.out_dim(cur.width()), l.conv.out_ch);
        kernels::conv2d_forward(cur, m.params.data() + off, l.conv, out, threads);
        off += l.conv.param_count();
        cur = std::move(out);
        break;
      }
      case LayerKind::ReLU:
        for (double& v : cur.data()) v = v > 0.0 ? v : 0.0;
        break;
      case LayerKind::Sigmoid:
        for (double& v : cur.data()) v = logistic(v);
        break;
      case LayerKind::Softplus:
        for (double& v : cur.data()) v = softplus(v);
        break;
      case LayerKind::Clamp01:
        for (double& v : cur.data()) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        break;
      case LayerKind::Upsample2x: {
        ImageGrid out(cur.height() * 2, cur.width() * 2, cur.channels());
        for (int y = 0; y < out.height(); ++y)
          for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) = cur.at(y / 2, x / 2, c);
        cur = std::move(out);
        break;
      }
    }
    if (cache) cache->acts.push_back(cur);
  }
  return cur;
}

void nn_backward(const Model& m, const ForwardCache& cache, const ImageGrid& d_output,
                 std::vector<double>& d_params, int threads) {
  if (cache.acts.size() != m.topo.layers.size() + 1)
    throw std::runtime_error("nn_backward: cache does not match topology");
  if (d_params.size() != m.topo.param_count())
    throw std::runtime_error("nn_backward: gradient vector size mismatch");

  // parameter offsets per layer
  std::vector<std::size_t> offsets(m.topo.layers.size(), 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < m.topo.layers.size(); ++i) {
    offsets[i] = off;
    if (m.topo.layers[i].kind == LayerKind::Conv) off += m.topo.layers[i].conv.param_count();
  }

  ImageGrid grad = d_output;
  for (int i = static_cast<int>(m.topo.layers.size()) - 1; i >= 0; --i) {
    const auto& l = m.topo.layers[i];
    const ImageGrid& in = cache.acts[i];
    const ImageGrid& out = cache.acts[i + 1];
    switch (l.kind) {
      case LayerKind::Conv: {
        kernels::conv2d_backward_params(in, grad, l.conv, d_params.data() + offsets[i], threads);
        if (i > 0) {
          ImageGrid d_in(in.height(), in.width(), in.channels());
          kernels::conv2d_backward_input(grad, m.params.data() + offsets[i], l.conv, d_in,
                                         threads);
          grad = std::move(d_in);
        }
        break;
      }
      case LayerKind::ReLU:
        for (std::size_t k = 0; k < grad.data().size(); ++k)
          if (in.data()[k] <= 0.0) grad.data()[k] = 0.0;
        break;
      case LayerKind::Sigmoid:
        for (std::size_t k = 0; k < grad.data().size(); ++k)
          grad.data()[k] *= out.data()[k] * (1.0 - out.data()[k]);
        break;
      case LayerKind::Softplus:
        for (std::size_t k = 0; k < grad.data().size(); ++k)
          grad.data()[k] *= logistic(in.data()[k]);
        break;
      case LayerKind::Clamp01:
        for (std::size_t k = 0; k < grad.data().size(); ++k)
          if (in.data()[k] <= 0.0 || in.data()[k] >= 1.0) grad.data()[k] = 0.0;
        break;
      case LayerKind::Upsample2x: {
        ImageGrid d_in(in.height(), in.width(), in.channels());
        for (int y = 0; y < grad.height(); ++y)
          for (int x = 0; x < grad.width(); ++x)
            for (int c = 0; c < grad.channels(); ++c)
              d_in.at(y / 2, x / 2, c) += grad.at(y, x, c);
        grad = std::move(d_in);
        break;
      }
    }
  }
}

namespace {
LayerSpec conv(int in_ch, int out_ch, int kernel, int stride) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.conv = {in_ch, out_ch, kernel, stride};
  return l;
}
LayerSpec act(LayerKind k) { return {k, {}}; }
}  // namespace

Topology detector_topology() {
  Topology t;
  t.name = "detector";
  t.layers = {conv(3, 8, 3, 1),  act(LayerKind::ReLU),
              conv(8, 16, 3, 2), act(LayerKind::ReLU),
              act(LayerKind::Upsample2x),
              conv(16, 8, 3, 1), act(LayerKind::ReLU),
              conv(8, 1, 3, 1),  act(LayerKind::Clamp01)};
  return t;
}

Topology classifier_topology() {
  Topology t;
  t.name = "classifier";
  t.layers = {conv(3, 8, 3, 1),   act(LayerKind::ReLU),
              conv(8, 16, 3, 1),  act(LayerKind::ReLU),
              conv(16, 16, 3, 1), act(LayerKind::ReLU),
              conv(16, 1, 1, 1)};  // per-position linear head, raw logits
  return t;
}

Topology proportion_topology(int downsample) {
  Topology t;
  t.name = "proportion";
  switch (downsample) {
    case 1:
      t.layers = {conv(3, 8, 3, 1), act(LayerKind::ReLU), conv(8, 16, 3, 1),
                  act(LayerKind::ReLU), conv(16, 2, 1, 1), act(LayerKind::Softplus)};
      break;
    case 2:
      t.layers = {conv(3, 8, 3, 2), act(LayerKind::ReLU), conv(8, 16, 3, 1),
                  act(LayerKind::ReLU), conv(16, 2, 1, 1), act(LayerKind::Softplus)};
      break;
    case 4:
      t.layers = {conv(3, 8, 3, 2), act(LayerKind::ReLU), conv(8, 16, 3, 2),
                  act(LayerKind::ReLU), conv(16, 2, 1, 1), act(LayerKind::Softplus)};
      break;
    default:
      throw std::invalid_argument("proportion_topology: downsample must be 1, 2, or 4");
  }
  return t;
}

namespace {

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Softplus: return "softplus";
    case LayerKind::Clamp01: return "clamp01";
    case LayerKind::Upsample2x: return "upsample2x";
  }
  throw std::logic_error("kind_name: bad kind");
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "relu") return LayerKind::ReLU;
  if (s == "sigmoid") return LayerKind::Sigmoid;
  if (s == "softplus") return LayerKind::Softplus;
  if (s == "clamp01") return LayerKind::Clamp01;
  if (s == "upsample2x") return LayerKind::Upsample2x;
  throw std::runtime_error("checkpoint: unknown layer kind " + s);
}

constexpr char kMagic[8] = {'M', 'L', 'L', 'P', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::string& path, const Model& m, std::uint64_t seed,
                     const std::string& hyperparams_json) {
  json topo = {{"name", m.topo.name}, {"layers", json::array()}};
  for (const auto& l : m.topo.layers) {
    json jl = {{"kind", kind_name(l.kind)}};
    if (l.kind == LayerKind::Conv) {
      jl["in_ch"] = l.conv.in_ch;
      jl["out_ch"] = l.conv.out_ch;
      jl["kernel"] = l.conv.kernel;
      jl["stride"] = l.conv.stride;
    }
    topo["layers"].push_back(jl);
  }
  json header = {{"topology", topo},
                 {"seed", seed},
                 {"hyperparams", json::parse(hyperparams_json)},
                 {"param_count", m.params.size()}};
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(kMagic, 8);
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  char lenb[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                  static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
  f.write(lenb, 4);
  f.write(hs.data(), hs.size());
  for (double v : m.params) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    f.write(b, 8);
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  unsigned char lenb[4];
  f.read(reinterpret_cast<char*>(lenb), 4);
  const std::uint32_t len = lenb[0] | (lenb[1] << 8) | (lenb[2] << 16)
                            | (static_cast<std::uint32_t>(lenb[3]) << 24);
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  if (!f) throw std::runtime_error("load_checkpoint: truncated header in " + path);
  const json header = json::parse(hs);

  Model m;
  m.topo.name = header.at("topology").at("name").get<std::string>();
  for (const auto& jl : header.at("topology").at("layers")) {
    LayerSpec l;
    l.kind = kind_from_name(jl.at("kind").get<std::string>());
    if (l.kind == LayerKind::Conv)
      l.conv = {jl.at("in_ch").get<int>(), jl.at("out_ch").get<int>(), jl.at("kernel").get<int>(),
                jl.at("stride").get<int>()};
    m.topo.layers.push_back(l);
  }
  const std::size_t n = header.at("param_count").get<std::size_t>();
  if (n != m.topo.param_count())
    throw std::runtime_error("load_checkpoint: parameter count does not match topology");
  m.params.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw std::runtime_error("load_checkpoint: truncated blob in " + path);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    double v;
    std::memcpy(&v, &bits, 8);
    m.params[i] = v;
  }
  return m;
}

void SgdState::step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
  if (params.size() != velocity.size() || grads.size() != velocity.size())
    throw std::runtime_error("SgdState: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grads[i];
    params[i] += velocity[i];
  }
}

}  // namespace mllp
