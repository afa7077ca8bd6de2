#include "mllp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace mllp {

bool ImageGrid::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

double ImageGrid::min_value() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

double ImageGrid::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

void save_pnm(const ImageGrid& g, const std::string& path, int bit_depth) {
  if (g.channels() != 1 && g.channels() != 3)
    throw std::invalid_argument("save_pnm: only 1 or 3 channels supported");
  if (bit_depth != 8 && bit_depth != 16)
    throw std::invalid_argument("save_pnm: bit depth must be 8 or 16");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_pnm: cannot open " + path);
  const int maxval = (bit_depth == 8) ? 255 : 65535;
  f << (g.channels() == 1 ? "P5" : "P6") << "\n"
    << g.width() << " " << g.height() << "\n" << maxval << "\n";
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c)
      for (int ch = 0; ch < g.channels(); ++ch) {
        double v = std::clamp(g.at(r, c, ch), 0.0, 1.0);
        int q = static_cast<int>(std::lround(v * maxval));
        if (bit_depth == 16) f.put(static_cast<char>((q >> 8) & 0xff));
        f.put(static_cast<char>(q & 0xff));
      }
  if (!f) throw std::runtime_error("save_pnm: write failed for " + path);
}

namespace {
int read_pnm_token(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    int c = in.peek();
    if (c == '#') {
      while (in.good() && in.get() != '\n') {}
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  return v;
}
}  // namespace

ImageGrid load_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_pnm: cannot open " + path);
  char p, kind;
  f.get(p);
  f.get(kind);
  if (p != 'P' || (kind != '5' && kind != '6'))
    throw std::runtime_error("load_pnm: unsupported magic in " + path);
  const int channels = (kind == '5') ? 1 : 3;
  int w = read_pnm_token(f), h = read_pnm_token(f), maxval = read_pnm_token(f);
  if (w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535))
    throw std::runtime_error("load_pnm: bad header in " + path);
  f.get();  // single whitespace after maxval
  ImageGrid g(h, w, channels);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int ch = 0; ch < channels; ++ch) {
        int q = f.get();
        if (maxval == 65535) q = (q << 8) | f.get();
        if (!f) throw std::runtime_error("load_pnm: truncated data in " + path);
        g.at(r, c, ch) = static_cast<double>(q) / maxval;
      }
  return g;
}

}  // namespace mllp
