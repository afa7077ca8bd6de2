#include "mllp/losses.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mllp/grid.hpp"

namespace mllp {

LossMode loss_mode_from_name(const std::string& name) {
  std::string low;
  for (char c : name) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (low == "prop") return LossMode::Prop;
  if (low == "focalprop") return LossMode::FocalProp;
  if (low == "wfl") return LossMode::WFL;
  throw std::runtime_error("unknown loss mode: " + name);
}

std::string loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::Prop: return "Prop";
    case LossMode::FocalProp: return "FocalProp";
    case LossMode::WFL: return "WFL";
  }
  throw std::logic_error("loss_mode_name: bad mode");
}

namespace {
// 0 * log(0/x) := 0
double xlogx_over(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }
}  // namespace

LossValue proportion_loss(double r, double r_hat) {
  const double rh = std::clamp(r_hat, kProportionEps, 1.0 - kProportionEps);
  LossValue out;
  out.value = xlogx_over(r, rh) + xlogx_over(1.0 - r, 1.0 - rh);
  out.d_r_hat = -r / rh + (1.0 - r) / (1.0 - rh);
  return out;
}

LossValue weighted_focal_proportion_loss(double r, double r_hat, double gamma) {
  const LossValue kl = proportion_loss(r, r_hat);
  if (gamma == 0.0) return kl;  // x^0 = 1, including at r_hat = r
  const double rh = std::clamp(r_hat, kProportionEps, 1.0 - kProportionEps);
  const double gap = std::abs(r - rh);
  const double w = std::pow(gap, gamma);
  double dw = 0.0;  // subgradient 0 at gap = 0
  if (gap > 0.0) {
    const double sign = (r > rh) ? 1.0 : -1.0;
    dw = -gamma * sign * std::pow(gap, gamma - 1.0);
  }
  return {w * kl.value, dw * kl.value + w * kl.d_r_hat};
}

LossValue loss_for_interval(IntervalId id, double r_hat, LossMode mode) {
  const ProportionInterval& b = interval(id);
  double gamma = 0.0;
  switch (mode) {
    case LossMode::Prop: gamma = 0.0; break;
    case LossMode::FocalProp: gamma = 2.0; break;
    case LossMode::WFL: gamma = b.gamma; break;
  }
  return weighted_focal_proportion_loss(b.midpoint, r_hat, gamma);
}

namespace {

// Minimal line-plot rendering of the sampled curves into a PPM image.
void render_curves(const std::string& ppm_path) {
  const int W = 600, H = 400;
  ImageGrid img(H, W, 3, 1.0);
  const double loss_cap = 1.0;
  const std::array<std::array<double, 3>, 5> colors = {{{0.1, 0.3, 0.9},
                                                        {0.9, 0.5, 0.1},
                                                        {0.1, 0.7, 0.2},
                                                        {0.8, 0.1, 0.1},
                                                        {0.5, 0.1, 0.7}}};
  for (int panel = 0; panel < 2; ++panel) {  // 0: uniform gamma=2, 1: weighted
    for (int b = 0; b < kNumIntervals; ++b) {
      const auto id = static_cast<IntervalId>(b);
      for (int i = 1; i <= 999; ++i) {
        const double rh = i / 1000.0;
        const double gamma = panel == 0 ? 2.0 : interval(id).gamma;
        const double v = weighted_focal_proportion_loss(interval(id).midpoint, rh, gamma).value;
        const int x = panel * (W / 2) + static_cast<int>(rh * (W / 2 - 1));
        const int y = H - 1 - static_cast<int>(std::min(v, loss_cap) / loss_cap * (H - 1));
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = colors[b][ch];
      }
    }
  }
  save_pnm(img, ppm_path, 8);
}

}  // namespace

void plot_loss_curves(const std::string& csv_path, bool render_plot) {
  std::ofstream f(csv_path);
  if (!f) throw std::runtime_error("plot_loss_curves: cannot write " + csv_path);
  f << "interval,mode,r_hat,loss,grad\n";
  f.precision(12);
  for (int b = 0; b < kNumIntervals; ++b) {
    const auto id = static_cast<IntervalId>(b);
    for (const char* mode : {"uniform", "weighted"}) {
      const double gamma = (mode == std::string("uniform")) ? 2.0 : interval(id).gamma;
      for (int i = 1; i <= 999; ++i) {
        const double rh = i / 1000.0;
        const LossValue v = weighted_focal_proportion_loss(interval(id).midpoint, rh, gamma);
        f << interval_name(id) << ',' << mode << ',' << rh << ',' << v.value << ',' << v.d_r_hat
          << '\n';
      }
    }
  }
  if (!f) throw std::runtime_error("plot_loss_curves: write failed for " + csv_path);
  if (render_plot) {
    std::string ppm = csv_path;
    const auto dot = ppm.rfind('.');
    ppm = (dot == std::string::npos ? ppm : ppm.substr(0, dot)) + ".ppm";
    render_curves(ppm);
  }
}

}  // namespace mllp
