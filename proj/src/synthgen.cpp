#include "mllp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mllp/rng.hpp"

namespace mllp {

namespace {

constexpr int kMaxPlacementAttempts = 100000;

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

struct RenderedCell {
  CellRecord rec;
  bool confusable = false;  // non-tumor drawn with the positive color
};

// Radial intensity profile. Tumor cells are Gaussian bumps matching the
// detector's heatmap assumption; non-tumor cells are annuli (hollow
// centers) so that shape, not color, separates them from tumors.
double cell_profile(double dist, double radius, bool tumor) {
  const double sigma = radius / 2.0;
  if (tumor) {
    if (dist > 3.0 * sigma) return 0.0;
    return std::exp(-dist * dist / (2.0 * sigma * sigma));
  }
  const double ring = 0.7 * radius;
  const double s = radius / 3.0;
  const double d = dist - ring;
  if (std::abs(d) > 3.0 * s) return 0.0;
  return std::exp(-d * d / (2.0 * s * s));
}

std::vector<RenderedCell> place_cells(const GenConfig& cfg, Rng& rng) {
  const int n_pos = round_half_up(cfg.target_r * cfg.n_tumor);
  const int n_neg = cfg.n_tumor - n_pos;
  if (n_pos < 0 || n_neg < 0)
    throw std::invalid_argument("generate_sample: target_r outside [0,1]");

  std::vector<CellClass> classes;
  classes.insert(classes.end(), n_pos, CellClass::PosTumor);
  classes.insert(classes.end(), n_neg, CellClass::NegTumor);
  classes.insert(classes.end(), cfg.n_nontumor, CellClass::NonTumor);
  rng.shuffle(classes);

  const int margin = static_cast<int>(std::ceil(cfg.cell_radius));
  if (cfg.grid_size <= 2 * margin)
    throw std::runtime_error("generate_sample: grid too small for cell radius");
  const double min_sep2 = cfg.min_separation * cfg.min_separation;

  std::vector<RenderedCell> cells;
  int attempts = 0;
  for (CellClass cls : classes) {
    while (true) {
      if (++attempts > kMaxPlacementAttempts)
        throw std::runtime_error(
            "generate_sample: could not place all cells at the requested "
            "separation; use a larger grid or fewer cells");
      const int row = margin + static_cast<int>(rng.uniform_int(cfg.grid_size - 2 * margin));
      const int col = margin + static_cast<int>(rng.uniform_int(cfg.grid_size - 2 * margin));
      bool ok = true;
      for (const auto& c : cells) {
        const double dr = c.rec.row - row, dc = c.rec.col - col;
        if (dr * dr + dc * dc < min_sep2) { ok = false; break; }
      }
      if (ok) {
        cells.push_back({{row, col, cls}, false});
        break;
      }
    }
  }

  // Deterministic confusable count: round(confusability * n_nontumor),
  // applied to non-tumor cells in placement order.
  int n_conf = round_half_up(cfg.appearance.confusability * cfg.n_nontumor);
  for (auto& c : cells) {
    if (n_conf == 0) break;
    if (c.rec.cls == CellClass::NonTumor) {
      c.confusable = true;
      --n_conf;
    }
  }
  return cells;
}

}  // namespace

Sample generate_sample(const GenConfig& cfg, const std::string& id) {
  if (cfg.n_tumor < 1) throw std::invalid_argument("generate_sample: n_tumor must be >= 1");
  Rng rng(cfg.seed);
  const auto cells = place_cells(cfg, rng);

  const double base = 0.08;
  ImageGrid img(cfg.grid_size, cfg.grid_size, 3, base);
  const int reach = static_cast<int>(std::ceil(1.5 * cfg.cell_radius)) + 1;
  for (const auto& c : cells) {
    const bool tumor = c.rec.cls != CellClass::NonTumor;
    const auto& color = c.rec.cls == CellClass::PosTumor ? cfg.appearance.pos_intensity
                        : c.rec.cls == CellClass::NegTumor ? cfg.appearance.neg_intensity
                        : c.confusable ? cfg.appearance.pos_intensity
                                       : cfg.appearance.nontumor_intensity;
    for (int r = c.rec.row - reach; r <= c.rec.row + reach; ++r)
      for (int col = c.rec.col - reach; col <= c.rec.col + reach; ++col) {
        if (!img.in_bounds(r, col)) continue;
        const double dr = r - c.rec.row, dc = col - c.rec.col;
        const double w = cell_profile(std::sqrt(dr * dr + dc * dc), cfg.cell_radius, tumor);
        if (w == 0.0) continue;
        for (int ch = 0; ch < 3; ++ch) img.at(r, col, ch) += w * (color[ch] - base);
      }
  }

  for (double& v : img.data()) {
    v += rng.normal(0.0, cfg.appearance.noise_std);
    v = std::clamp(v, 0.0, 1.0);
    // quantize to the 16-bit storage grid so save/load round-trips exactly
    v = std::round(v * 65535.0) / 65535.0;
  }

  Sample s;
  s.id = id;
  s.image = std::move(img);
  std::vector<CellRecord> recs;
  recs.reserve(cells.size());
  for (const auto& c : cells) recs.push_back(c.rec);
  s.cells = std::move(recs);
  s.true_r = annotated_proportion(*s.cells);
  s.interval = interval_of(s.true_r);
  return s;
}

BenchmarkProfile profile_from_name(const std::string& name) {
  if (name == "easy") return BenchmarkProfile::Easy;
  if (name == "imbalanced") return BenchmarkProfile::Imbalanced;
  if (name == "distractor") return BenchmarkProfile::Distractor;
  throw std::runtime_error("unknown profile: " + name);
}

std::string profile_name(BenchmarkProfile p) {
  switch (p) {
    case BenchmarkProfile::Easy: return "easy";
    case BenchmarkProfile::Imbalanced: return "imbalanced";
    case BenchmarkProfile::Distractor: return "distractor";
  }
  throw std::logic_error("profile_name: bad profile");
}

std::vector<Sample> generate_benchmark_samples(BenchmarkProfile profile, std::uint64_t seed,
                                               bool annotate_all) {
  // Per-sample interval assignment; imbalanced uses the (8,6,2,1,3) ratio.
  std::vector<IntervalId> plan;
  int n_samples = 0;
  switch (profile) {
    case BenchmarkProfile::Easy:
    case BenchmarkProfile::Distractor:
      n_samples = 200;
      for (int i = 0; i < n_samples; ++i) plan.push_back(static_cast<IntervalId>(i % 5));
      break;
    case BenchmarkProfile::Imbalanced: {
      n_samples = 300;
      const int counts[5] = {120, 90, 30, 15, 45};
      for (int b = 0; b < 5; ++b)
        for (int i = 0; i < counts[b]; ++i) plan.push_back(static_cast<IntervalId>(b));
      Rng order_rng(mix_seed(seed, 0xface));
      order_rng.shuffle(plan);
      break;
    }
  }

  std::vector<Sample> samples;
  samples.reserve(n_samples);
  const int n_annotated = n_samples / 20;  // first 5% carry cell annotations
  for (int i = 0; i < n_samples; ++i) {
    Rng srng(mix_seed(seed, 2 * i));
    GenConfig cfg;
    cfg.seed = mix_seed(seed, 2 * i + 1);
    cfg.n_tumor = 20 + static_cast<int>(srng.uniform_int(9));
    switch (profile) {
      case BenchmarkProfile::Easy:
        cfg.n_nontumor = 6 + static_cast<int>(srng.uniform_int(5));
        break;
      case BenchmarkProfile::Imbalanced:
        cfg.n_nontumor = 6 + static_cast<int>(srng.uniform_int(5));
        break;
      case BenchmarkProfile::Distractor:
        cfg.grid_size = 80;
        cfg.n_nontumor = cfg.n_tumor;  // ratio 1 >= 0.5
        cfg.appearance.confusability = 0.5;
        break;
    }
    const auto& b = interval(plan[i]);
    if (b.id == IntervalId::I0_1) {
      // narrow bucket: draw the target in (0, 0.01]
      cfg.target_r = 0.0001 + srng.uniform() * (0.01 - 0.0001);
    } else {
      const double inset = 0.1 * (b.upper - b.lower);
      cfg.target_r = srng.uniform(b.lower + inset, b.upper - inset);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "s%04d", i);
    Sample s = generate_sample(cfg, id);
    if (!annotate_all && i >= n_annotated) s.cells.reset();
    samples.push_back(std::move(s));
  }
  return samples;
}

void generate_benchmark(BenchmarkProfile profile, std::uint64_t seed, const std::string& out_dir,
                        bool annotate_all) {
  save_dataset(out_dir, generate_benchmark_samples(profile, seed, annotate_all));
}

}  // namespace mllp
