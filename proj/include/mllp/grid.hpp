#ifndef MLLP_GRID_HPP_
#define MLLP_GRID_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mllp {

/// Dense 2-D scalar/vector field (image, heatmap, mask, or score map).
/// Row-major, origin at top-left, channel-interleaved storage.
class ImageGrid {
 public:
  ImageGrid() = default;
  ImageGrid(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        values_(static_cast<std::size_t>(height) * width * channels, fill) {
    if (height < 0 || width < 0 || channels < 1)
      throw std::invalid_argument("ImageGrid: bad dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }

  double& at(int row, int col, int ch = 0) {
    return values_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  double at(int row, int col, int ch = 0) const {
    return values_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }

  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  bool same_shape(const ImageGrid& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  void fill(double v) { values_.assign(values_.size(), v); }

  bool all_finite() const;
  double min_value() const;
  double max_value() const;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

// Portable anymap I/O. Grayscale grids use P5, 3-channel use P6; maxval
// 255 or 65535 (16-bit samples big-endian per the PNM spec). Values are
// scaled from/to [0,1].
void save_pnm(const ImageGrid& g, const std::string& path, int bit_depth = 16);
ImageGrid load_pnm(const std::string& path);

}  // namespace mllp

#endif  // MLLP_GRID_HPP_
