#pragma once

#include <cstdint>
#include <vector>

namespace svcalib {

/// Row-major float image with interleaved channels, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  [[nodiscard]] bool empty() const noexcept { return data.empty(); }
  [[nodiscard]] float& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  [[nodiscard]] float at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Per-pixel validity; 1 = valid.
using Mask = std::vector<std::uint8_t>;

/// Bilinear sample at continuous (x, y) into `out` (one float per channel).
/// Returns false, leaving `out` untouched, unless the footprint lies inside
/// the image. Integer coordinates return the pixel itself.
[[nodiscard]] bool sample_bilinear(const Image& img, double x, double y, float* out);

/// Luminance (Rec. 601 weights) for RGB; copy for grayscale.
[[nodiscard]] Image to_grayscale(const Image& img);

}  // namespace svcalib
