#include "svcalib/raster.hpp"

#include <cmath>

namespace svcalib {

bool sample_bilinear(const Image& img, double x, double y, float* out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width - 1 && y <= img.height - 1)) return false;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = fx > 0.0 ? x0 + 1 : x0;
  const int y1 = fy > 0.0 ? y0 + 1 : y0;
  for (int c = 0; c < img.channels; ++c) {
    const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
    const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
    out[c] = static_cast<float>((1.0 - fy) * top + fy * bottom);
  }
  return true;
}

Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  Image gray(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.channels >= 3) {
        gray.at(x, y) = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
      } else {
        gray.at(x, y) = img.at(x, y, 0);
      }
    }
  }
  return gray;
}

}  // namespace svcalib
