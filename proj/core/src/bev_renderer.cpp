#include "svcalib/bev_renderer.hpp"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "svcalib/error.hpp"

namespace svcalib {

int BevConfig::size() const {
  if (!(extent > 0.0) || !(resolution > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "BEV extent and resolution must be positive");
  }
  return static_cast<int>(std::lround(extent * resolution));
}

GroundPoint bev_pixel_to_ground(const BevIndex& px, const BevConfig& cfg) {
  const double half = 0.5 * cfg.extent;
  return {half - px.row / cfg.resolution, half - px.col / cfg.resolution};
}

BevIndex ground_to_bev_pixel(const GroundPoint& g, const BevConfig& cfg) {
  const double half = 0.5 * cfg.extent;
  return {(half - g.x) * cfg.resolution, (half - g.y) * cfg.resolution};
}

const BevLayer& BevImage::layer(CameraId id) const {
  for (const BevLayer& l : layers) {
    if (l.camera == id) return l;
  }
  throw Error(ErrorCode::kContractViolation, "BEV has no layer for camera " + std::string(to_string(id)));
}

BevImage render_bev(const std::map<CameraId, Image>& images, const CameraRig& rig, const BevConfig& cfg) {
  const int n = cfg.size();
  bool mixed_channels = false;
  int channels = -1;
  for (const Camera& cam : rig.cameras()) {
    auto it = images.find(cam.id);
    if (it == images.end() || it->second.empty()) {
      throw Error(ErrorCode::kInput, "no image for camera " + std::string(to_string(cam.id)));
    }
    const Image& img = it->second;
    if (img.width != cam.intrinsics.width() || img.height != cam.intrinsics.height()) {
      throw Error(ErrorCode::kInput, "image for camera " + std::string(to_string(cam.id)) + " is " +
                                         std::to_string(img.width) + "x" + std::to_string(img.height) +
                                         ", intrinsics expect " + std::to_string(cam.intrinsics.width()) + "x" +
                                         std::to_string(cam.intrinsics.height()));
    }
    if (channels >= 0 && channels != img.channels) mixed_channels = true;
    channels = img.channels;
  }
  if (mixed_channels) channels = 1;

  BevImage bev;
  bev.meters_per_pixel = 1.0 / cfg.resolution;
  bev.composite = Image(n, n, channels);
  bev.composite_mask.assign(static_cast<std::size_t>(n) * n, 0);
  std::vector<int> contributors(static_cast<std::size_t>(n) * n, 0);

  for (const Camera& cam : rig.cameras()) {
    const Image source = mixed_channels ? to_grayscale(images.at(cam.id)) : images.at(cam.id);
    const Eigen::Matrix3d r = cam.extrinsics.rotation();
    const Eigen::Vector3d t = cam.extrinsics.translation();
    const FisheyeIntrinsics& intr = cam.intrinsics;
    BevLayer layer{cam.id, Image(n, n, channels), Mask(static_cast<std::size_t>(n) * n, 0)};
    float sample[4];
    for (int row = 0; row < n; ++row) {
      for (int col = 0; col < n; ++col) {
        const GroundPoint g = bev_pixel_to_ground({static_cast<double>(row), static_cast<double>(col)}, cfg);
        const Eigen::Vector3d pc = r * g.vec3() + t;
        const double rho = std::hypot(pc.x(), pc.y());
        const double theta = std::atan2(rho, pc.z());
        if (theta > intr.theta_max() || rho == 0.0) continue;
        const double radius = forward_polynomial(theta, intr);
        if (!sample_bilinear(source, intr.u0() + radius * pc.x() / rho, intr.v0() + radius * pc.y() / rho,
                             sample)) {
          continue;
        }
        const std::size_t idx = static_cast<std::size_t>(row) * n + col;
        layer.mask[idx] = 1;
        ++contributors[idx];
        for (int c = 0; c < channels; ++c) {
          layer.raster.at(col, row, c) = sample[c];
          bev.composite.at(col, row, c) += sample[c];
        }
      }
    }
    bev.layers.push_back(std::move(layer));
  }

  std::size_t valid = 0;
  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const std::size_t idx = static_cast<std::size_t>(row) * n + col;
      if (contributors[idx] == 0) continue;
      ++valid;
      bev.composite_mask[idx] = 1;
      for (int c = 0; c < channels; ++c) bev.composite.at(col, row, c) /= static_cast<float>(contributors[idx]);
    }
  }
  if (valid == 0) spdlog::warn("BEV rendering produced no valid pixels; check the rig extrinsics");
  return bev;
}

}  // namespace svcalib
