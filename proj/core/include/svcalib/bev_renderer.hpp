#pragma once

#include <map>
#include <vector>

#include "svcalib/raster.hpp"
#include "svcalib/rig_geometry.hpp"

namespace svcalib {

enum class BevBlend { kOverlayAverage, kPerCameraLayers };

struct BevConfig {
  double extent = 25.0;     // meters per side, centered on the vehicle origin
  double resolution = 20.0; // pixels per meter
  BevBlend blend = BevBlend::kOverlayAverage;

  /// Raster side length in pixels.
  [[nodiscard]] int size() const;
};

/// Continuous raster coordinate. Row 0 is the +X (forward) edge, column 0 the
/// +Y (left) edge.
struct BevIndex {
  double row = 0.0;
  double col = 0.0;
};

[[nodiscard]] GroundPoint bev_pixel_to_ground(const BevIndex& px, const BevConfig& cfg);
[[nodiscard]] BevIndex ground_to_bev_pixel(const GroundPoint& g, const BevConfig& cfg);

struct BevLayer {
  CameraId camera;
  Image raster;
  Mask mask;
};

struct BevImage {
  std::vector<BevLayer> layers;
  Image composite;
  Mask composite_mask;
  double meters_per_pixel = 0.0;

  [[nodiscard]] const BevLayer& layer(CameraId id) const;
};

/// Inverse perspective mapping: every BEV pixel is treated as a ground point,
/// projected into each camera and sampled bilinearly. The composite averages
/// the valid layers.
///
/// Throws Error(kInput) when a rig camera has no image or the image size does
/// not match its intrinsics.
[[nodiscard]] BevImage render_bev(const std::map<CameraId, Image>& images, const CameraRig& rig,
                                  const BevConfig& cfg);

}  // namespace svcalib
