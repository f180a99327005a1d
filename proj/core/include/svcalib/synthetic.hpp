#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "svcalib/calibration.hpp"
#include "svcalib/raster.hpp"
#include "svcalib/rig_geometry.hpp"

namespace svcalib::synthetic {

struct CameraMount {
  Eigen::Vector3d center;   // vehicle frame, meters
  double yaw_deg = 0.0;     // optical axis heading, CCW from +X
  double pitch_deg = 40.0;  // downward tilt of the optical axis
  double roll_deg = 0.0;    // about the optical axis
};

/// Nominal surround-view geometry. Defaults model a mid-size car.
struct SyntheticRigSpec {
  PerCamera<CameraMount> mounts = {
      CameraMount{{3.7, 0.0, 0.7}, 0.0, 30.0, 0.0},
      CameraMount{{1.9, 1.0, 1.1}, 90.0, 50.0, 0.0},
      CameraMount{{-1.0, 0.0, 0.9}, 180.0, 35.0, 0.0},
      CameraMount{{1.9, -1.0, 1.1}, -90.0, 50.0, 0.0},
  };
  /// Shared intrinsics unless overridden per camera.
  std::optional<FisheyeIntrinsics> intrinsics;
  PerCamera<std::optional<FisheyeIntrinsics>> per_camera_intrinsics{};
  std::uint64_t seed = 0;
};

/// 1280x800 lens with a ~190 degree field of view.
[[nodiscard]] FisheyeIntrinsics default_intrinsics();
/// Same lens scaled down by an integer factor (faster image synthesis).
[[nodiscard]] FisheyeIntrinsics scaled_intrinsics(const FisheyeIntrinsics& base, double scale);

/// Vehicle-to-camera rotation of a mount. The optical axis points along
/// yaw/pitch, image x to the right of the heading and image y downward.
[[nodiscard]] Quaternion mount_orientation(const CameraMount& mount);
[[nodiscard]] CameraRig make_rig(const SyntheticRigSpec& spec);

/// Road-roughness bound: range_m / 1000 * iri.
[[nodiscard]] double iri_height_bound(double range_m, double iri_m_per_km);

enum class RoughnessMode { kSlope, kRandom };

/// Axis-aligned vehicle outline in the vehicle frame.
struct Footprint {
  double x_min = -1.0;
  double x_max = 3.7;
  double y_min = -1.0;
  double y_max = 1.0;
};

struct RoughnessSpec {
  RoughnessMode mode = RoughnessMode::kSlope;
  double delta_z = 0.12;  // meters
  double range = 20.0;    // meters
  double iri = 6.0;       // m/km
  Footprint footprint;
  std::uint64_t seed = 0;

  /// delta_z derived from range and iri.
  [[nodiscard]] static RoughnessSpec from_iri(RoughnessMode mode, double range, double iri,
                                              std::uint64_t seed = 0);
};

struct SyntheticKeypoints {
  std::vector<KeypointPair> keypoints;
  /// Ground-truth 3D point behind each keypoint (same order).
  std::vector<Eigen::Vector3d> points;
};

/// For each adjacency pair, rejection-sample ground points whose XY norm lies
/// in [min_range, max_range] and that are visible in both cameras, and emit
/// their exact pixel projections. Throws Error(kGeometry) naming the zone if a
/// zone cannot be filled.
[[nodiscard]] SyntheticKeypoints generate_keypoints(const CameraRig& rig, std::size_t n_per_zone,
                                                    double min_range, double max_range, std::uint64_t seed,
                                                    const std::string& frame_id = "0");

/// Height profile of rough ground. Slope: planes rising away from each side of
/// the footprint, max over the two sides at corners. Random: Uniform[0, dz].
[[nodiscard]] std::vector<Eigen::Vector3d> apply_height_noise(const std::vector<Eigen::Vector3d>& points,
                                                              const RoughnessSpec& spec);

/// Re-project 3D points into the cameras of each keypoint (full 3D projection).
/// Keypoints whose point leaves either image are dropped, so the output
/// may be shorter than the input.
[[nodiscard]] SyntheticKeypoints observe(const CameraRig& rig, const SyntheticKeypoints& base,
                                         const std::vector<Eigen::Vector3d>& points);

/// Add N(0, sigma^2) noise to every pixel coordinate, clamped to the image.
[[nodiscard]] std::vector<KeypointPair> add_pixel_noise(const CameraRig& rig, std::vector<KeypointPair> keypoints,
                                                        double sigma_px, std::uint64_t seed);

/// Random pose offsets: the camera center moves in XY within a disk of radius
/// translation_m; orientation turns about a random axis by at most
/// rotation_deg. Heights are untouched.
[[nodiscard]] CameraRig perturb_rig(const CameraRig& rig, double translation_m, double rotation_deg,
                                    std::uint64_t seed);

struct CameraPoseError {
  double dtx = 0.0;  // meters, camera center
  double dty = 0.0;
  double droll = 0.0;  // degrees
  double dpitch = 0.0;
  double dyaw = 0.0;
};

struct PoseErrorStat {
  double max = 0.0;
  double mean = 0.0;
};

struct PoseErrorSummary {
  PerCamera<CameraPoseError> per_camera;
  PoseErrorStat tx, ty, roll, pitch, yaw;  // over |values| across cameras
};

/// Relative pose of rig_b against rig_a per camera. The rotation delta is
/// D = M_b * M_a^T (M = camera-to-vehicle rotation) decomposed as intrinsic
/// Z-Y-X: D = Rz(yaw) * Ry(pitch) * Rx(roll).
[[nodiscard]] PoseErrorSummary pose_error(const CameraRig& rig_a, const CameraRig& rig_b);

/// Intrinsic Z-Y-X Euler angles (yaw, pitch, roll), radians.
[[nodiscard]] Eigen::Vector3d euler_zyx(const Eigen::Matrix3d& r);

// Procedural scenes for image synthesis.

/// Axis-aligned box standing on (or floating above) the ground.
struct Box {
  Eigen::Vector3d min_corner;
  Eigen::Vector3d max_corner;
  float intensity = 1.0f;
};

struct Scene {
  std::function<float(double x, double y)> ground;
  std::vector<Box> boxes;
  float sky = 0.0f;
};

/// Checkerboard of `square_m` squares with values `dark` / `light`.
[[nodiscard]] std::function<float(double, double)> checkerboard(double square_m, float dark = 0.1f,
                                                                 float light = 0.9f);
/// Smooth band-limited texture suitable for photometric comparisons.
[[nodiscard]] std::function<float(double, double)> smooth_texture(std::uint64_t seed);

/// Grayscale rendering of a scene seen by one camera, `supersample`^2 rays
/// per pixel. Pixels beyond theta_max keep the sky value.
[[nodiscard]] Image render_camera_image(const Camera& cam, const Scene& scene, int supersample = 1);

}  // namespace svcalib::synthetic
