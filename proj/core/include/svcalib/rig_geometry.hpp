#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "svcalib/camera_model.hpp"

namespace svcalib {

// Vehicle frame: X forward, Y left, Z up, origin on the ground.

enum class CameraId { kFront = 0, kLeft = 1, kRear = 2, kRight = 3 };

inline constexpr std::size_t kNumCameras = 4;
inline constexpr std::array<CameraId, kNumCameras> kAllCameras = {
    CameraId::kFront, CameraId::kLeft, CameraId::kRear, CameraId::kRight};

template <typename T>
using PerCamera = std::array<T, kNumCameras>;

[[nodiscard]] constexpr std::size_t index_of(CameraId id) noexcept {
  return static_cast<std::size_t>(id);
}
[[nodiscard]] std::string_view to_string(CameraId id) noexcept;
[[nodiscard]] std::optional<CameraId> camera_id_from_string(std::string_view name) noexcept;

/// Unit quaternion [w, x, y, z]. Normalized on construction; inputs with
/// norm below 1e-8 are rejected.
class Quaternion {
 public:
  Quaternion() = default;
  Quaternion(double w, double x, double y, double z);

  static Quaternion identity() { return {}; }
  static Quaternion from_axis_angle(const Eigen::Vector3d& axis, double angle_rad);
  static Quaternion from_rotation_matrix(const Eigen::Matrix3d& r);

  [[nodiscard]] double w() const noexcept { return w_; }
  [[nodiscard]] double x() const noexcept { return x_; }
  [[nodiscard]] double y() const noexcept { return y_; }
  [[nodiscard]] double z() const noexcept { return z_; }

  friend bool operator==(const Quaternion&, const Quaternion&) = default;

 private:
  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Rotation matrix of a unit quaternion.
[[nodiscard]] Eigen::Matrix3d quat_to_matrix(const Quaternion& q);

/// Vehicle-to-camera rigid transform: P_c = R(q) * P_v + t.
class Extrinsics {
 public:
  Extrinsics() = default;
  Extrinsics(const Quaternion& q, const Eigen::Vector3d& t) : q_(q), t_(t) {}

  /// Build from an orientation and the camera center expressed in the
  /// vehicle frame (t = -R c).
  static Extrinsics from_center(const Quaternion& q, const Eigen::Vector3d& center);

  [[nodiscard]] const Quaternion& rotation_quaternion() const noexcept { return q_; }
  [[nodiscard]] const Eigen::Vector3d& translation() const noexcept { return t_; }
  [[nodiscard]] Eigen::Matrix3d rotation() const { return quat_to_matrix(q_); }
  /// Camera center in the vehicle frame, -R^T t.
  [[nodiscard]] Eigen::Vector3d camera_center() const;

 private:
  Quaternion q_;
  Eigen::Vector3d t_ = Eigen::Vector3d::Zero();
};

[[nodiscard]] Eigen::Vector3d vehicle_to_camera(const Eigen::Vector3d& p_vehicle, const Extrinsics& e);
[[nodiscard]] Eigen::Vector3d camera_to_vehicle(const Eigen::Vector3d& p_camera, const Extrinsics& e);

struct GroundPoint {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] Eigen::Vector3d vec3() const { return {x, y, 0.0}; }
};

struct GroundIntersection {
  GroundPoint point;
  double lambda = 0.0;  // depth along the unit ray, meters
};

struct Camera {
  CameraId id;
  FisheyeIntrinsics intrinsics;
  Extrinsics extrinsics;
};

using CameraPair = std::pair<CameraId, CameraId>;

/// front-left, front-right, rear-left, rear-right.
[[nodiscard]] std::vector<CameraPair> default_adjacency();

/// Four cameras, stored in CameraId order so `camera(id)` is an index lookup.
class CameraRig {
 public:
  CameraRig(std::vector<Camera> cameras, std::vector<CameraPair> adjacency = default_adjacency());

  [[nodiscard]] const Camera& camera(CameraId id) const { return cameras_[index_of(id)]; }
  [[nodiscard]] Camera& camera(CameraId id) { return cameras_[index_of(id)]; }
  [[nodiscard]] const std::vector<Camera>& cameras() const noexcept { return cameras_; }
  [[nodiscard]] const std::vector<CameraPair>& adjacency() const noexcept { return adjacency_; }

  /// True if {a, b} is an adjacency pair in either order.
  [[nodiscard]] bool adjacent(CameraId a, CameraId b) const noexcept;
  /// Index of the adjacency pair {a, b} (either order), if any.
  [[nodiscard]] std::optional<std::size_t> zone_index(CameraId a, CameraId b) const noexcept;

  void set_extrinsics(CameraId id, const Extrinsics& e) { cameras_[index_of(id)].extrinsics = e; }

 private:
  std::vector<Camera> cameras_;
  std::vector<CameraPair> adjacency_;
};

inline constexpr double kDescendingRayEpsilon = 1e-6;

/// Intersect a camera-frame unit ray with the ground plane z = 0.
/// Throws Error(kNoGroundIntersection) when the ray does not descend.
[[nodiscard]] GroundIntersection ray_to_ground(const Eigen::Vector3d& ray_camera, const Extrinsics& e);

/// Ground reprojection of a pixel: unproject, rotate into the vehicle frame and
/// intersect with z = 0.
[[nodiscard]] GroundIntersection pixel_to_ground(const PixelPoint& p, const Camera& cam);

/// Project a ground point into a camera. Throws Error(kOutOfFov) when it is not
/// visible (including points behind the lens).
[[nodiscard]] PixelPoint ground_to_pixel(const GroundPoint& g, const Camera& cam);

/// Project any vehicle-frame 3D point into a camera.
[[nodiscard]] PixelPoint vehicle_point_to_pixel(const Eigen::Vector3d& p_vehicle, const Camera& cam);

}  // namespace svcalib
