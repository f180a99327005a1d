#include "svcalib/rig_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "svcalib/error.hpp"

namespace svcalib {

std::string_view to_string(CameraId id) noexcept {
  switch (id) {
    case CameraId::kFront: return "front";
    case CameraId::kLeft: return "left";
    case CameraId::kRear: return "rear";
    case CameraId::kRight: return "right";
  }
  return "unknown";
}

std::optional<CameraId> camera_id_from_string(std::string_view name) noexcept {
  for (CameraId id : kAllCameras) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

Quaternion::Quaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n >= 1e-8) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "quaternion norm is zero or not finite");
  }
  w_ = w / n;
  x_ = x / n;
  y_ = y / n;
  z_ = z / n;
}

Quaternion Quaternion::from_axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::kInvalidArgument, "rotation axis must be nonzero");
  const Eigen::Vector3d u = axis / n;
  const double s = std::sin(0.5 * angle_rad);
  return {std::cos(0.5 * angle_rad), s * u.x(), s * u.y(), s * u.z()};
}

Quaternion Quaternion::from_rotation_matrix(const Eigen::Matrix3d& r) {
  const Eigen::Quaterniond q(r);
  return {q.w(), q.x(), q.y(), q.z()};
}

Eigen::Matrix3d quat_to_matrix(const Quaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  // s = 2 for a unit quaternion; dividing by the stored norm keeps rounding
  // out of the diagonal (a 90 degree yaw maps to exact zeros and ones).
  const double s = 2.0 / (w * w + x * x + y * y + z * z);
  Eigen::Matrix3d r;
  r << 1 - s * (y * y + z * z), s * (x * y - w * z), s * (x * z + w * y),
       s * (x * y + w * z), 1 - s * (x * x + z * z), s * (y * z - w * x),
       s * (x * z - w * y), s * (y * z + w * x), 1 - s * (x * x + y * y);
  return r;
}

Extrinsics Extrinsics::from_center(const Quaternion& q, const Eigen::Vector3d& center) {
  return {q, -(quat_to_matrix(q) * center)};
}

Eigen::Vector3d Extrinsics::camera_center() const { return -(rotation().transpose() * t_); }

Eigen::Vector3d vehicle_to_camera(const Eigen::Vector3d& p_vehicle, const Extrinsics& e) {
  return e.rotation() * p_vehicle + e.translation();
}

Eigen::Vector3d camera_to_vehicle(const Eigen::Vector3d& p_camera, const Extrinsics& e) {
  // [R^T | -R^T t]
  return e.rotation().transpose() * (p_camera - e.translation());
}

std::vector<CameraPair> default_adjacency() {
  return {{CameraId::kFront, CameraId::kLeft},
          {CameraId::kFront, CameraId::kRight},
          {CameraId::kRear, CameraId::kLeft},
          {CameraId::kRear, CameraId::kRight}};
}

CameraRig::CameraRig(std::vector<Camera> cameras, std::vector<CameraPair> adjacency)
    : cameras_(std::move(cameras)), adjacency_(std::move(adjacency)) {
  if (cameras_.size() != kNumCameras) {
    throw Error(ErrorCode::kInvalidArgument,
                "a rig needs exactly 4 cameras, got " + std::to_string(cameras_.size()));
  }
  std::sort(cameras_.begin(), cameras_.end(),
            [](const Camera& a, const Camera& b) { return index_of(a.id) < index_of(b.id); });
  for (std::size_t i = 0; i < kNumCameras; ++i) {
    if (index_of(cameras_[i].id) != i) {
      throw Error(ErrorCode::kInvalidArgument, "camera ids must be unique (front, left, rear, right)");
    }
  }
  for (std::size_t i = 0; i < adjacency_.size(); ++i) {
    const auto& [a, b] = adjacency_[i];
    if (a == b) {
      throw Error(ErrorCode::kInvalidArgument, "adjacency pair pairs camera " + std::string(to_string(a)) +
                                                   " with itself");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto& [c, d] = adjacency_[j];
      if ((a == c && b == d) || (a == d && b == c)) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate adjacency pair");
      }
    }
  }
}

bool CameraRig::adjacent(CameraId a, CameraId b) const noexcept { return zone_index(a, b).has_value(); }

std::optional<std::size_t> CameraRig::zone_index(CameraId a, CameraId b) const noexcept {
  for (std::size_t i = 0; i < adjacency_.size(); ++i) {
    const auto& [c, d] = adjacency_[i];
    if ((a == c && b == d) || (a == d && b == c)) return i;
  }
  return std::nullopt;
}

GroundIntersection ray_to_ground(const Eigen::Vector3d& ray_camera, const Extrinsics& e) {
  const Eigen::Matrix3d rt = e.rotation().transpose();
  const Eigen::Vector3d origin = -(rt * e.translation());
  const Eigen::Vector3d dir = rt * ray_camera;
  if (!(dir.z() < -kDescendingRayEpsilon)) {
    throw Error(ErrorCode::kNoGroundIntersection, "ray does not descend toward the ground");
  }
  const double lambda = -origin.z() / dir.z();
  if (!(lambda > 0.0)) {
    throw Error(ErrorCode::kNoGroundIntersection, "ground intersection lies behind the camera");
  }
  return {{origin.x() + lambda * dir.x(), origin.y() + lambda * dir.y()}, lambda};
}

GroundIntersection pixel_to_ground(const PixelPoint& p, const Camera& cam) {
  return ray_to_ground(pixel_to_ray(p, cam.intrinsics).vec(), cam.extrinsics);
}

PixelPoint vehicle_point_to_pixel(const Eigen::Vector3d& p_vehicle, const Camera& cam) {
  return ray_to_pixel(vehicle_to_camera(p_vehicle, cam.extrinsics), cam.intrinsics);
}

PixelPoint ground_to_pixel(const GroundPoint& g, const Camera& cam) {
  return vehicle_point_to_pixel(g.vec3(), cam);
}

}  // namespace svcalib
