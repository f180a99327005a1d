#pragma once

#include <array>

#include <Eigen/Core>

namespace svcalib {

/// Continuous image coordinates. Origin top-left, u to the right, v down.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Intersection of a back-projected pixel ray with the unit sphere, in the
/// camera frame (z along the optical axis, x toward +u, y toward +v).
struct UnitRay {
  double xs = 0.0;
  double ys = 0.0;
  double zs = 1.0;

  [[nodiscard]] Eigen::Vector3d vec() const { return {xs, ys, zs}; }
};

/// Fourth-order polynomial fisheye model r = a1*t + a2*t^2 + a3*t^3 + a4*t^4
/// mapping incident angle t (radians) to image radius r (pixels).
///
/// Construction validates that the polynomial is strictly increasing on
/// [0, theta_max], which makes the inverse unique.
class FisheyeIntrinsics {
 public:
  static constexpr double kDefaultThetaMax = 1.8;

  FisheyeIntrinsics(std::array<double, 4> coeffs, double u0, double v0, int width, int height,
                    double theta_max = kDefaultThetaMax);

  [[nodiscard]] const std::array<double, 4>& coeffs() const noexcept { return coeffs_; }
  [[nodiscard]] double a1() const noexcept { return coeffs_[0]; }
  [[nodiscard]] double a2() const noexcept { return coeffs_[1]; }
  [[nodiscard]] double a3() const noexcept { return coeffs_[2]; }
  [[nodiscard]] double a4() const noexcept { return coeffs_[3]; }
  [[nodiscard]] double u0() const noexcept { return u0_; }
  [[nodiscard]] double v0() const noexcept { return v0_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] double theta_max() const noexcept { return theta_max_; }
  /// f(theta_max): the largest radius that can be unprojected.
  [[nodiscard]] double max_radius() const noexcept { return max_radius_; }

  [[nodiscard]] bool contains(const PixelPoint& p) const noexcept {
    return p.u >= 0.0 && p.v >= 0.0 && p.u <= width_ - 1 && p.v <= height_ - 1;
  }

  friend bool operator==(const FisheyeIntrinsics&, const FisheyeIntrinsics&) = default;

 private:
  std::array<double, 4> coeffs_;
  double u0_;
  double v0_;
  int width_;
  int height_;
  double theta_max_;
  double max_radius_;
};

/// r = f(theta). Throws Error(kDomain) outside [0, theta_max].
[[nodiscard]] double forward_polynomial(double theta, const FisheyeIntrinsics& intr);

/// theta = f^-1(r) by safeguarded Newton-Raphson.
/// Throws Error(kOutOfRange) for r outside [0, f(theta_max)].
[[nodiscard]] double invert_polynomial(double r, const FisheyeIntrinsics& intr);

/// Unproject a pixel to a unit ray. The pixel does not have to lie inside the
/// image, only within the valid radius.
[[nodiscard]] UnitRay pixel_to_ray(const PixelPoint& p, const FisheyeIntrinsics& intr);

/// Project a camera-frame point. Depth independent; throws Error(kOutOfFov)
/// when the incident angle exceeds theta_max and Error(kDomain) for the origin.
[[nodiscard]] PixelPoint ray_to_pixel(const Eigen::Vector3d& point, const FisheyeIntrinsics& intr);

}  // namespace svcalib
