#include "svcalib/camera_model.hpp"

#include <cmath>
#include <string>

#include "svcalib/error.hpp"

namespace svcalib {
namespace {

constexpr int kMonotonicitySamples = 4096;
constexpr int kNewtonMaxIterations = 50;
constexpr double kNewtonTolerance = 1e-10;

double poly(const std::array<double, 4>& a, double t) {
  return t * (a[0] + t * (a[1] + t * (a[2] + t * a[3])));
}

double poly_derivative(const std::array<double, 4>& a, double t) {
  return a[0] + t * (2.0 * a[1] + t * (3.0 * a[2] + t * 4.0 * a[3]));
}

}  // namespace

FisheyeIntrinsics::FisheyeIntrinsics(std::array<double, 4> coeffs, double u0, double v0, int width, int height,
                                     double theta_max)
    : coeffs_(coeffs), u0_(u0), v0_(v0), width_(width), height_(height), theta_max_(theta_max) {
  for (double c : coeffs_) {
    if (!std::isfinite(c)) throw Error(ErrorCode::kInvalidArgument, "fisheye coefficients must be finite");
  }
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  if (!(u0 >= 0.0 && u0 < width && v0 >= 0.0 && v0 < height)) {
    throw Error(ErrorCode::kInvalidArgument, "principal point must lie inside the image");
  }
  if (!(theta_max > 0.0 && theta_max < M_PI)) {
    throw Error(ErrorCode::kInvalidArgument, "theta_max must lie in (0, pi)");
  }
  if (!(coeffs_[0] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "a1 must be positive");
  for (int i = 0; i <= kMonotonicitySamples; ++i) {
    const double t = theta_max_ * i / kMonotonicitySamples;
    if (!(poly_derivative(coeffs_, t) > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "fisheye polynomial is not strictly increasing on [0, theta_max] (f'(" + std::to_string(t) +
                      ") <= 0)");
    }
  }
  max_radius_ = poly(coeffs_, theta_max_);
}

double forward_polynomial(double theta, const FisheyeIntrinsics& intr) {
  if (!(theta >= 0.0 && theta <= intr.theta_max())) {
    throw Error(ErrorCode::kDomain, "incident angle " + std::to_string(theta) + " outside [0, theta_max]");
  }
  return poly(intr.coeffs(), theta);
}

double invert_polynomial(double r, const FisheyeIntrinsics& intr) {
  if (!(r >= 0.0 && r <= intr.max_radius())) {
    throw Error(ErrorCode::kOutOfRange,
                "image radius " + std::to_string(r) + " px beyond f(theta_max) = " +
                    std::to_string(intr.max_radius()));
  }
  if (r == 0.0) return 0.0;
  const auto& a = intr.coeffs();
  // f is strictly increasing, so [lo, hi] always brackets the root; Newton
  // steps that leave the bracket fall back to bisection.
  double lo = 0.0;
  double hi = intr.theta_max();
  double t = std::min(r / a[0], hi);
  for (int it = 0; it < kNewtonMaxIterations; ++it) {
    const double residual = poly(a, t) - r;
    if (std::abs(residual) < kNewtonTolerance) return t;
    if (residual > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    double next = t - residual / poly_derivative(a, t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == t) return t;
    t = next;
  }
  if (std::abs(poly(a, t) - r) < 1e-9) return t;
  throw Error(ErrorCode::kNumeric, "polynomial inversion did not converge for r = " + std::to_string(r));
}

UnitRay pixel_to_ray(const PixelPoint& p, const FisheyeIntrinsics& intr) {
  const double du = p.u - intr.u0();
  const double dv = p.v - intr.v0();
  const double r = std::hypot(du, dv);
  if (r == 0.0) return {0.0, 0.0, 1.0};
  const double theta = invert_polynomial(r, intr);
  const double alpha = std::atan2(dv, du);
  const double s = std::sin(theta);
  return {s * std::cos(alpha), s * std::sin(alpha), std::cos(theta)};
}

PixelPoint ray_to_pixel(const Eigen::Vector3d& point, const FisheyeIntrinsics& intr) {
  const double rho = std::hypot(point.x(), point.y());
  if (rho == 0.0 && point.z() == 0.0) {
    throw Error(ErrorCode::kDomain, "cannot project the camera center");
  }
  const double theta = std::atan2(rho, point.z());
  if (theta > intr.theta_max()) {
    throw Error(ErrorCode::kOutOfFov, "point at incident angle " + std::to_string(theta) +
                                          " rad is outside the field of view");
  }
  if (rho == 0.0) return {intr.u0(), intr.v0()};
  const double r = poly(intr.coeffs(), theta);
  return {intr.u0() + r * point.x() / rho, intr.v0() + r * point.y() / rho};
}

}  // namespace svcalib
