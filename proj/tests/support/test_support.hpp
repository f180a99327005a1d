#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Core>

#include "svcalib/bev_renderer.hpp"
#include "svcalib/error.hpp"
#include "svcalib/rig_geometry.hpp"

namespace svtest {
using namespace svcalib;


/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("svcalib-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Quaternion random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion(n(rng), n(rng), n(rng), n(rng));
}

/// Independent rotation oracle: Rodrigues' formula from the quaternion's axis-angle.
inline Eigen::Matrix3d rodrigues(const Quaternion& q) {
  const Eigen::Vector3d v(q.x(), q.y(), q.z());
  const double s = v.norm();
  if (s == 0.0) return Eigen::Matrix3d::Identity();
  const double angle = 2.0 * std::atan2(s, q.w());
  const Eigen::Vector3d k = v / s;
  Eigen::Matrix3d K;
  K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * K + (1 - std::cos(angle)) * K * K;
}

/// Ground hit of a pixel composed by hand: bisection on the lens polynomial,
/// explicit spherical ray, explicit ray/plane algebra.
inline Eigen::Vector2d hand_ground_point(const PixelPoint& p, const Camera& cam) {
  const double r = std::hypot(p.u - cam.intrinsics.u0(), p.v - cam.intrinsics.v0());
  const auto& a = cam.intrinsics.coeffs();
  double lo = 0.0;
  double hi = cam.intrinsics.theta_max();
  for (int i = 0; i < 200; ++i) {
    const double t = 0.5 * (lo + hi);
    ((a[0] * t + a[1] * t * t + a[2] * t * t * t + a[3] * t * t * t * t) < r ? lo : hi) = t;
  }
  const double theta = 0.5 * (lo + hi);
  const double alpha = std::atan2(p.v - cam.intrinsics.v0(), p.u - cam.intrinsics.u0());
  const Eigen::Vector3d s(std::sin(theta) * std::cos(alpha), std::sin(theta) * std::sin(alpha), std::cos(theta));
  const Eigen::Matrix3d r_cv = rodrigues(cam.extrinsics.rotation_quaternion());
  const Eigen::Vector3d o = -r_cv.transpose() * cam.extrinsics.translation();
  const Eigen::Vector3d d = r_cv.transpose() * s;
  return (o - o.z() / d.z() * d).head<2>();
}

struct CheckerOracle {
  double mean_abs_error = 0.0;
  std::size_t compared = 0;
};

/// Compare a BEV composite of a checkerboard ground against the texture
/// itself, skipping pixels near cell edges. "Near" is judged in each source
/// image: bilinear sampling at (u, v) mixes pixels whose footprints cover
/// [floor(u) - 0.5, floor(u) + 1.5] x [floor(v) - 0.5, floor(v) + 1.5], and the
/// pixel is kept only if all four corners of that square land in the same
/// checker cell as the BEV pixel itself, for every camera that contributes.
inline CheckerOracle checker_oracle(const BevImage& bev, const CameraRig& rig, const BevConfig& cfg,
                                    double square_m, float dark, float light) {
  const auto cell = [&](const GroundPoint& g) {
    return std::pair<long long, long long>(static_cast<long long>(std::floor(g.x / square_m)),
                                           static_cast<long long>(std::floor(g.y / square_m)));
  };
  const int n = bev.composite.width;
  double sum = 0.0;
  CheckerOracle out;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * n + c;
      if (!bev.composite_mask[idx]) continue;
      const GroundPoint g = bev_pixel_to_ground({static_cast<double>(r), static_cast<double>(c)}, cfg);
      const auto home = cell(g);
      bool clean = true;
      for (const BevLayer& layer : bev.layers) {
        if (!layer.mask[idx] || !clean) continue;
        const Camera& cam = rig.camera(layer.camera);
        const PixelPoint p = ground_to_pixel(g, cam);
        const double u0 = std::floor(p.u) - 0.5;
        const double v0 = std::floor(p.v) - 0.5;
        for (int k = 0; k < 4 && clean; ++k) {
          const PixelPoint corner{u0 + 2.0 * (k & 1), v0 + 2.0 * (k >> 1)};
          try {
            clean = cell(pixel_to_ground(corner, cam).point) == home;
          } catch (const Error&) {
            clean = false;
          }
        }
      }
      if (!clean) continue;
      const double truth = ((home.first + home.second) % 2 == 0) ? light : dark;
      sum += std::abs(bev.composite.at(c, r) - truth);
      ++out.compared;
    }
  }
  if (out.compared > 0) out.mean_abs_error = sum / static_cast<double>(out.compared);
  return out;
}

}  // namespace svtest
