#include "svcalib/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "svcalib/error.hpp"

namespace svcalib::synthetic {
namespace {

constexpr double kDegToRad = M_PI / 180.0;
constexpr std::size_t kAttemptsPerPoint = 20000;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

bool visible(const Eigen::Vector3d& p, const Camera& cam, PixelPoint* out) {
  const Eigen::Vector3d pc = vehicle_to_camera(p, cam.extrinsics);
  const double theta = std::atan2(std::hypot(pc.x(), pc.y()), pc.z());
  if (!(theta < cam.intrinsics.theta_max())) return false;
  const PixelPoint px = ray_to_pixel(pc, cam.intrinsics);
  if (!cam.intrinsics.contains(px)) return false;
  if (out) *out = px;
  return true;
}

// Ray / axis-aligned box intersection (slab method); returns entry distance.
bool hit_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Box& box, double* t_hit) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < box.min_corner[a] || o[a] > box.max_corner[a]) return false;
      continue;
    }
    double ta = (box.min_corner[a] - o[a]) / d[a];
    double tb = (box.max_corner[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  *t_hit = t0;
  return true;
}

}  // namespace

FisheyeIntrinsics default_intrinsics() {
  return FisheyeIntrinsics({339.749, -31.988, 48.275, -7.201}, 639.5, 399.5, 1280, 800);
}

FisheyeIntrinsics scaled_intrinsics(const FisheyeIntrinsics& base, double scale) {
  const auto& a = base.coeffs();
  const int w = static_cast<int>(std::lround(base.width() * scale));
  const int h = static_cast<int>(std::lround(base.height() * scale));
  // Keep the principal point at the same relative position of the pixel grid.
  return FisheyeIntrinsics({a[0] * scale, a[1] * scale, a[2] * scale, a[3] * scale},
                           (base.u0() + 0.5) * scale - 0.5, (base.v0() + 0.5) * scale - 0.5, w, h,
                           base.theta_max());
}

Quaternion mount_orientation(const CameraMount& mount) {
  const double yaw = mount.yaw_deg * kDegToRad;
  const double pitch = mount.pitch_deg * kDegToRad;
  const double roll = mount.roll_deg * kDegToRad;
  const Eigen::Vector3d z(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), -std::sin(pitch));
  const Eigen::Vector3d x0(std::sin(yaw), -std::cos(yaw), 0.0);
  const Eigen::Vector3d y0 = z.cross(x0);
  const Eigen::Vector3d x = std::cos(roll) * x0 + std::sin(roll) * y0;
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d camera_to_vehicle;
  camera_to_vehicle << x, y, z;
  return Quaternion::from_rotation_matrix(camera_to_vehicle.transpose());
}

CameraRig make_rig(const SyntheticRigSpec& spec) {
  const FisheyeIntrinsics shared = spec.intrinsics.value_or(default_intrinsics());
  std::vector<Camera> cameras;
  for (CameraId id : kAllCameras) {
    const CameraMount& mount = spec.mounts[index_of(id)];
    if (!(mount.center.z() > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "camera " + std::string(to_string(id)) + " must sit above ground");
    }
    cameras.push_back({id, spec.per_camera_intrinsics[index_of(id)].value_or(shared),
                       Extrinsics::from_center(mount_orientation(mount), mount.center)});
  }
  return CameraRig(std::move(cameras));
}

double iri_height_bound(double range_m, double iri_m_per_km) { return range_m / 1000.0 * iri_m_per_km; }

RoughnessSpec RoughnessSpec::from_iri(RoughnessMode mode, double range, double iri, std::uint64_t seed) {
  RoughnessSpec spec;
  spec.mode = mode;
  spec.range = range;
  spec.iri = iri;
  spec.delta_z = iri_height_bound(range, iri);
  spec.seed = seed;
  return spec;
}

SyntheticKeypoints generate_keypoints(const CameraRig& rig, std::size_t n_per_zone, double min_range,
                                      double max_range, std::uint64_t seed, const std::string& frame_id) {
  if (n_per_zone == 0) throw Error(ErrorCode::kInvalidArgument, "n_per_zone must be at least 1");
  if (!(min_range >= 0.0 && max_range > min_range)) {
    throw Error(ErrorCode::kInvalidArgument, "keypoint range must satisfy 0 <= min < max");
  }
  SyntheticKeypoints out;
  const auto& zones = rig.adjacency();
  for (std::size_t z = 0; z < zones.size(); ++z) {
    const auto [ci, cj] = zones[z];
    std::mt19937_64 rng = make_rng(seed, z);
    std::uniform_real_distribution<double> radius(min_range, max_range);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    std::size_t found = 0;
    for (std::size_t attempt = 0; found < n_per_zone && attempt < kAttemptsPerPoint * n_per_zone; ++attempt) {
      const double r = radius(rng);
      const double phi = angle(rng);
      const Eigen::Vector3d p(r * std::cos(phi), r * std::sin(phi), 0.0);
      PixelPoint pi, pj;
      if (!visible(p, rig.camera(ci), &pi) || !visible(p, rig.camera(cj), &pj)) continue;
      out.keypoints.push_back({frame_id, ci, cj, pi, pj});
      out.points.push_back(p);
      ++found;
    }
    if (found < n_per_zone) {
      throw Error(ErrorCode::kGeometry, "could not place " + std::to_string(n_per_zone) + " keypoints in zone " +
                                            std::string(to_string(ci)) + "-" + std::string(to_string(cj)) +
                                            " within " + std::to_string(min_range) + "-" +
                                            std::to_string(max_range) + " m");
    }
  }
  return out;
}

std::vector<Eigen::Vector3d> apply_height_noise(const std::vector<Eigen::Vector3d>& points, const RoughnessSpec& spec) {
  if (!(spec.delta_z >= 0.0) || !(spec.range > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "roughness needs delta_z >= 0 and range > 0");
  }
  std::vector<Eigen::Vector3d> out = points;
  if (spec.mode == RoughnessMode::kRandom) {
    std::mt19937_64 rng = make_rng(spec.seed, 0x5eed);
    std::uniform_real_distribution<double> height(0.0, spec.delta_z);
    for (Eigen::Vector3d& p : out) p.z() += height(rng);
    return out;
  }
  const Footprint& fp = spec.footprint;
  const auto ramp = [&](double d) { return d > 0.0 ? spec.delta_z * std::min(1.0, d / spec.range) : 0.0; };
  for (Eigen::Vector3d& p : out) {
    const double h = std::max({ramp(p.x() - fp.x_max), ramp(fp.x_min - p.x()), ramp(p.y() - fp.y_max),
                               ramp(fp.y_min - p.y())});
    p.z() += h;
  }
  return out;
}

SyntheticKeypoints observe(const CameraRig& rig, const SyntheticKeypoints& base,
                           const std::vector<Eigen::Vector3d>& points) {
  if (points.size() != base.keypoints.size()) {
    throw Error(ErrorCode::kContractViolation, "one 3D point per keypoint is required");
  }
  SyntheticKeypoints out;
  for (std::size_t k = 0; k < points.size(); ++k) {
    KeypointPair kp = base.keypoints[k];
    if (!visible(points[k], rig.camera(kp.cam_i), &kp.pixel_i) ||
        !visible(points[k], rig.camera(kp.cam_j), &kp.pixel_j)) {
      continue;
    }
    out.keypoints.push_back(kp);
    out.points.push_back(points[k]);
  }
  return out;
}

std::vector<KeypointPair> add_pixel_noise(const CameraRig& rig, std::vector<KeypointPair> keypoints,
                                          double sigma_px, std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, 0x9015e);
  std::normal_distribution<double> noise(0.0, sigma_px);
  const auto jitter = [&](PixelPoint& p, CameraId cam) {
    const FisheyeIntrinsics& intr = rig.camera(cam).intrinsics;
    p.u = std::clamp(p.u + noise(rng), 0.0, static_cast<double>(intr.width() - 1));
    p.v = std::clamp(p.v + noise(rng), 0.0, static_cast<double>(intr.height() - 1));
  };
  for (KeypointPair& kp : keypoints) {
    jitter(kp.pixel_i, kp.cam_i);
    jitter(kp.pixel_j, kp.cam_j);
  }
  return keypoints;
}

CameraRig perturb_rig(const CameraRig& rig, double translation_m, double rotation_deg, std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, 0xbe27);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CameraRig out = rig;
  for (const Camera& cam : rig.cameras()) {
    const double phi = 2.0 * M_PI * unit(rng);
    const double radius = translation_m * std::sqrt(unit(rng));
    Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
    const double angle = rotation_deg * kDegToRad * (2.0 * unit(rng) - 1.0);
    if (translation_m == 0.0 && rotation_deg == 0.0) continue;
    if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d center =
        cam.extrinsics.camera_center() + Eigen::Vector3d(radius * std::cos(phi), radius * std::sin(phi), 0.0);
    // Rotate the camera in the vehicle frame: M' = D M, so R' = R D^T.
    const Eigen::Matrix3d d = quat_to_matrix(Quaternion::from_axis_angle(axis, angle));
    const Eigen::Matrix3d r = cam.extrinsics.rotation() * d.transpose();
    out.set_extrinsics(cam.id, Extrinsics::from_center(Quaternion::from_rotation_matrix(r), center));
  }
  return out;
}

Eigen::Vector3d euler_zyx(const Eigen::Matrix3d& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return {yaw, pitch, roll};
}

PoseErrorSummary pose_error(const CameraRig& rig_a, const CameraRig& rig_b) {
  PoseErrorSummary s;
  for (CameraId id : kAllCameras) {
    const Camera& a = rig_a.camera(id);
    const Camera& b = rig_b.camera(id);
    if (a.id != b.id) throw Error(ErrorCode::kContractViolation, "rigs have different cameras");
    const Eigen::Vector3d dc = b.extrinsics.camera_center() - a.extrinsics.camera_center();
    const Eigen::Matrix3d delta = b.extrinsics.rotation().transpose() * a.extrinsics.rotation();
    const Eigen::Vector3d ypr = euler_zyx(delta) / kDegToRad;
    s.per_camera[index_of(id)] = {dc.x(), dc.y(), ypr[2], ypr[1], ypr[0]};
  }
  const auto stat = [&](double CameraPoseError::*field) {
    PoseErrorStat st;
    for (const CameraPoseError& e : s.per_camera) {
      st.max = std::max(st.max, std::abs(e.*field));
      st.mean += std::abs(e.*field) / static_cast<double>(kNumCameras);
    }
    return st;
  };
  s.tx = stat(&CameraPoseError::dtx);
  s.ty = stat(&CameraPoseError::dty);
  s.roll = stat(&CameraPoseError::droll);
  s.pitch = stat(&CameraPoseError::dpitch);
  s.yaw = stat(&CameraPoseError::dyaw);
  return s;
}

std::function<float(double, double)> checkerboard(double square_m, float dark, float light) {
  return [=](double x, double y) {
    const auto parity = static_cast<long long>(std::floor(x / square_m) + std::floor(y / square_m));
    return (parity % 2 == 0) ? light : dark;
  };
}

std::function<float(double, double)> smooth_texture(std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed, 0x7e7);
  std::uniform_real_distribution<double> freq(0.3, 2.5);
  std::uniform_real_distribution<double> dir(-M_PI, M_PI);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  struct Wave {
    double kx, ky, phase;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 8; ++i) {
    const double f = freq(rng);
    const double a = dir(rng);
    waves.push_back({f * std::cos(a), f * std::sin(a), phase(rng)});
  }
  return [waves](double x, double y) {
    double v = 0.0;
    for (const Wave& w : waves) v += std::sin(w.kx * x + w.ky * y + w.phase);
    return static_cast<float>(std::clamp(0.5 + 0.8 * v / static_cast<double>(waves.size()), 0.0, 1.0));
  };
}

Image render_camera_image(const Camera& cam, const Scene& scene, int supersample) {
  if (supersample < 1) throw Error(ErrorCode::kInvalidArgument, "supersample must be >= 1");
  const FisheyeIntrinsics& intr = cam.intrinsics;
  const Eigen::Matrix3d rt = cam.extrinsics.rotation().transpose();
  const Eigen::Vector3d origin = cam.extrinsics.camera_center();
  Image img(intr.width(), intr.height(), 1, scene.sky);
  const double step = 1.0 / supersample;
  for (int y = 0; y < intr.height(); ++y) {
    for (int x = 0; x < intr.width(); ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < supersample; ++sy) {
        for (int sx = 0; sx < supersample; ++sx) {
          const PixelPoint p{x - 0.5 + (sx + 0.5) * step, y - 0.5 + (sy + 0.5) * step};
          if (std::hypot(p.u - intr.u0(), p.v - intr.v0()) > intr.max_radius()) {
            acc += scene.sky;
            continue;
          }
          const Eigen::Vector3d d = rt * pixel_to_ray(p, intr).vec();
          double best = std::numeric_limits<double>::infinity();
          float value = scene.sky;
          if (d.z() < 0.0) {
            best = -origin.z() / d.z();
            const Eigen::Vector3d g = origin + best * d;
            value = scene.ground ? scene.ground(g.x(), g.y()) : 0.5f;
          }
          for (const Box& box : scene.boxes) {
            double t = 0.0;
            if (hit_box(origin, d, box, &t) && t < best) {
              best = t;
              value = box.intensity;
            }
          }
          acc += value;
        }
      }
      img.at(x, y) = static_cast<float>(acc / (supersample * supersample));
    }
  }
  return img;
}

}  // namespace svcalib::synthetic
