#include "svcalib/calibration.hpp"

#include <cmath>
#include <optional>
#include <tuple>
#include <string>

#include <spdlog/spdlog.h>

#include "svcalib/error.hpp"

namespace svcalib {
namespace {

std::string zone_name(const CameraPair& pair) {
  return std::string(to_string(pair.first)) + "-" + std::string(to_string(pair.second));
}

void require_param_count(const Eigen::VectorXd& params) {
  if (params.size() != kParamCount) {
    throw Error(ErrorCode::kContractViolation, "parameter vector has " + std::to_string(params.size()) +
                                                   " entries, expected " + std::to_string(kParamCount));
  }
}

struct CameraFrame {
  Eigen::Matrix3d rt;  // camera-to-vehicle rotation
  Eigen::Vector3d center;
};

std::optional<CameraFrame> camera_frame(const Eigen::VectorXd& params, Eigen::Index o, double height) {
  const double norm = params.segment<4>(o + 2).norm();
  if (!(norm >= 1e-8) || !std::isfinite(norm)) return std::nullopt;
  return CameraFrame{
      quat_to_matrix(Quaternion(params[o + 2], params[o + 3], params[o + 4], params[o + 5])).transpose(),
      {params[o], params[o + 1], height}};
}

std::optional<Eigen::Vector2d> ground_xy(const CameraFrame& cam, const Eigen::Vector3d& ray) {
  const Eigen::Vector3d d = cam.rt * ray;
  if (!(d.z() < -kDescendingRayEpsilon)) return std::nullopt;
  const double l = -cam.center.z() / d.z();
  return Eigen::Vector2d(cam.center.x() + l * d.x(), cam.center.y() + l * d.y());
}

}  // namespace

FixedHeights heights_of(const CameraRig& rig) {
  FixedHeights h{};
  for (const Camera& cam : rig.cameras()) h[index_of(cam.id)] = cam.extrinsics.camera_center().z();
  return h;
}

double reprojection_error(const KeypointPair& kp, const CameraRig& rig) {
  const GroundPoint a = pixel_to_ground(kp.pixel_i, rig.camera(kp.cam_i)).point;
  const GroundPoint b = pixel_to_ground(kp.pixel_j, rig.camera(kp.cam_j)).point;
  return std::hypot(a.x - b.x, a.y - b.y);
}

Eigen::VectorXd encode_params(const CameraRig& rig) {
  Eigen::VectorXd params(kParamCount);
  for (const Camera& cam : rig.cameras()) {
    const Eigen::Index o = static_cast<Eigen::Index>(index_of(cam.id)) * kParamsPerCamera;
    const Eigen::Vector3d c = cam.extrinsics.camera_center();
    const Quaternion& q = cam.extrinsics.rotation_quaternion();
    params.segment<kParamsPerCamera>(o) << c.x(), c.y(), q.w(), q.x(), q.y(), q.z();
  }
  return params;
}

PerCamera<CameraPose> decode_poses(const Eigen::VectorXd& params, const FixedHeights& heights) {
  require_param_count(params);
  PerCamera<CameraPose> poses;
  for (std::size_t i = 0; i < kNumCameras; ++i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * kParamsPerCamera;
    poses[i].q = Quaternion(params[o + 2], params[o + 3], params[o + 4], params[o + 5]);
    poses[i].center = {params[o], params[o + 1], heights[i]};
  }
  return poses;
}

CameraRig decode_params(const Eigen::VectorXd& params, const FixedHeights& heights, const CameraRig& base) {
  const PerCamera<CameraPose> poses = decode_poses(params, heights);
  CameraRig rig = base;
  for (CameraId id : kAllCameras) {
    const CameraPose& pose = poses[index_of(id)];
    rig.set_extrinsics(id, Extrinsics::from_center(pose.q, pose.center));
  }
  return rig;
}

void validate_keypoint(const KeypointPair& kp, const CameraRig& rig) {
  if (kp.cam_i == kp.cam_j) {
    throw Error(ErrorCode::kInvalidArgument, "keypoint pairs camera " + std::string(to_string(kp.cam_i)) +
                                                 " with itself");
  }
  if (!rig.adjacent(kp.cam_i, kp.cam_j)) {
    throw Error(ErrorCode::kInvalidArgument, "cameras " + std::string(to_string(kp.cam_i)) + " and " +
                                                 std::string(to_string(kp.cam_j)) + " are not adjacent");
  }
  for (const auto& [id, px] : {std::pair{kp.cam_i, kp.pixel_i}, std::pair{kp.cam_j, kp.pixel_j}}) {
    const FisheyeIntrinsics& intr = rig.camera(id).intrinsics;
    if (!std::isfinite(px.u) || !std::isfinite(px.v) || !intr.contains(px)) {
      throw Error(ErrorCode::kInvalidArgument, "pixel (" + std::to_string(px.u) + ", " + std::to_string(px.v) +
                                                   ") is outside the " + std::string(to_string(id)) + " image");
    }
    if (std::hypot(px.u - intr.u0(), px.v - intr.v0()) > intr.max_radius()) {
      throw Error(ErrorCode::kInvalidArgument, "pixel (" + std::to_string(px.u) + ", " + std::to_string(px.v) +
                                                   ") lies beyond the " + std::string(to_string(id)) +
                                                   " lens field of view");
    }
  }
}

std::vector<std::size_t> keypoints_per_zone(const std::vector<KeypointPair>& keypoints, const CameraRig& rig) {
  std::vector<std::size_t> counts(rig.adjacency().size(), 0);
  for (const KeypointPair& kp : keypoints) {
    if (auto zone = rig.zone_index(kp.cam_i, kp.cam_j)) ++counts[*zone];
  }
  return counts;
}

ReprojectionObjective::ReprojectionObjective(const CameraRig& rig, const std::vector<KeypointPair>& keypoints,
                                             const FixedHeights& heights)
    : heights_(heights) {
  observations_.reserve(keypoints.size());
  for (const KeypointPair& kp : keypoints) {
    observations_.push_back({index_of(kp.cam_i), index_of(kp.cam_j),
                             pixel_to_ray(kp.pixel_i, rig.camera(kp.cam_i).intrinsics).vec(),
                             pixel_to_ray(kp.pixel_j, rig.camera(kp.cam_j).intrinsics).vec()});
  }
}

template <typename Fn>
void ReprojectionObjective::for_each_error(const Eigen::VectorXd& params, Fn&& fn) const {
  require_param_count(params);
  PerCamera<CameraFrame> frames;
  bool degenerate = false;
  for (std::size_t i = 0; i < kNumCameras && !degenerate; ++i) {
    const auto frame = camera_frame(params, static_cast<Eigen::Index>(i) * kParamsPerCamera, heights_[i]);
    if (frame) {
      frames[i] = *frame;
    } else {
      degenerate = true;
    }
  }
  for (const Observation& obs : observations_) {
    if (degenerate) {
      fn(kInfeasiblePenalty, false);
      continue;
    }
    const auto gi = ground_xy(frames[obs.cam_i], obs.ray_i);
    const auto gj = ground_xy(frames[obs.cam_j], obs.ray_j);
    if (!gi || !gj) {
      fn(kInfeasiblePenalty, false);
      continue;
    }
    fn(std::hypot(gi->x() - gj->x(), gi->y() - gj->y()), true);
  }
}

Eigen::VectorXd ReprojectionObjective::gradient(const Eigen::VectorXd& params, double relative_step) const {
  require_param_count(params);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(kParamCount);
  PerCamera<CameraFrame> frames;
  for (std::size_t i = 0; i < kNumCameras; ++i) {
    const auto frame = camera_frame(params, static_cast<Eigen::Index>(i) * kParamsPerCamera, heights_[i]);
    if (!frame) return grad;
    frames[i] = *frame;
  }
  // Unit residual direction of every feasible keypoint with a nonzero error.
  std::vector<std::optional<Eigen::Vector2d>> dir(observations_.size());
  for (std::size_t k = 0; k < observations_.size(); ++k) {
    const Observation& obs = observations_[k];
    const auto gi = ground_xy(frames[obs.cam_i], obs.ray_i);
    const auto gj = ground_xy(frames[obs.cam_j], obs.ray_j);
    if (!gi || !gj) continue;
    const Eigen::Vector2d r = *gi - *gj;
    const double e = r.norm();
    if (e > 0.0) dir[k] = r / e;
  }
  Eigen::VectorXd xt = params;
  for (std::size_t cam = 0; cam < kNumCameras; ++cam) {
    const Eigen::Index o = static_cast<Eigen::Index>(cam) * kParamsPerCamera;
    for (Eigen::Index p = o; p < o + kParamsPerCamera; ++p) {
      const double h = relative_step * std::max(1.0, std::abs(params[p]));
      xt[p] = params[p] + h;
      const auto plus = camera_frame(xt, o, heights_[cam]);
      xt[p] = params[p] - h;
      const auto minus = camera_frame(xt, o, heights_[cam]);
      xt[p] = params[p];
      if (!plus || !minus) continue;
      double sum = 0.0;
      for (std::size_t k = 0; k < observations_.size(); ++k) {
        if (!dir[k]) continue;
        const Observation& obs = observations_[k];
        for (const auto& [side, ray, sign] : {std::tuple{obs.cam_i, &obs.ray_i, 1.0},
                                              std::tuple{obs.cam_j, &obs.ray_j, -1.0}}) {
          if (side != cam) continue;
          const auto gp = ground_xy(*plus, *ray);
          const auto gm = ground_xy(*minus, *ray);
          if (gp && gm) sum += sign * dir[k]->dot(*gp - *gm) / (2.0 * h);
        }
      }
      grad[p] = sum;
    }
  }
  return grad;
}

double ReprojectionObjective::operator()(const Eigen::VectorXd& params) const {
  double sum = 0.0;
  for_each_error(params, [&](double e, bool) { sum += e; });
  return sum;
}

std::vector<double> ReprojectionObjective::per_keypoint(const Eigen::VectorXd& params) const {
  std::vector<double> errors;
  errors.reserve(observations_.size());
  for_each_error(params, [&](double e, bool) { errors.push_back(e); });
  return errors;
}

std::size_t ReprojectionObjective::feasible_count(const Eigen::VectorXd& params) const {
  std::size_t n = 0;
  for_each_error(params, [&](double, bool ok) { n += ok ? 1 : 0; });
  return n;
}

Eigen::VectorXd align_planar_gauge(const Eigen::VectorXd& params, const Eigen::VectorXd& reference) {
  require_param_count(params);
  require_param_count(reference);
  Eigen::Vector2d mean_a = Eigen::Vector2d::Zero();
  Eigen::Vector2d mean_b = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < kNumCameras; ++i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * kParamsPerCamera;
    mean_a += params.segment<2>(o) / static_cast<double>(kNumCameras);
    mean_b += reference.segment<2>(o) / static_cast<double>(kNumCameras);
  }
  double sin_sum = 0.0;
  double cos_sum = 0.0;
  for (std::size_t i = 0; i < kNumCameras; ++i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * kParamsPerCamera;
    const Eigen::Vector2d a = params.segment<2>(o) - mean_a;
    const Eigen::Vector2d b = reference.segment<2>(o) - mean_b;
    sin_sum += a.x() * b.y() - a.y() * b.x();
    cos_sum += a.dot(b);
  }
  const double psi = std::atan2(sin_sum, cos_sum);
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  // Right-multiplying by a rotation of -psi about Z turns every optical frame
  // by +psi in the vehicle frame.
  const double qw = std::cos(0.5 * psi);
  const double qz = -std::sin(0.5 * psi);
  Eigen::VectorXd out = params;
  for (std::size_t i = 0; i < kNumCameras; ++i) {
    const Eigen::Index o = static_cast<Eigen::Index>(i) * kParamsPerCamera;
    const Eigen::Vector2d a = params.segment<2>(o) - mean_a;
    out[o] = c * a.x() - s * a.y() + mean_b.x();
    out[o + 1] = s * a.x() + c * a.y() + mean_b.y();
    const double w = params[o + 2], x = params[o + 3], y = params[o + 4], z = params[o + 5];
    out[o + 2] = w * qw - z * qz;
    out[o + 3] = x * qw + y * qz;
    out[o + 4] = y * qw - x * qz;
    out[o + 5] = z * qw + w * qz;
  }
  return out;
}

CameraRig align_planar_gauge(const CameraRig& rig, const CameraRig& reference) {
  return decode_params(align_planar_gauge(encode_params(rig), encode_params(reference)), heights_of(rig), rig);
}

double objective(const Eigen::VectorXd& params, const CalibrationProblem& problem) {
  return ReprojectionObjective(problem.rig_initial, problem.keypoints, problem.fixed_heights)(params);
}

CalibrationResult calibrate(const CalibrationProblem& problem, const optim::IterationObserver& observer) {
  const SolverConfig& cfg = problem.solver;
  if (cfg.max_iterations <= 0 || !(cfg.gradient_tolerance > 0.0) || !(cfg.finite_diff_step > 0.0) ||
      cfg.warn_min_keypoints_per_zone <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "solver settings must be positive");
  }
  for (CameraId id : kAllCameras) {
    if (!(problem.fixed_heights[index_of(id)] > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "fixed height of camera " + std::string(to_string(id)) + " must be positive");
    }
  }
  for (std::size_t k = 0; k < problem.keypoints.size(); ++k) {
    try {
      validate_keypoint(problem.keypoints[k], problem.rig_initial);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidArgument, "keypoint " + std::to_string(k) + ": " + e.what());
    }
  }
  const auto& adjacency = problem.rig_initial.adjacency();
  const std::vector<std::size_t> counts = keypoints_per_zone(problem.keypoints, problem.rig_initial);
  for (std::size_t z = 0; z < counts.size(); ++z) {
    if (counts[z] == 0) {
      throw Error(ErrorCode::kInvalidArgument, "overlap zone " + zone_name(adjacency[z]) + " has no keypoints");
    }
    if (counts[z] < static_cast<std::size_t>(cfg.warn_min_keypoints_per_zone)) {
      spdlog::warn("overlap zone {} has only {} keypoints (at least {} recommended)", zone_name(adjacency[z]),
                   counts[z], cfg.warn_min_keypoints_per_zone);
    }
  }

  const ReprojectionObjective objective_fn(problem.rig_initial, problem.keypoints, problem.fixed_heights);
  const Eigen::VectorXd x0 = encode_params(problem.rig_initial);
  const std::size_t feasible = objective_fn.feasible_count(x0);
  if (static_cast<double>(feasible) < kMinFeasibleFraction * static_cast<double>(objective_fn.size())) {
    throw Error(ErrorCode::kBadInitialization,
                "initial rig reaches the ground for only " + std::to_string(feasible) + " of " +
                    std::to_string(objective_fn.size()) + " keypoints");
  }

  const optim::ObjectiveFn f = [&](const Eigen::VectorXd& x) { return objective_fn(x); };
  const optim::GradientFn grad = [&](const Eigen::VectorXd& x) {
    return objective_fn.gradient(x, cfg.finite_diff_step);
  };
  optim::BfgsOptions options;
  options.max_iterations = cfg.max_iterations;
  options.gradient_tolerance = cfg.gradient_tolerance;
  optim::BfgsResult run = optim::minimize_bfgs(f, grad, x0, options, observer);
  // The anchoring is exact in theory; guard against a rounding-level rise of J.
  if (Eigen::VectorXd aligned = align_planar_gauge(run.x, x0); objective_fn(aligned) <= run.f_initial) {
    run.x = std::move(aligned);
  }

  CalibrationResult result{.rig_optimized = decode_params(run.x, problem.fixed_heights, problem.rig_initial),
                          .per_keypoint_errors = objective_fn.per_keypoint(run.x),
                          .camera_centers = {}};
  result.objective_initial = run.f_initial;
  result.objective_final = 0.0;
  for (double e : result.per_keypoint_errors) result.objective_final += e;
  result.iterations = run.iterations;
  result.termination = run.status;
  result.converged = run.status != optim::BfgsStatus::kMaxIterations;
  const PerCamera<CameraPose> poses = decode_poses(run.x, problem.fixed_heights);
  for (std::size_t i = 0; i < kNumCameras; ++i) result.camera_centers[i] = poses[i].center;
  spdlog::info("calibration: J {:.6g} -> {:.6g} m after {} iterations ({})", result.objective_initial,
               result.objective_final, result.iterations, optim::to_string(run.status));
  return result;
}

}  // namespace svcalib
