#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "svcalib/bfgs.hpp"
#include "svcalib/rig_geometry.hpp"

namespace svcalib {

/// One ground point clicked in two adjacent cameras.
struct KeypointPair {
  std::string frame_id;
  CameraId cam_i;
  CameraId cam_j;
  PixelPoint pixel_i;
  PixelPoint pixel_j;
};

/// Camera-center heights (vehicle-frame z, meters) held fixed during calibration.
using FixedHeights = PerCamera<double>;

[[nodiscard]] FixedHeights heights_of(const CameraRig& rig);

struct SolverConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  double finite_diff_step = 1e-6;
  int warn_min_keypoints_per_zone = 10;
};

struct CalibrationProblem {
  CameraRig rig_initial;
  std::vector<KeypointPair> keypoints;
  FixedHeights fixed_heights;
  SolverConfig solver;
};

struct CalibrationResult {
  CameraRig rig_optimized;
  double objective_initial = 0.0;
  double objective_final = 0.0;
  int iterations = 0;
  bool converged = false;
  optim::BfgsStatus termination = optim::BfgsStatus::kMaxIterations;
  std::vector<double> per_keypoint_errors;
  /// Per-camera pose parameters as decoded by the solver; the camera-center z
  /// here is bitwise equal to the fixed height.
  PerCamera<Eigen::Vector3d> camera_centers;
};

/// Penalty (meters) charged for a keypoint whose ray misses the ground.
inline constexpr double kInfeasiblePenalty = 1e3;
/// calibrate() refuses to start below this fraction of feasible keypoints.
inline constexpr double kMinFeasibleFraction = 0.8;

/// Ground-plane distance between the two reprojections of a keypoint.
/// Throws Error(kNoGroundIntersection) if either ray misses the ground.
[[nodiscard]] double reprojection_error(const KeypointPair& kp, const CameraRig& rig);

// Parameter layout: per camera, in CameraId order, [cx, cy, qw, qx, qy, qz]
// where (cx, cy) is the camera center in the vehicle frame. The center height
// is not a parameter; decode takes it from FixedHeights.
inline constexpr int kParamsPerCamera = 6;
inline constexpr int kParamCount = kParamsPerCamera * static_cast<int>(kNumCameras);

struct CameraPose {
  Quaternion q;
  Eigen::Vector3d center;
};

[[nodiscard]] Eigen::VectorXd encode_params(const CameraRig& rig);
/// Throws Error(kContractViolation) for a vector whose length is not kParamCount.
[[nodiscard]] PerCamera<CameraPose> decode_poses(const Eigen::VectorXd& params, const FixedHeights& heights);
/// Decode onto a template rig, which supplies intrinsics and adjacency.
[[nodiscard]] CameraRig decode_params(const Eigen::VectorXd& params, const FixedHeights& heights,
                                      const CameraRig& base);

/// Checks keypoint invariants against the rig: distinct adjacent cameras and
/// in-bounds pixels that unproject. Throws Error(kInvalidArgument).
void validate_keypoint(const KeypointPair& kp, const CameraRig& rig);

/// Number of keypoints per adjacency zone, in rig.adjacency() order.
[[nodiscard]] std::vector<std::size_t> keypoints_per_zone(const std::vector<KeypointPair>& keypoints,
                                                          const CameraRig& rig);

/// The summed reprojection objective with unit rays cached per keypoint.
class ReprojectionObjective {
 public:
  ReprojectionObjective(const CameraRig& rig, const std::vector<KeypointPair>& keypoints,
                        const FixedHeights& heights);

  [[nodiscard]] double operator()(const Eigen::VectorXd& params) const;
  /// Per-keypoint errors; infeasible keypoints report kInfeasiblePenalty.
  [[nodiscard]] std::vector<double> per_keypoint(const Eigen::VectorXd& params) const;
  [[nodiscard]] std::size_t feasible_count(const Eigen::VectorXd& params) const;
  /// dJ/dparams. Each ground reprojection is smooth in its camera's six
  /// parameters and is differenced centrally with step
  /// relative_step * max(1, |param|); the norm is differentiated exactly
  /// (zero at a zero residual). Infeasible keypoints contribute nothing.
  [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& params, double relative_step) const;
  [[nodiscard]] std::size_t size() const noexcept { return observations_.size(); }

 private:
  struct Observation {
    std::size_t cam_i;
    std::size_t cam_j;
    Eigen::Vector3d ray_i;
    Eigen::Vector3d ray_j;
  };

  template <typename Fn>
  void for_each_error(const Eigen::VectorXd& params, Fn&& fn) const;

  std::vector<Observation> observations_;
  FixedHeights heights_;
};

/// J is unchanged when every camera undergoes the same planar rigid motion
/// (rotation about the vehicle Z axis plus an XY shift), so keypoints alone
/// never pin down the rig's absolute heading and XY position. This applies
/// the planar motion that best aligns the camera centers of `params` with
/// those of `reference` in the least-squares sense. Heights are untouched.
[[nodiscard]] Eigen::VectorXd align_planar_gauge(const Eigen::VectorXd& params, const Eigen::VectorXd& reference);
[[nodiscard]] CameraRig align_planar_gauge(const CameraRig& rig, const CameraRig& reference);

/// J(params): sum of reprojection errors over all keypoints of all frames.
[[nodiscard]] double objective(const Eigen::VectorXd& params, const CalibrationProblem& problem);

/// Minimize J over the 24 pose parameters with BFGS. Heights stay fixed. The
/// optimized rig is anchored to the initial rig with align_planar_gauge.
///
/// Throws Error(kInvalidArgument) for an invalid problem (e.g. an empty
/// adjacency zone), Error(kBadInitialization) when fewer than 80% of the
/// keypoints reach the ground under the initial rig, and
/// Error(kSolverFailure) on a non-finite objective.
[[nodiscard]] CalibrationResult calibrate(const CalibrationProblem& problem,
                                          const optim::IterationObserver& observer = {});

}  // namespace svcalib
