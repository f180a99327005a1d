#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>
#include <spdlog/sinks/ringbuffer_sink.h>
#include <spdlog/spdlog.h>

#include "svcalib/calibration.hpp"
#include "svcalib/error.hpp"
#include "svcalib/metrics.hpp"
#include "svcalib/synthetic.hpp"
#include "test_support.hpp"

using namespace svcalib;

namespace {

struct Fixture {
  CameraRig gt = synthetic::make_rig({});
  synthetic::SyntheticKeypoints kp = synthetic::generate_keypoints(gt, 10, 2.0, 15.0, 42);
};

CameraRig scaled_rig(const CameraRig& rig, double s) {
  CameraRig out = rig;
  for (const Camera& cam : rig.cameras()) {
    out.set_extrinsics(cam.id, Extrinsics::from_center(cam.extrinsics.rotation_quaternion(),
                                                       s * cam.extrinsics.camera_center()));
  }
  return out;
}

}  // namespace

TEST(ReprojectionError, ZeroUnderGroundTruth) {
  Fixture fx;
  for (const KeypointPair& k : fx.kp.keypoints) EXPECT_LT(reprojection_error(k, fx.gt), 1e-9);
}

TEST(ReprojectionError, ShiftedNadirCameraMatchesHandOracle) {
  // Two downward-looking cameras; moving one by +0.5 m in X moves every ground
  // reprojection of that camera by the same amount.
  const FisheyeIntrinsics intr({300.0, 0.0, 0.0, 0.0}, 319.5, 239.5, 640, 480);
  const Quaternion down = Quaternion::from_rotation_matrix((Eigen::Matrix3d() << 1, 0, 0, 0, -1, 0, 0, 0, -1).finished());
  std::vector<Camera> cams;
  const std::array<Eigen::Vector3d, 4> centers = {Eigen::Vector3d(1, 0, 1), Eigen::Vector3d(0, 1, 1),
                                                  Eigen::Vector3d(-1, 0, 1), Eigen::Vector3d(0, -1, 1)};
  for (CameraId id : kAllCameras) cams.push_back({id, intr, Extrinsics::from_center(down, centers[index_of(id)])});
  CameraRig rig(cams);
  const Eigen::Vector3d g(0.5, 0.5, 0.0);
  const KeypointPair kp{"0", CameraId::kFront, CameraId::kLeft,
                        ground_to_pixel({g.x(), g.y()}, rig.camera(CameraId::kFront)),
                        ground_to_pixel({g.x(), g.y()}, rig.camera(CameraId::kLeft))};
  EXPECT_LT(reprojection_error(kp, rig), 1e-12);
  rig.set_extrinsics(CameraId::kLeft, Extrinsics::from_center(down, centers[1] + Eigen::Vector3d(0.5, 0, 0)));
  const double oracle = (svtest::hand_ground_point(kp.pixel_i, rig.camera(CameraId::kFront)) -
                         svtest::hand_ground_point(kp.pixel_j, rig.camera(CameraId::kLeft)))
                            .norm();
  EXPECT_NEAR(oracle, 0.5, 1e-6);
  EXPECT_NEAR(reprojection_error(kp, rig), oracle, 1e-9);
}

TEST(ReprojectionError, ScalesWithWorld) {
  Fixture fx;
  const CameraRig perturbed = synthetic::perturb_rig(fx.gt, 0.1, 2.0, 3);
  const CameraRig gt2 = scaled_rig(fx.gt, 2.0);
  const CameraRig perturbed2 = scaled_rig(perturbed, 2.0);
  std::vector<Eigen::Vector3d> points2;
  for (const Eigen::Vector3d& p : fx.kp.points) points2.push_back(2.0 * p);
  const synthetic::SyntheticKeypoints kp2 = synthetic::observe(gt2, fx.kp, points2);
  ASSERT_EQ(kp2.keypoints.size(), fx.kp.keypoints.size());
  for (std::size_t k = 0; k < kp2.keypoints.size(); ++k) {
    const double e1 = reprojection_error(fx.kp.keypoints[k], perturbed);
    const double e2 = reprojection_error(kp2.keypoints[k], perturbed2);
    EXPECT_NEAR(e2, 2.0 * e1, 1e-9 * std::max(1.0, e1));
  }
}

TEST(Params, RoundTripAndLayout) {
  Fixture fx;
  const Eigen::VectorXd x = encode_params(fx.gt);
  ASSERT_EQ(x.size(), 24);
  const CameraRig back = decode_params(x, heights_of(fx.gt), fx.gt);
  for (CameraId id : kAllCameras) {
    const Extrinsics& a = fx.gt.camera(id).extrinsics;
    const Extrinsics& b = back.camera(id).extrinsics;
    EXPECT_LT((a.camera_center() - b.camera_center()).norm(), 1e-12);
    EXPECT_LT((a.rotation() - b.rotation()).cwiseAbs().maxCoeff(), 1e-12);
  }

  std::vector<Camera> cams;
  for (CameraId id : kAllCameras) {
    cams.push_back({id, synthetic::default_intrinsics(),
                    Extrinsics::from_center(Quaternion(), {1.0 + index_of(id), -2.0, 0.5})});
  }
  const Eigen::VectorXd canon = encode_params(CameraRig(cams));
  for (std::size_t i = 0; i < 4; ++i) {
    Eigen::VectorXd expected(6);
    expected << 1.0 + i, -2.0, 1, 0, 0, 0;
    EXPECT_EQ(canon.segment<6>(6 * i), expected);
  }
  EXPECT_THROW((void)decode_poses(Eigen::VectorXd::Zero(23), heights_of(fx.gt)), Error);
}

TEST(Objective, Examples) {
  Fixture fx;
  const CalibrationProblem problem{fx.gt, fx.kp.keypoints, heights_of(fx.gt), {}};
  EXPECT_LT(objective(encode_params(fx.gt), problem), 1e-6);

  const CalibrationProblem single{fx.gt, {fx.kp.keypoints.front()}, heights_of(fx.gt), {}};
  EXPECT_LT(objective(encode_params(fx.gt), single), 1e-9);

  const CameraRig perturbed = synthetic::perturb_rig(fx.gt, 0.1, 2.0, 8);
  double sum = 0.0;
  for (const KeypointPair& k : fx.kp.keypoints) sum += reprojection_error(k, perturbed);
  EXPECT_NEAR(objective(encode_params(perturbed), problem), sum, 1e-12 * std::max(1.0, sum));
  EXPECT_THROW((void)objective(Eigen::VectorXd::Zero(5), problem), Error);
}

TEST(Objective, InfeasibleKeypointsPayPenalty) {
  Fixture fx;
  const CalibrationProblem problem{fx.gt, fx.kp.keypoints, heights_of(fx.gt), {}};
  Eigen::VectorXd x = encode_params(fx.gt);
  x.segment<4>(2) << 0, 0, 0, 0;  // degenerate front quaternion
  EXPECT_DOUBLE_EQ(objective(x, problem), kInfeasiblePenalty * fx.kp.keypoints.size());
}

TEST(Objective, GradientConsistentAcrossSteps) {
  Fixture fx;
  const ReprojectionObjective j(fx.gt, fx.kp.keypoints, heights_of(fx.gt));
  const optim::ObjectiveFn f = [&](const Eigen::VectorXd& x) { return j(x); };
  for (int s = 0; s < 10; ++s) {
    const Eigen::VectorXd x = encode_params(synthetic::perturb_rig(fx.gt, 0.1, 2.0, 100 + s));
    ASSERT_EQ(j.feasible_count(x), j.size());
    const Eigen::VectorXd g5 = optim::central_difference_gradient(f, x, 1e-5);
    const Eigen::VectorXd g7 = optim::central_difference_gradient(f, x, 1e-7);
    const Eigen::VectorXd chain = j.gradient(x, 1e-6);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (std::abs(g5[i]) <= 1e-8) continue;
      EXPECT_LT(std::abs(g5[i] - g7[i]) / std::abs(g5[i]), 1e-3) << "seed " << s << " param " << i;
      EXPECT_LT(std::abs(chain[i] - g5[i]) / std::abs(g5[i]), 1e-3) << "seed " << s << " param " << i;
    }
  }
}

TEST(PlanarGauge, LeavesObjectiveUnchanged) {
  Fixture fx;
  const ReprojectionObjective j(fx.gt, fx.kp.keypoints, heights_of(fx.gt));
  const Eigen::VectorXd x = encode_params(synthetic::perturb_rig(fx.gt, 0.1, 2.0, 5));
  const Eigen::VectorXd ref = encode_params(synthetic::perturb_rig(fx.gt, 0.5, 10.0, 6));
  const Eigen::VectorXd aligned = align_planar_gauge(x, ref);
  EXPECT_NEAR(j(aligned), j(x), 1e-12 * j(x));
  EXPECT_GT((aligned - x).norm(), 1e-3);
  // Aligning the ground truth to a rigidly moved copy of itself recovers the copy.
  CameraRig moved = fx.gt;
  const double psi = 0.3;
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(psi, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  for (const Camera& cam : fx.gt.cameras()) {
    const Eigen::Matrix3d r = cam.extrinsics.rotation() * rz.transpose();
    moved.set_extrinsics(cam.id, Extrinsics::from_center(Quaternion::from_rotation_matrix(r),
                                                         rz * cam.extrinsics.camera_center() + Eigen::Vector3d(1, -2, 0)));
  }
  const synthetic::PoseErrorSummary e = synthetic::pose_error(moved, align_planar_gauge(fx.gt, moved));
  EXPECT_LT(std::max(e.tx.max, e.ty.max), 1e-12);
  EXPECT_LT(std::max({e.roll.max, e.pitch.max, e.yaw.max}), 1e-10);
}

TEST(Calibrate, RecoversGroundTruthUpToPlanarGauge) {
  Fixture fx;
  const synthetic::SyntheticKeypoints eval = synthetic::generate_keypoints(fx.gt, 10, 2.0, 15.0, 43);
  const CameraRig init = synthetic::perturb_rig(fx.gt, 0.10, 2.0, 44);
  const CalibrationProblem problem{init, fx.kp.keypoints, heights_of(fx.gt), {}};
  const CalibrationResult r = calibrate(problem);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.objective_final, 1e-4);
  EXPECT_LE(r.objective_final, r.objective_initial);
  const synthetic::PoseErrorSummary e = synthetic::pose_error(fx.gt, align_planar_gauge(r.rig_optimized, fx.gt));
  EXPECT_LT(std::max(e.tx.max, e.ty.max), 1e-3);
  EXPECT_LT(std::max({e.roll.max, e.pitch.max, e.yaw.max}), 0.01);
  EXPECT_LT(mde(eval.keypoints, r.rig_optimized).total, 1e-3);
}

TEST(Calibrate, ResultInvariants) {
  Fixture fx;
  const CameraRig init = synthetic::perturb_rig(fx.gt, 0.10, 2.0, 45);
  const FixedHeights h = heights_of(fx.gt);
  const CalibrationResult r = calibrate({init, fx.kp.keypoints, h, {}});
  double sum = 0.0;
  for (double e : r.per_keypoint_errors) {
    EXPECT_GE(e, 0.0);
    sum += e;
  }
  EXPECT_NEAR(r.objective_final, sum, 1e-9);
  for (CameraId id : kAllCameras) {
    EXPECT_EQ(r.camera_centers[index_of(id)].z(), h[index_of(id)]);
    EXPECT_NEAR(r.rig_optimized.camera(id).extrinsics.camera_center().z(), h[index_of(id)], 1e-12);
  }
}

TEST(Calibrate, AlreadyOptimalStart) {
  Fixture fx;
  const CalibrationResult r = calibrate({fx.gt, fx.kp.keypoints, heights_of(fx.gt), {}});
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_LT(r.objective_initial, 1e-9);
  EXPECT_LE(r.objective_final, r.objective_initial);
}

TEST(Calibrate, Deterministic) {
  Fixture fx;
  const CameraRig init = synthetic::perturb_rig(fx.gt, 0.10, 2.0, 46);
  const CalibrationProblem problem{init, fx.kp.keypoints, heights_of(fx.gt), {}};
  std::vector<Eigen::VectorXd> a;
  std::vector<Eigen::VectorXd> b;
  (void)calibrate(problem, [&](int, const Eigen::VectorXd& x, double) { a.push_back(x); });
  (void)calibrate(problem, [&](int, const Eigen::VectorXd& x, double) { b.push_back(x); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i] == b[i]) << "iterate " << i;
}

TEST(Calibrate, PixelNoiseKeepsNearRangeAccurate) {
  Fixture fx;
  const synthetic::SyntheticKeypoints eval = synthetic::generate_keypoints(fx.gt, 20, 2.0, 15.0, 47);
  const CameraRig init = synthetic::perturb_rig(fx.gt, 0.10, 2.0, 48);
  const std::vector<KeypointPair> noisy = synthetic::add_pixel_noise(fx.gt, fx.kp.keypoints, 0.5, 49);
  const CalibrationResult r = calibrate({init, noisy, heights_of(fx.gt), {}});
  EXPECT_GT(r.objective_final, 0.0);
  const MdeReport report = mde(eval.keypoints, r.rig_optimized);
  ASSERT_TRUE(report.per_bin[0].has_value());
  EXPECT_LT(*report.per_bin[0], 0.05);
}

TEST(Calibrate, BadInitialization) {
  Fixture fx;
  CameraRig init = fx.gt;
  // Tip every camera up by 100 degrees about its own x axis: almost every ray
  // now leaves the ground.
  for (const Camera& cam : fx.gt.cameras()) {
    const Eigen::Matrix3d tilt = Eigen::AngleAxisd(100.0 * M_PI / 180.0, Eigen::Vector3d::UnitX()).toRotationMatrix();
    init.set_extrinsics(cam.id, Extrinsics::from_center(Quaternion::from_rotation_matrix(tilt * cam.extrinsics.rotation()),
                                                        cam.extrinsics.camera_center()));
  }
  try {
    (void)calibrate({init, fx.kp.keypoints, heights_of(fx.gt), {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadInitialization);
  }
}

TEST(Calibrate, InvalidProblems) {
  Fixture fx;
  std::vector<KeypointPair> no_rear_right;
  for (const KeypointPair& k : fx.kp.keypoints) {
    if (!(k.cam_i == CameraId::kRear && k.cam_j == CameraId::kRight)) no_rear_right.push_back(k);
  }
  const auto code_of = [&](const CalibrationProblem& p) {
    try {
      (void)calibrate(p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInput;
  };
  EXPECT_EQ(code_of({fx.gt, no_rear_right, heights_of(fx.gt), {}}), ErrorCode::kInvalidArgument);
  FixedHeights bad = heights_of(fx.gt);
  bad[2] = 0.0;
  EXPECT_EQ(code_of({fx.gt, fx.kp.keypoints, bad, {}}), ErrorCode::kInvalidArgument);
  std::vector<KeypointPair> non_adjacent = fx.kp.keypoints;
  non_adjacent[0].cam_j = non_adjacent[0].cam_i == CameraId::kFront ? CameraId::kRear : CameraId::kFront;
  EXPECT_EQ(code_of({fx.gt, non_adjacent, heights_of(fx.gt), {}}), ErrorCode::kInvalidArgument);
  std::vector<KeypointPair> outside = fx.kp.keypoints;
  outside[0].pixel_i.u = -3.0;
  EXPECT_EQ(code_of({fx.gt, outside, heights_of(fx.gt), {}}), ErrorCode::kInvalidArgument);
}

TEST(Calibrate, WarnsOnSparseZone) {
  Fixture fx;
  const synthetic::SyntheticKeypoints few = synthetic::generate_keypoints(fx.gt, 3, 2.0, 15.0, 50);
  auto sink = std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(64);
  auto logger = std::make_shared<spdlog::logger>("capture", sink);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  (void)calibrate({fx.gt, few.keypoints, heights_of(fx.gt), {}});
  spdlog::set_default_logger(previous);
  int warnings = 0;
  for (const std::string& line : sink->last_formatted()) {
    if (line.find("has only 3 keypoints") != std::string::npos) ++warnings;
  }
  EXPECT_EQ(warnings, 4);
}
