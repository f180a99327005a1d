#include "svcalib/roughness_experiment.hpp"

#include <iomanip>
#include <optional>
#include <sstream>

namespace svcalib::synthetic {
std::vector<RoughnessRow> run_roughness_trial(const RoughnessExperiment& exp, double delta_z) {
  const CameraRig gt = make_rig(exp.rig);
  const CameraRig init = perturb_rig(gt, exp.init_translation, exp.init_rotation, exp.seed * 7 + 1);
  const SyntheticKeypoints calib =
      generate_keypoints(gt, exp.n_per_zone, exp.min_range, exp.max_range, exp.seed * 7 + 2);
  const SyntheticKeypoints eval =
      generate_keypoints(gt, exp.n_eval_per_zone, exp.min_range, exp.max_range, exp.seed * 7 + 3, "eval");

  RoughnessSpec slope;
  slope.mode = RoughnessMode::kSlope;
  slope.delta_z = delta_z;
  slope.range = exp.max_range;
  slope.seed = exp.seed;
  RoughnessSpec random = slope;
  random.mode = RoughnessMode::kRandom;

  const auto solve = [&](const std::optional<RoughnessSpec>& ground) {
    const auto displaced = [&](const SyntheticKeypoints& base, std::uint64_t stream) {
      if (!ground) return base;
      RoughnessSpec spec = *ground;
      spec.seed = ground->seed * 2 + stream;
      return observe(gt, base, apply_height_noise(base.points, spec));
    };
    const SyntheticKeypoints observed_eval = displaced(eval, 1);
    const CalibrationResult result = calibrate({init, displaced(calib, 0).keypoints, heights_of(gt), exp.solver});
    return std::pair{result, mde(observed_eval.keypoints, result.rig_optimized)};
  };

  const auto [flat, flat_mde] = solve(std::nullopt);
  std::vector<RoughnessRow> rows;
  rows.push_back({"No noise", std::nullopt, flat_mde, flat.converged});
  for (const auto& [label, spec] : {std::pair{"Slope noise", slope}, std::pair{"Random noise", random}}) {
    const auto [result, report] = solve(spec);
    rows.push_back({label, pose_error(flat.rig_optimized, result.rig_optimized), report, result.converged});
  }
  return rows;
}

std::string format_roughness_table(const std::vector<RoughnessRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "Ground Type" << std::right;
  for (const char* h : {"dtx (max/mean)", "dty (max/mean)", "droll (max/mean)", "dpitch (max/mean)",
                        "dyaw (max/mean)"}) {
    os << std::setw(20) << h;
  }
  os << std::setw(10) << "MDE" << "\n";
  const auto cell = [](double max, double mean, const char* unit) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << max << unit << " / " << mean << unit;
    return c.str();
  };
  for (const RoughnessRow& row : rows) {
    os << std::left << std::setw(14) << row.label << std::right;
    if (row.pose_delta) {
      const PoseErrorSummary& e = *row.pose_delta;
      os << std::setw(20) << cell(e.tx.max, e.tx.mean, "m") << std::setw(20) << cell(e.ty.max, e.ty.mean, "m")
         << std::setw(22) << cell(e.roll.max, e.roll.mean, "°") << std::setw(22)
         << cell(e.pitch.max, e.pitch.mean, "°") << std::setw(22) << cell(e.yaw.max, e.yaw.mean, "°");
    } else {
      for (int i = 0; i < 5; ++i) os << std::setw(20) << "-";
    }
    std::ostringstream m;
    m << std::fixed << std::setprecision(4) << row.mde.total << "m";
    os << std::setw(10) << m.str() << "\n";
  }
  return os.str();
}

}  // namespace svcalib::synthetic
