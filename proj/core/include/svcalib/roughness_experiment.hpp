#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svcalib/metrics.hpp"
#include "svcalib/synthetic.hpp"

namespace svcalib::synthetic {

struct RoughnessExperiment {
  SyntheticRigSpec rig;
  std::size_t n_per_zone = 10;
  double min_range = 2.0;
  double max_range = 20.0;
  std::size_t n_eval_per_zone = 5;
  double init_translation = 0.10;  // meters
  double init_rotation = 2.0;      // degrees
  std::uint64_t seed = 0;
  /// Noisy problems have nonsmooth optima that BFGS approaches slowly, hence
  /// the larger iteration budget.
  SolverConfig solver{.max_iterations = 2000};
};

struct RoughnessRow {
  std::string label;
  /// Pose difference from the calibration obtained on flat ground from the
  /// same initial rig; empty for the flat-ground row itself.
  std::optional<PoseErrorSummary> pose_delta;
  MdeReport mde;
  bool converged = false;
};

/// One trial: flat ground, slope noise and random noise share the rig, the
/// initial guess and the sampled ground points. Each row is evaluated on
/// held-out keypoints observed on its own ground profile.
[[nodiscard]] std::vector<RoughnessRow> run_roughness_trial(const RoughnessExperiment& exp, double delta_z);

/// Robustness table: Ground Type, dtx, dty, droll, dpitch, dyaw (max / mean)
/// and MDE.
[[nodiscard]] std::string format_roughness_table(const std::vector<RoughnessRow>& rows);

}  // namespace svcalib::synthetic
