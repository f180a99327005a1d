#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svcalib/bev_renderer.hpp"
#include "svcalib/calibration.hpp"

namespace svcalib {

enum class DistanceBin { kNear = 0, kMid = 1, kFar = 2 };  // [0,5), [5,10), [10,inf) meters
inline constexpr std::size_t kNumDistanceBins = 3;

[[nodiscard]] std::string_view bin_label(DistanceBin bin) noexcept;
[[nodiscard]] DistanceBin distance_bin(double distance_m) noexcept;

struct MdeReport {
  /// Mean error per bin; nullopt when no keypoint fell in the bin.
  std::array<std::optional<double>, kNumDistanceBins> per_bin;
  std::array<std::size_t, kNumDistanceBins> bin_counts{};
  double total = 0.0;
  std::size_t n_keypoints = 0;
  std::vector<double> per_keypoint;
};

/// Mean distance error. Each keypoint is binned by the XY distance of the
/// midpoint of its two ground reprojections from the vehicle origin.
/// Throws Error(kNoGroundIntersection) if a keypoint is infeasible under rig
/// and Error(kUndefinedMetric) for an empty keypoint list.
[[nodiscard]] MdeReport mde(const std::vector<KeypointPair>& eval_keypoints, const CameraRig& rig);

/// Plain-text table with 0-5m / 5-10m / >10m / Total columns.
[[nodiscard]] std::string format_mde_table(const MdeReport& report, std::string_view row_label);

struct PhotometricError {
  double score = 0.0;          // RMS of grayscale differences
  std::size_t compared = 0;    // pixels valid in both layers
};

/// RMS intensity difference over pixels valid in both layers. Throws
/// Error(kContractViolation) on mismatched sizes and Error(kUndefinedMetric)
/// when the layers do not overlap.
[[nodiscard]] PhotometricError photometric_error(const BevLayer& a, const BevLayer& b);

}  // namespace svcalib
