#include "svcalib/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "svcalib/error.hpp"

namespace svcalib {

std::string_view bin_label(DistanceBin bin) noexcept {
  switch (bin) {
    case DistanceBin::kNear: return "0-5m";
    case DistanceBin::kMid: return "5-10m";
    case DistanceBin::kFar: return ">10m";
  }
  return "?";
}

DistanceBin distance_bin(double distance_m) noexcept {
  if (distance_m < 5.0) return DistanceBin::kNear;
  if (distance_m < 10.0) return DistanceBin::kMid;
  return DistanceBin::kFar;
}

MdeReport mde(const std::vector<KeypointPair>& eval_keypoints, const CameraRig& rig) {
  if (eval_keypoints.empty()) throw Error(ErrorCode::kUndefinedMetric, "MDE of an empty keypoint set");
  MdeReport report;
  std::array<double, kNumDistanceBins> sums{};
  double total = 0.0;
  for (const KeypointPair& kp : eval_keypoints) {
    const GroundPoint a = pixel_to_ground(kp.pixel_i, rig.camera(kp.cam_i)).point;
    const GroundPoint b = pixel_to_ground(kp.pixel_j, rig.camera(kp.cam_j)).point;
    const double error = std::hypot(a.x - b.x, a.y - b.y);
    const auto bin = static_cast<std::size_t>(distance_bin(std::hypot(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))));
    sums[bin] += error;
    ++report.bin_counts[bin];
    total += error;
    report.per_keypoint.push_back(error);
  }
  for (std::size_t b = 0; b < kNumDistanceBins; ++b) {
    if (report.bin_counts[b] > 0) report.per_bin[b] = sums[b] / static_cast<double>(report.bin_counts[b]);
  }
  report.n_keypoints = eval_keypoints.size();
  report.total = total / static_cast<double>(report.n_keypoints);
  return report;
}

std::string format_mde_table(const MdeReport& report, std::string_view row_label) {
  std::ostringstream os;
  const int label_width = std::max<int>(12, static_cast<int>(row_label.size()) + 2);
  os << std::left << std::setw(label_width) << "MDE (m)" << std::right;
  for (std::size_t b = 0; b < kNumDistanceBins; ++b) os << std::setw(10) << bin_label(static_cast<DistanceBin>(b));
  os << std::setw(10) << "Total" << "\n";
  os << std::left << std::setw(label_width) << row_label << std::right << std::fixed << std::setprecision(4);
  for (std::size_t b = 0; b < kNumDistanceBins; ++b) {
    if (report.per_bin[b]) {
      os << std::setw(10) << *report.per_bin[b];
    } else {
      os << std::setw(10) << "-";
    }
  }
  os << std::setw(10) << report.total << "\n";
  os << std::left << std::setw(label_width) << "keypoints" << std::right;
  for (std::size_t b = 0; b < kNumDistanceBins; ++b) os << std::setw(10) << report.bin_counts[b];
  os << std::setw(10) << report.n_keypoints << "\n";
  return os.str();
}

PhotometricError photometric_error(const BevLayer& a, const BevLayer& b) {
  if (a.raster.width != b.raster.width || a.raster.height != b.raster.height ||
      a.mask.size() != b.mask.size()) {
    throw Error(ErrorCode::kContractViolation, "photometric error needs layers of equal extent and resolution");
  }
  const Image ga = to_grayscale(a.raster);
  const Image gb = to_grayscale(b.raster);
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    if (!a.mask[i] || !b.mask[i]) continue;
    const double d = static_cast<double>(ga.data[i]) - static_cast<double>(gb.data[i]);
    sum_sq += d * d;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kUndefinedMetric, "layers share no valid pixels");
  return {std::sqrt(sum_sq / static_cast<double>(n)), n};
}

}  // namespace svcalib
