#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svcalib/calibration.hpp"
#include "svcalib/metrics.hpp"
#include "svcalib/raster.hpp"
#include "svcalib/rig_geometry.hpp"

namespace svcalib::io {

inline constexpr int kRigFileVersion = 1;
inline constexpr int kKeypointFileVersion = 1;

struct ParseOptions {
  /// Reject unknown fields instead of logging a warning.
  bool strict = false;
};

struct RigFile {
  CameraRig rig;
  FixedHeights fixed_heights;
};

struct FrameEntry {
  std::string frame_id;
  std::map<CameraId, std::string> images;  // paths, relative to the keypoint file
};

struct KeypointRecord {
  std::optional<std::int64_t> id;
  KeypointPair pair;
  std::string color_tag;
};

struct KeypointFile {
  std::vector<FrameEntry> frames;
  std::vector<KeypointRecord> keypoints;
  /// Mutation counter maintained by the annotation service; 0 otherwise.
  std::uint64_t revision = 0;

  [[nodiscard]] std::vector<KeypointPair> pairs() const;
  [[nodiscard]] const FrameEntry* frame(const std::string& frame_id) const;
};

// All loaders throw ParseError (with a JSON pointer) on schema violations,
// Error(kVersion) on an unknown version and Error(kIo) on missing files.

[[nodiscard]] RigFile parse_rig(const std::string& json_text, const ParseOptions& options = {});
[[nodiscard]] std::string serialize_rig(const RigFile& rig);
[[nodiscard]] RigFile load_rig(const std::filesystem::path& path, const ParseOptions& options = {});
void save_rig(const RigFile& rig, const std::filesystem::path& path);

[[nodiscard]] KeypointFile parse_keypoints(const std::string& json_text, const ParseOptions& options = {});
[[nodiscard]] std::string serialize_keypoints(const KeypointFile& file);
[[nodiscard]] KeypointFile load_keypoints(const std::filesystem::path& path, const ParseOptions& options = {});
void save_keypoints(const KeypointFile& file, const std::filesystem::path& path);

/// Frame references must exist (when frames are listed) and camera pairs must
/// be adjacent in the rig. Throws ParseError naming the offending keypoint.
void validate_keypoints(const KeypointFile& file, const CameraRig& rig);

/// {"bins": {"0-5m": {"mean": m|null, "count": n}, ...}, "total": t, "n_keypoints": n}
[[nodiscard]] std::string serialize_mde(const MdeReport& report);

/// Write to `<path>.tmp` then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
[[nodiscard]] std::string read_file(const std::filesystem::path& path);

/// 8/16-bit PNG or JPEG to [0,1] float; grayscale stays one channel, color
/// becomes RGB. Throws Error(kIo).
[[nodiscard]] Image load_image(const std::filesystem::path& path);
/// 8-bit PNG (values clamped to [0,1]); pixels with a zero mask entry are
/// written black when a mask is given.
void save_png(const Image& img, const std::filesystem::path& path, const Mask* mask = nullptr);
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Image& img, const Mask* mask = nullptr);
/// float32 .npy, shape (height, width) or (height, width, channels).
void save_npy(const Image& img, const std::filesystem::path& path);

/// Load one frame's images as listed in a keypoint file, resolving relative
/// paths against `base_dir`.
[[nodiscard]] std::map<CameraId, Image> load_frame_images(const FrameEntry& frame,
                                                          const std::filesystem::path& base_dir);
/// Load `<dir>/<camera>.png|jpg|jpeg` for all four cameras.
[[nodiscard]] std::map<CameraId, Image> load_image_directory(const std::filesystem::path& dir);

}  // namespace svcalib::io
