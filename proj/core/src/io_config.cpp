#include "svcalib/io_config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <spdlog/spdlog.h>

#include "svcalib/error.hpp"

namespace svcalib::io {
namespace {

using nlohmann::json;

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string child(const std::string& path, std::size_t index) { return path + "/" + std::to_string(index); }

void check_fields(const json& obj, const std::string& path, std::initializer_list<const char*> allowed,
                  const ParseOptions& options) {
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; });
    if (known) continue;
    if (options.strict) throw ParseError(child(path, key), "unknown field");
    spdlog::warn("ignoring unknown field {}", child(path, key));
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(child(path, key), "missing required field");
  return *it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ParseError(path, "expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ParseError(path, "expected a string");
  return v.get<std::string>();
}

CameraId as_camera(const json& v, const std::string& path) {
  const std::string name = as_string(v, path);
  if (auto id = camera_id_from_string(name)) return *id;
  throw ParseError(path, "unknown camera id '" + name + "' (expected front, left, rear or right)");
}

template <std::size_t N>
std::array<double, N> as_array(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != N) throw ParseError(path, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = as_number(v[i], child(path, i));
  return out;
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("", std::string("invalid JSON: ") + e.what());
  }
}

void check_version(const json& doc, int supported) {
  const int version = as_int(require(doc, "", "version"), "/version");
  if (version != supported) {
    throw Error(ErrorCode::kVersion,
                "unsupported file version " + std::to_string(version) + " (expected " + std::to_string(supported) + ")");
  }
}

Camera parse_camera(const json& j, const std::string& path, const ParseOptions& options, std::optional<double>* height) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  check_fields(j, path, {"id", "intrinsics", "extrinsics", "fixed_height"}, options);
  const CameraId id = as_camera(require(j, path, "id"), child(path, "id"));

  const std::string ip = child(path, "intrinsics");
  const json& ij = require(j, path, "intrinsics");
  check_fields(ij, ip, {"a1", "a2", "a3", "a4", "u0", "v0", "width", "height", "theta_max"}, options);
  const auto num = [&](const char* key) { return as_number(require(ij, ip, key), child(ip, key)); };
  const double theta_max =
      ij.contains("theta_max") ? num("theta_max") : FisheyeIntrinsics::kDefaultThetaMax;
  std::optional<FisheyeIntrinsics> intr;
  try {
    intr.emplace(std::array<double, 4>{num("a1"), num("a2"), num("a3"), num("a4")}, num("u0"), num("v0"),
                 as_int(require(ij, ip, "width"), child(ip, "width")),
                 as_int(require(ij, ip, "height"), child(ip, "height")), theta_max);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(ip, e.what());
  }

  const std::string ep = child(path, "extrinsics");
  const json& ej = require(j, path, "extrinsics");
  check_fields(ej, ep, {"quaternion", "translation"}, options);
  const auto q = as_array<4>(require(ej, ep, "quaternion"), child(ep, "quaternion"));
  const auto t = as_array<3>(require(ej, ep, "translation"), child(ep, "translation"));
  Quaternion quat;
  try {
    quat = Quaternion(q[0], q[1], q[2], q[3]);
  } catch (const Error& e) {
    throw ParseError(child(ep, "quaternion"), e.what());
  }
  if (j.contains("fixed_height")) *height = as_number(j["fixed_height"], child(path, "fixed_height"));
  return {id, *intr, Extrinsics(quat, {t[0], t[1], t[2]})};
}

json pixel_json(const PixelPoint& p) { return json::array({p.u, p.v}); }

}  // namespace

std::vector<KeypointPair> KeypointFile::pairs() const {
  std::vector<KeypointPair> out;
  out.reserve(keypoints.size());
  for (const KeypointRecord& r : keypoints) out.push_back(r.pair);
  return out;
}

const FrameEntry* KeypointFile::frame(const std::string& frame_id) const {
  for (const FrameEntry& f : frames) {
    if (f.frame_id == frame_id) return &f;
  }
  return nullptr;
}

RigFile parse_rig(const std::string& json_text, const ParseOptions& options) {
  const json doc = parse_document(json_text);
  if (!doc.is_object()) throw ParseError("", "expected an object");
  check_version(doc, kRigFileVersion);
  check_fields(doc, "", {"version", "cameras", "adjacency"}, options);
  const json& cams = require(doc, "", "cameras");
  if (!cams.is_array()) throw ParseError("/cameras", "expected an array");
  std::vector<Camera> cameras;
  std::vector<std::optional<double>> heights;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    std::optional<double> h;
    cameras.push_back(parse_camera(cams[i], child("/cameras", i), options, &h));
    heights.push_back(h);
  }
  std::vector<CameraPair> adjacency = default_adjacency();
  if (doc.contains("adjacency")) {
    const json& adj = doc["adjacency"];
    if (!adj.is_array()) throw ParseError("/adjacency", "expected an array");
    adjacency.clear();
    for (std::size_t i = 0; i < adj.size(); ++i) {
      const std::string p = child("/adjacency", i);
      if (!adj[i].is_array() || adj[i].size() != 2) throw ParseError(p, "expected a pair of camera ids");
      adjacency.emplace_back(as_camera(adj[i][0], child(p, 0)), as_camera(adj[i][1], child(p, 1)));
    }
  }
  std::optional<CameraRig> rig;
  try {
    rig.emplace(cameras, adjacency);
  } catch (const Error& e) {
    throw ParseError("/cameras", e.what());
  }
  FixedHeights fixed = heights_of(*rig);
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    if (!heights[i]) continue;
    if (!(*heights[i] > 0.0)) throw ParseError(child(child("/cameras", i), "fixed_height"), "must be positive");
    fixed[index_of(cameras[i].id)] = *heights[i];
  }
  return {*rig, fixed};
}

std::string serialize_rig(const RigFile& rig) {
  json doc;
  doc["version"] = kRigFileVersion;
  json cams = json::array();
  for (const Camera& cam : rig.rig.cameras()) {
    const FisheyeIntrinsics& in = cam.intrinsics;
    const Quaternion& q = cam.extrinsics.rotation_quaternion();
    const Eigen::Vector3d& t = cam.extrinsics.translation();
    cams.push_back({{"id", std::string(to_string(cam.id))},
                    {"intrinsics",
                     {{"a1", in.a1()},
                      {"a2", in.a2()},
                      {"a3", in.a3()},
                      {"a4", in.a4()},
                      {"u0", in.u0()},
                      {"v0", in.v0()},
                      {"width", in.width()},
                      {"height", in.height()},
                      {"theta_max", in.theta_max()}}},
                    {"extrinsics",
                     {{"quaternion", {q.w(), q.x(), q.y(), q.z()}}, {"translation", {t.x(), t.y(), t.z()}}}},
                    {"fixed_height", rig.fixed_heights[index_of(cam.id)]}});
  }
  doc["cameras"] = cams;
  json adj = json::array();
  for (const auto& [a, b] : rig.rig.adjacency()) adj.push_back({std::string(to_string(a)), std::string(to_string(b))});
  doc["adjacency"] = adj;
  return doc.dump(2) + "\n";
}

RigFile load_rig(const std::filesystem::path& path, const ParseOptions& options) {
  return parse_rig(read_file(path), options);
}

void save_rig(const RigFile& rig, const std::filesystem::path& path) { write_file_atomic(path, serialize_rig(rig)); }

KeypointFile parse_keypoints(const std::string& json_text, const ParseOptions& options) {
  const json doc = parse_document(json_text);
  if (!doc.is_object()) throw ParseError("", "expected an object");
  check_version(doc, kKeypointFileVersion);
  check_fields(doc, "", {"version", "revision", "frames", "keypoints"}, options);
  KeypointFile file;
  if (doc.contains("revision")) {
    if (!doc["revision"].is_number_unsigned()) throw ParseError("/revision", "expected a non-negative integer");
    file.revision = doc["revision"].get<std::uint64_t>();
  }
  if (doc.contains("frames")) {
    const json& frames = doc["frames"];
    if (!frames.is_array()) throw ParseError("/frames", "expected an array");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const std::string p = child("/frames", i);
      if (!frames[i].is_object()) throw ParseError(p, "expected an object");
      check_fields(frames[i], p, {"frame_id", "images"}, options);
      FrameEntry entry;
      entry.frame_id = as_string(require(frames[i], p, "frame_id"), child(p, "frame_id"));
      if (file.frame(entry.frame_id)) throw ParseError(child(p, "frame_id"), "duplicate frame id");
      if (frames[i].contains("images")) {
        const json& imgs = frames[i]["images"];
        if (!imgs.is_object()) throw ParseError(child(p, "images"), "expected an object");
        for (const auto& [cam, img_path] : imgs.items()) {
          const std::string ip = child(child(p, "images"), cam);
          entry.images[as_camera(json(cam), ip)] = as_string(img_path, ip);
        }
      }
      file.frames.push_back(std::move(entry));
    }
  }
  const json& kps = require(doc, "", "keypoints");
  if (!kps.is_array()) throw ParseError("/keypoints", "expected an array");
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const std::string p = child("/keypoints", i);
    const json& k = kps[i];
    if (!k.is_object()) throw ParseError(p, "expected an object");
    check_fields(k, p, {"id", "frame_id", "cam_i", "cam_j", "pixel_i", "pixel_j", "color_tag"}, options);
    KeypointRecord rec;
    if (k.contains("id")) {
      if (!k["id"].is_number_integer()) throw ParseError(child(p, "id"), "expected an integer");
      rec.id = k["id"].get<std::int64_t>();
    }
    rec.pair.frame_id = as_string(require(k, p, "frame_id"), child(p, "frame_id"));
    rec.pair.cam_i = as_camera(require(k, p, "cam_i"), child(p, "cam_i"));
    rec.pair.cam_j = as_camera(require(k, p, "cam_j"), child(p, "cam_j"));
    const auto pi = as_array<2>(require(k, p, "pixel_i"), child(p, "pixel_i"));
    const auto pj = as_array<2>(require(k, p, "pixel_j"), child(p, "pixel_j"));
    rec.pair.pixel_i = {pi[0], pi[1]};
    rec.pair.pixel_j = {pj[0], pj[1]};
    if (k.contains("color_tag")) rec.color_tag = as_string(k["color_tag"], child(p, "color_tag"));
    file.keypoints.push_back(std::move(rec));
  }
  return file;
}

std::string serialize_keypoints(const KeypointFile& file) {
  json doc;
  doc["version"] = kKeypointFileVersion;
  doc["revision"] = file.revision;
  json frames = json::array();
  for (const FrameEntry& f : file.frames) {
    json imgs = json::object();
    for (const auto& [cam, p] : f.images) imgs[std::string(to_string(cam))] = p;
    frames.push_back({{"frame_id", f.frame_id}, {"images", imgs}});
  }
  doc["frames"] = frames;
  json kps = json::array();
  for (const KeypointRecord& r : file.keypoints) {
    json k = {{"frame_id", r.pair.frame_id},
              {"cam_i", std::string(to_string(r.pair.cam_i))},
              {"cam_j", std::string(to_string(r.pair.cam_j))},
              {"pixel_i", pixel_json(r.pair.pixel_i)},
              {"pixel_j", pixel_json(r.pair.pixel_j)},
              {"color_tag", r.color_tag}};
    if (r.id) k["id"] = *r.id;
    kps.push_back(std::move(k));
  }
  doc["keypoints"] = kps;
  return doc.dump(2) + "\n";
}

KeypointFile load_keypoints(const std::filesystem::path& path, const ParseOptions& options) {
  return parse_keypoints(read_file(path), options);
}

void save_keypoints(const KeypointFile& file, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_keypoints(file));
}

void validate_keypoints(const KeypointFile& file, const CameraRig& rig) {
  for (std::size_t i = 0; i < file.keypoints.size(); ++i) {
    const KeypointPair& kp = file.keypoints[i].pair;
    const std::string p = child("/keypoints", i);
    if (!file.frames.empty() && !file.frame(kp.frame_id)) {
      throw ParseError(child(p, "frame_id"), "unknown frame '" + kp.frame_id + "'");
    }
    try {
      validate_keypoint(kp, rig);
    } catch (const Error& e) {
      throw ParseError(p, e.what());
    }
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot replace " + path.string() + ": " + ec.message());
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kIo, "image not found: " + path.string());
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error(ErrorCode::kIo, "cannot decode image " + path.string());
  double scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw Error(ErrorCode::kIo, "unsupported bit depth in " + path.string());
  }
  const int src_channels = raw.channels();
  const int channels = src_channels >= 3 ? 3 : 1;
  cv::Mat f;
  raw.convertTo(f, CV_32F, scale);
  Image img(f.cols, f.rows, channels);
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < f.cols; ++x) {
      const float* px = row + static_cast<std::ptrdiff_t>(x) * src_channels;
      if (channels == 1) {
        img.at(x, y) = px[0];
      } else {
        img.at(x, y, 0) = px[2];  // BGR(A) -> RGB
        img.at(x, y, 1) = px[1];
        img.at(x, y, 2) = px[0];
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& img, const Mask* mask) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error(ErrorCode::kContractViolation, "PNG export needs 1 or 3 channels");
  }
  cv::Mat out(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      const bool valid = !mask || (*mask)[static_cast<std::size_t>(y) * img.width + x];
      for (int c = 0; c < img.channels; ++c) {
        const float v = valid ? std::clamp(img.at(x, y, c), 0.0f, 1.0f) : 0.0f;
        const int dst = img.channels == 3 ? 2 - c : c;  // RGB -> BGR
        row[x * img.channels + dst] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", out, buf)) throw Error(ErrorCode::kIo, "PNG encoding failed");
  return buf;
}

void save_png(const Image& img, const std::filesystem::path& path, const Mask* mask) {
  const std::vector<std::uint8_t> buf = encode_png(img, mask);
  write_file_atomic(path, std::string(buf.begin(), buf.end()));
}

void save_npy(const Image& img, const std::filesystem::path& path) {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(img.height) + ", " +
                       std::to_string(img.width) +
                       (img.channels > 1 ? ", " + std::to_string(img.channels) + "), }" : "), }");
  const std::size_t preamble = 10;  // magic(6) + version(2) + header length(2)
  const std::size_t total = ((preamble + header.size() + 1 + 63) / 64) * 64;
  header.append(total - preamble - header.size() - 1, ' ');
  header.push_back('\n');
  std::string out("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>(len >> 8));
  out += header;
  const std::size_t offset = out.size();
  out.resize(offset + img.data.size() * sizeof(float));
  std::memcpy(out.data() + offset, img.data.data(), img.data.size() * sizeof(float));  // little-endian host
  write_file_atomic(path, out);
}

std::map<CameraId, Image> load_frame_images(const FrameEntry& frame, const std::filesystem::path& base_dir) {
  std::map<CameraId, Image> images;
  for (const auto& [cam, rel] : frame.images) {
    const std::filesystem::path p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base_dir / rel;
    images.emplace(cam, load_image(p));
  }
  return images;
}

std::map<CameraId, Image> load_image_directory(const std::filesystem::path& dir) {
  std::map<CameraId, Image> images;
  for (CameraId id : kAllCameras) {
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
      const std::filesystem::path p = dir / (std::string(to_string(id)) + ext);
      if (std::filesystem::exists(p)) {
        images.emplace(id, load_image(p));
        break;
      }
    }
    if (!images.count(id)) {
      throw Error(ErrorCode::kIo, "no image for camera " + std::string(to_string(id)) + " in " + dir.string());
    }
  }
  return images;
}

std::string serialize_mde(const MdeReport& report) {
  json bins = json::object();
  for (std::size_t b = 0; b < kNumDistanceBins; ++b) {
    const auto& mean = report.per_bin[b];
    bins[std::string(bin_label(static_cast<DistanceBin>(b)))] = {
        {"mean", mean ? json(*mean) : json(nullptr)}, {"count", report.bin_counts[b]}};
  }
  return json{{"bins", bins}, {"total", report.total}, {"n_keypoints", report.n_keypoints}}.dump(2);
}

}  // namespace svcalib::io
