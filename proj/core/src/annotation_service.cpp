#include "svcalib/annotation_service.hpp"

#include <atomic>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <sstream>

// Eigen must come before httplib: <resolv.h> defines _res as a macro.
#include "svcalib/bev_renderer.hpp"
#include "svcalib/calibration.hpp"
#include "svcalib/error.hpp"
#include "svcalib/io_config.hpp"
#include "svcalib/metrics.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace svcalib::service {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct HttpError {
  int status;
  std::string message;
};

[[noreturn]] void fail(int status, std::string message) { throw HttpError{status, std::move(message)}; }

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kVersion:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kContractViolation:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kDomain: return 400;
    case ErrorCode::kIo:
    case ErrorCode::kInput: return 404;
    case ErrorCode::kBadInitialization:
    case ErrorCode::kNoGroundIntersection:
    case ErrorCode::kOutOfFov:
    case ErrorCode::kUndefinedMetric:
    case ErrorCode::kGeometry: return 422;
    case ErrorCode::kNumeric:
    case ErrorCode::kSolverFailure: return 500;
  }
  return 500;
}

HttpResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

std::string query_or(const HttpRequest& req, const std::string& key, const std::string& fallback) {
  auto it = req.query.find(key);
  return it == req.query.end() ? fallback : it->second;
}

double query_number(const HttpRequest& req, const std::string& key, double fallback) {
  auto it = req.query.find(key);
  if (it == req.query.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail(400, "query parameter '" + key + "' must be a number");
  }
}

json parse_body(const HttpRequest& req) {
  if (req.body.empty()) return json::object();
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) fail(400, "request body must be a JSON object");
    return body;
  } catch (const json::parse_error& e) {
    fail(400, std::string("invalid JSON body: ") + e.what());
  }
}

std::string zone_label(const CameraPair& p) {
  return std::string(to_string(p.first)) + "-" + std::string(to_string(p.second));
}

json keypoint_json(const io::KeypointRecord& r) {
  return {{"id", r.id.value_or(-1)},
          {"frame_id", r.pair.frame_id},
          {"cam_i", std::string(to_string(r.pair.cam_i))},
          {"cam_j", std::string(to_string(r.pair.cam_j))},
          {"pixel_i", {r.pair.pixel_i.u, r.pair.pixel_i.v}},
          {"pixel_j", {r.pair.pixel_j.u, r.pair.pixel_j.v}},
          {"color_tag", r.color_tag}};
}

std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

}  // namespace

struct AnnotationService::Impl {
  fs::path dir;
  std::string session_id;
  io::RigFile rig;
  io::KeypointFile keypoints;
  std::optional<io::RigFile> optimized;
  std::optional<json> last_result;
  std::optional<std::vector<KeypointPair>> heldout;
  std::int64_t next_id = 1;

  mutable std::shared_mutex mutex;
  std::atomic<bool> solving{false};
  httplib::Server server;

  static const fs::path& existing_dir(const fs::path& p) {
    if (!fs::is_directory(p)) throw Error(ErrorCode::kIo, "session directory not found: " + p.string());
    return p;
  }

  explicit Impl(const fs::path& session_dir)
      : dir(existing_dir(session_dir)), rig(io::load_rig(dir / "rig.json")) {
    session_id = fs::weakly_canonical(dir).filename().string();
    if (fs::exists(dir / "keypoints.json")) {
      keypoints = io::load_keypoints(dir / "keypoints.json");
    } else {
      keypoints.frames = scan_frames();
      io::save_keypoints(keypoints, dir / "keypoints.json");
    }
    io::validate_keypoints(keypoints, rig.rig);
    for (io::KeypointRecord& r : keypoints.keypoints) {
      if (r.id) next_id = std::max(next_id, *r.id + 1);
    }
    for (io::KeypointRecord& r : keypoints.keypoints) {
      if (!r.id) r.id = next_id++;
    }
    if (fs::exists(dir / "rig_optimized.json")) optimized = io::load_rig(dir / "rig_optimized.json");
    if (fs::exists(dir / "eval_keypoints.json")) heldout = io::load_keypoints(dir / "eval_keypoints.json").pairs();
    spdlog::info("session {}: {} frames, {} keypoints, revision {}", session_id, keypoints.frames.size(),
                 keypoints.keypoints.size(), keypoints.revision);
  }

  std::vector<io::FrameEntry> scan_frames() const {
    std::vector<io::FrameEntry> frames;
    const fs::path root = dir / "frames";
    if (!fs::is_directory(root)) return frames;
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) subdirs.push_back(entry.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const fs::path& sub : subdirs) {
      io::FrameEntry frame{sub.filename().string(), {}};
      for (CameraId id : kAllCameras) {
        for (const char* ext : {".png", ".jpg", ".jpeg"}) {
          const fs::path p = sub / (std::string(to_string(id)) + ext);
          if (fs::exists(p)) {
            frame.images[id] = fs::relative(p, dir).generic_string();
            break;
          }
        }
      }
      frames.push_back(std::move(frame));
    }
    return frames;
  }

  void check_revision(const HttpRequest& req, const json& body) const {
    std::optional<std::uint64_t> expected;
    if (auto it = req.headers.find("If-Match"); it != req.headers.end()) {
      std::string v = it->second;
      v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
      try {
        expected = std::stoull(v);
      } catch (const std::exception&) {
        fail(400, "If-Match must carry a revision number");
      }
    }
    if (body.contains("expected_revision")) {
      if (!body["expected_revision"].is_number_unsigned()) fail(400, "expected_revision must be a non-negative integer");
      expected = body["expected_revision"].get<std::uint64_t>();
    }
    if (expected && *expected != keypoints.revision) {
      fail(409, "stale revision " + std::to_string(*expected) + ", current is " + std::to_string(keypoints.revision));
    }
  }

  // Caller holds the unique lock.
  void persist() {
    ++keypoints.revision;
    io::save_keypoints(keypoints, dir / "keypoints.json");
  }

  HttpResponse get_session() const {
    std::shared_lock lock(mutex);
    json cams = json::array();
    for (const Camera& c : rig.rig.cameras()) {
      cams.push_back({{"id", std::string(to_string(c.id))},
                      {"width", c.intrinsics.width()},
                      {"height", c.intrinsics.height()}});
    }
    json adjacency = json::array();
    json counts = json::object();
    const std::vector<std::size_t> n = keypoints_per_zone(keypoints.pairs(), rig.rig);
    for (std::size_t z = 0; z < rig.rig.adjacency().size(); ++z) {
      const auto& [a, b] = rig.rig.adjacency()[z];
      adjacency.push_back({std::string(to_string(a)), std::string(to_string(b))});
      counts[zone_label(rig.rig.adjacency()[z])] = n[z];
    }
    json frames = json::array();
    for (const io::FrameEntry& f : keypoints.frames) {
      json fc = json::array();
      for (const auto& [cam, p] : f.images) fc.push_back(std::string(to_string(cam)));
      frames.push_back({{"frame_id", f.frame_id}, {"cameras", fc}});
    }
    return json_response(200, {{"session_id", session_id},
                               {"revision", keypoints.revision},
                               {"cameras", cams},
                               {"adjacency", adjacency},
                               {"frames", frames},
                               {"keypoint_counts", counts},
                               {"has_optimized", optimized.has_value()},
                               {"has_heldout", heldout.has_value()}});
  }

  HttpResponse get_image(const std::string& frame_id, const std::string& cam_name) const {
    std::shared_lock lock(mutex);
    const io::FrameEntry* frame = keypoints.frame(frame_id);
    if (!frame) fail(404, "unknown frame '" + frame_id + "'");
    const auto cam = camera_id_from_string(cam_name);
    if (!cam) fail(404, "unknown camera '" + cam_name + "'");
    auto it = frame->images.find(*cam);
    if (it == frame->images.end()) fail(404, "frame '" + frame_id + "' has no image for " + cam_name);
    const fs::path p = fs::path(it->second).is_absolute() ? fs::path(it->second) : dir / it->second;
    return {200, content_type_for(p), io::read_file(p)};
  }

  HttpResponse list_keypoints() const {
    std::shared_lock lock(mutex);
    json list = json::array();
    for (const io::KeypointRecord& r : keypoints.keypoints) list.push_back(keypoint_json(r));
    return json_response(200, {{"revision", keypoints.revision}, {"keypoints", list}});
  }

  HttpResponse add_keypoint(const HttpRequest& req) {
    const json body = parse_body(req);
    io::KeypointRecord rec;
    try {
      json doc = {{"version", io::kKeypointFileVersion}, {"keypoints", json::array({body})}};
      doc["keypoints"][0].erase("expected_revision");
      doc["keypoints"][0].erase("id");
      rec = io::parse_keypoints(doc.dump(), {.strict = true}).keypoints.at(0);
    } catch (const ParseError& e) {
      std::string path = e.path();
      const std::string prefix = "/keypoints/0";
      if (path.rfind(prefix, 0) == 0) path = path.substr(prefix.size());
      fail(400, "invalid keypoint" + (path.empty() ? std::string() : " at " + path) + ": " +
                    std::string(e.what()).substr(e.path().size() + 2));
    }
    std::unique_lock lock(mutex);
    check_revision(req, body);
    if (!keypoints.frames.empty() && !keypoints.frame(rec.pair.frame_id)) {
      fail(400, "unknown frame '" + rec.pair.frame_id + "'");
    }
    validate_keypoint(rec.pair, rig.rig);
    if (rec.color_tag.empty()) {
      if (auto z = rig.rig.zone_index(rec.pair.cam_i, rec.pair.cam_j)) rec.color_tag = zone_label(rig.rig.adjacency()[*z]);
    }
    rec.id = next_id++;
    keypoints.keypoints.push_back(rec);
    persist();
    return json_response(201, {{"revision", keypoints.revision}, {"keypoint", keypoint_json(rec)}});
  }

  HttpResponse delete_keypoint(const HttpRequest& req, const std::string& id_text) {
    std::int64_t id = 0;
    try {
      std::size_t used = 0;
      id = std::stoll(id_text, &used);
      if (used != id_text.size()) throw std::invalid_argument(id_text);
    } catch (const std::exception&) {
      fail(400, "keypoint id must be an integer");
    }
    const json body = parse_body(req);
    std::unique_lock lock(mutex);
    check_revision(req, body);
    auto& list = keypoints.keypoints;
    auto it = std::find_if(list.begin(), list.end(), [&](const io::KeypointRecord& r) { return r.id == id; });
    if (it == list.end()) fail(404, "unknown keypoint id " + std::to_string(id));
    list.erase(it);
    persist();
    return json_response(200, {{"revision", keypoints.revision}, {"deleted", id}});
  }

  HttpResponse calibrate(const HttpRequest& req) {
    const json body = parse_body(req);
    if (solving.exchange(true)) fail(409, "a calibration is already running for this session");
    struct Reset {
      std::atomic<bool>& flag;
      ~Reset() { flag = false; }
    } reset{solving};

    CalibrationProblem problem{rig.rig, {}, {}, {}};
    std::vector<std::int64_t> ids;
    {
      std::shared_lock lock(mutex);
      check_revision(req, body);
      problem.rig_initial = rig.rig;
      problem.fixed_heights = rig.fixed_heights;
      for (const io::KeypointRecord& r : keypoints.keypoints) {
        problem.keypoints.push_back(r.pair);
        ids.push_back(r.id.value_or(-1));
      }
    }
    const auto override_number = [&](const char* key, auto& field) {
      if (!body.contains(key)) return;
      if (!body[key].is_number()) fail(400, std::string(key) + " must be a number");
      field = body[key].get<std::remove_reference_t<decltype(field)>>();
    };
    override_number("max_iterations", problem.solver.max_iterations);
    override_number("gradient_tolerance", problem.solver.gradient_tolerance);
    override_number("finite_diff_step", problem.solver.finite_diff_step);
    for (std::size_t n : keypoints_per_zone(problem.keypoints, problem.rig_initial)) {
      if (n == 0) fail(422, "every overlap zone needs at least one keypoint");
    }

    CalibrationResult result = [&] {
      try {
        return svcalib::calibrate(problem);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kInvalidArgument) fail(422, e.what());
        throw;
      }
    }();

    json errors = json::array();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      errors.push_back({{"id", ids[k]}, {"error", result.per_keypoint_errors[k]}});
    }
    io::RigFile out{result.rig_optimized, rig.fixed_heights};
    json summary = {{"objective_initial", result.objective_initial},
                    {"objective_final", result.objective_final},
                    {"iterations", result.iterations},
                    {"converged", result.converged},
                    {"termination", std::string(optim::to_string(result.termination))},
                    {"n_keypoints", ids.size()},
                    {"per_keypoint_errors", errors},
                    {"rig", json::parse(io::serialize_rig(out))}};
    std::unique_lock lock(mutex);
    io::save_rig(out, dir / "rig_optimized.json");
    // Keep the rig as it reads back from disk so that later reports agree
    // exactly with anyone loading rig_optimized.json.
    optimized = io::parse_rig(io::serialize_rig(out));
    last_result = summary;
    persist();
    summary["revision"] = keypoints.revision;
    return json_response(200, summary);
  }

  const io::RigFile& select_rig(const HttpRequest& req) const {
    const std::string which = query_or(req, "rig", "initial");
    if (which == "initial") return rig;
    if (which == "optimized") {
      if (!optimized) fail(404, "no optimized rig yet; run /api/calibrate first");
      return *optimized;
    }
    fail(400, "rig must be 'initial' or 'optimized'");
  }

  HttpResponse bev(const HttpRequest& req) const {
    std::shared_lock lock(mutex);
    const io::RigFile& r = select_rig(req);
    BevConfig cfg;
    cfg.extent = query_number(req, "extent", cfg.extent);
    cfg.resolution = query_number(req, "ppm", cfg.resolution);
    if (!(cfg.extent > 0.0) || !(cfg.resolution > 0.0) || cfg.extent * cfg.resolution > 4000.0) {
      fail(400, "extent and ppm must be positive and extent*ppm <= 4000");
    }
    if (keypoints.frames.empty()) fail(404, "session has no frames");
    const std::string frame_id = query_or(req, "frame", keypoints.frames.front().frame_id);
    const io::FrameEntry* frame = keypoints.frame(frame_id);
    if (!frame) fail(404, "unknown frame '" + frame_id + "'");
    const BevImage img = render_bev(io::load_frame_images(*frame, dir), r.rig, cfg);
    const std::vector<std::uint8_t> png = io::encode_png(img.composite, &img.composite_mask);
    return {200, "image/png", std::string(png.begin(), png.end())};
  }

  HttpResponse mde_report(const HttpRequest& req) const {
    std::shared_lock lock(mutex);
    const io::RigFile& r = select_rig(req);
    const std::string set = query_or(req, "set", "all");
    std::vector<KeypointPair> pairs;
    if (set == "all") {
      pairs = keypoints.pairs();
    } else if (set == "heldout") {
      if (!heldout) fail(404, "session has no eval_keypoints.json");
      pairs = *heldout;
    } else {
      fail(400, "set must be 'all' or 'heldout'");
    }
    if (pairs.empty()) fail(422, "no keypoints to evaluate");
    json body = json::parse(io::serialize_mde(mde(pairs, r.rig)));
    body["revision"] = keypoints.revision;
    body["rig"] = query_or(req, "rig", "initial");
    body["set"] = set;
    return json_response(200, body);
  }

  HttpResponse route(const HttpRequest& req) {
    static const std::regex image_re(R"(^/api/frames/([^/]+)/images/([^/]+)$)");
    static const std::regex keypoint_re(R"(^/api/keypoints/([^/]+)$)");
    std::smatch m;
    const std::string& p = req.path;
    const std::string& method = req.method;
    if (p == "/api/session" && method == "GET") return get_session();
    if (std::regex_match(p, m, image_re) && method == "GET") return get_image(m[1], m[2]);
    if (p == "/api/keypoints") {
      if (method == "GET") return list_keypoints();
      if (method == "POST") return add_keypoint(req);
      if (method == "DELETE") {
        auto it = req.query.find("id");
        if (it == req.query.end()) fail(400, "DELETE /api/keypoints needs an id");
        return delete_keypoint(req, it->second);
      }
    }
    if (std::regex_match(p, m, keypoint_re) && method == "DELETE") return delete_keypoint(req, m[1]);
    if (p == "/api/calibrate" && method == "POST") return calibrate(req);
    if (p == "/api/bev" && method == "GET") return bev(req);
    if (p == "/api/mde" && method == "GET") return mde_report(req);
    fail(404, "no route for " + method + " " + p);
  }
};

AnnotationService::AnnotationService(const fs::path& session_dir) : impl_(std::make_unique<Impl>(session_dir)) {
  const auto adapter = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r{req.method, req.path, {}, {}, req.body};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    for (const auto& [k, v] : req.headers) r.headers.emplace(k, v);
    const HttpResponse out = handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  impl_->server.Get(R"(/api/.*)", adapter);
  impl_->server.Post(R"(/api/.*)", adapter);
  impl_->server.Delete(R"(/api/.*)", adapter);
}

AnnotationService::~AnnotationService() { stop(); }

HttpResponse AnnotationService::handle(const HttpRequest& request) {
  try {
    return impl_->route(request);
  } catch (const HttpError& e) {
    return json_response(e.status, {{"error", e.message}, {"status", e.status}});
  } catch (const ParseError& e) {
    return json_response(400, {{"error", e.what()}, {"path", e.path()}, {"status", 400}});
  } catch (const Error& e) {
    const int status = status_for(e.code());
    return json_response(status, {{"error", e.what()}, {"code", std::string(to_string(e.code()))}, {"status", status}});
  } catch (const std::exception& e) {
    spdlog::error("unhandled error on {} {}: {}", request.method, request.path, e.what());
    return json_response(500, {{"error", e.what()}, {"status", 500}});
  }
}

void AnnotationService::set_static_dir(const fs::path& dir) { impl_->server.set_mount_point("/", dir.string()); }

bool AnnotationService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int AnnotationService::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

void AnnotationService::serve() { impl_->server.listen_after_bind(); }

void AnnotationService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace svcalib::service
