#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace svcalib::service {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Session directory layout:
///   rig.json              initial rig (required)
///   keypoints.json        clicked correspondences and frame list; created on
///                         first start by scanning frames/<frame_id>/<camera>.png
///   eval_keypoints.json   optional held-out set for /api/mde?set=heldout
///   rig_optimized.json    written by /api/calibrate
///
/// Every mutation bumps the revision and is written to disk (temp file +
/// rename) before the response is produced. Requests may carry the expected
/// revision in an If-Match header or an "expected_revision" body field; a
/// mismatch yields 409.
class AnnotationService {
 public:
  explicit AnnotationService(const std::filesystem::path& session_dir);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Route one request. Thread-safe.
  [[nodiscard]] HttpResponse handle(const HttpRequest& request);

  /// Serve static files (the browser client) under "/".
  void set_static_dir(const std::filesystem::path& dir);

  /// Bind and serve until stop(). Returns false if binding fails.
  bool listen(const std::string& host, int port);
  /// Bind to an ephemeral port; call serve() afterwards. Returns the port or -1.
  int bind_to_any_port(const std::string& host);
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace svcalib::service
