#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace svcalib {

enum class ErrorCode {
  kDomain,               // argument outside a function's mathematical domain
  kOutOfRange,           // image radius beyond f(theta_max)
  kOutOfFov,             // 3D point outside the lens field of view
  kNoGroundIntersection, // ray does not descend to the ground plane
  kNumeric,              // iterative method failed to converge
  kContractViolation,    // caller broke a precondition (bad vector length, mismatched rigs)
  kInvalidArgument,      // value fails a type invariant
  kParse,                // malformed document; message carries a JSON path
  kVersion,              // unsupported file version
  kIo,                   // missing or unreadable file
  kBadInitialization,    // initial rig cannot see enough keypoints on the ground
  kSolverFailure,        // non-finite objective or similar solver breakdown
  kGeometry,             // synthetic generator could not satisfy a request
  kUndefinedMetric,      // metric has nothing to compare
  kInput,                // missing image or other missing input
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Schema violation while decoding a JSON document. `path()` is a JSON
/// pointer to the offending value, e.g. "/cameras/2/intrinsics/a1".
class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& message)
      : Error(ErrorCode::kParse, path + ": " + message), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace svcalib
