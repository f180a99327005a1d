#include "svcalib/error.hpp"

namespace svcalib {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kOutOfFov: return "out_of_fov";
    case ErrorCode::kNoGroundIntersection: return "no_ground_intersection";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kContractViolation: return "contract_violation";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kVersion: return "version";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kBadInitialization: return "bad_initialization";
    case ErrorCode::kSolverFailure: return "solver_failure";
    case ErrorCode::kGeometry: return "geometry";
    case ErrorCode::kUndefinedMetric: return "undefined_metric";
    case ErrorCode::kInput: return "input";
  }
  return "unknown";
}

}  // namespace svcalib
