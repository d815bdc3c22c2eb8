#include "boba/error.hpp"

namespace boba {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kInvalidRank: return "invalid rank";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kDegenerateSimplex: return "degenerate simplex";
    case ErrorCode::kPreconditionViolated: return "precondition violated";
    case ErrorCode::kCombinatorialCap: return "combinatorial cap exceeded";
    case ErrorCode::kMissingServerGradients: return "missing server gradients";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kNumeric: return "numeric failure";
    case ErrorCode::kIo: return "i/o error";
  }
  return "error";
}

}  // namespace boba
