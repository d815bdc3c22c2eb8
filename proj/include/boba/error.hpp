#pragma once

#include <stdexcept>
#include <string>

namespace boba {

enum class ErrorCode {
  kInvalidInput,
  kInvalidRank,
  kDimensionMismatch,
  kDegenerateSimplex,
  kPreconditionViolated,
  kCombinatorialCap,
  kMissingServerGradients,
  kConfig,
  kNumeric,
  kIo,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the library; callers switch on code() when the
// distinction matters (the CLI maps codes to exit statuses).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace boba
