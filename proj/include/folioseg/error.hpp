#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace folioseg {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NotFound,
  IllegalTransition,
  VersionMismatch,
  Integrity,
  Io,
  Parse,
  ProviderUnavailable,
  ProviderTimeout,
  ProviderError,
  CapabilityMissing,
  Conflict,
  Internal,
};

/// Machine-readable snake_case name, used in API error bodies and the C API.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace folioseg
