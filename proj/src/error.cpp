#include "folioseg/error.hpp"

namespace folioseg {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::IllegalTransition: return "illegal_transition";
    case ErrorCode::VersionMismatch: return "version_mismatch";
    case ErrorCode::Integrity: return "integrity_violation";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::ProviderUnavailable: return "provider_unavailable";
    case ErrorCode::ProviderTimeout: return "provider_timeout";
    case ErrorCode::ProviderError: return "provider_error";
    case ErrorCode::CapabilityMissing: return "capability_missing";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

}  // namespace folioseg
