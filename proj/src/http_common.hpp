#pragma once

#include <httplib.h>

#include <chrono>
#include <string>

#include "folioseg/error.hpp"

namespace folioseg::http {

int status_for(ErrorCode code) noexcept;
ErrorCode code_from_name(std::string_view name) noexcept;

/// {"code": ..., "message": ...} with optional details.
std::string error_body(ErrorCode code, const std::string& message, const std::string& details_json = {});

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};
UrlParts split_url(const std::string& url);

/// GET with redirects; throws Io on transport errors or a non-200 status.
std::string fetch_url(const std::string& url, std::chrono::milliseconds timeout);

}  // namespace folioseg::http
