#include "http_common.hpp"

#include "folioseg/wire.hpp"

namespace folioseg::http {

int status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::Parse: return 400;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::IllegalTransition:
    case ErrorCode::Conflict: return 409;
    case ErrorCode::VersionMismatch:
    case ErrorCode::Integrity: return 422;
    case ErrorCode::CapabilityMissing: return 501;
    case ErrorCode::ProviderUnavailable: return 503;
    case ErrorCode::ProviderTimeout: return 504;
    case ErrorCode::ProviderError: return 502;
    case ErrorCode::Io:
    case ErrorCode::Internal: return 500;
  }
  return 500;
}

ErrorCode code_from_name(std::string_view name) noexcept {
  for (int c = 0; c <= static_cast<int>(ErrorCode::Internal); ++c) {
    if (error_code_name(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  }
  return ErrorCode::ProviderError;
}

std::string error_body(ErrorCode code, const std::string& message, const std::string& details_json) {
  Json body{{"code", std::string(error_code_name(code))}, {"message", message}};
  if (!details_json.empty()) body["details"] = Json::parse(details_json);
  return body.dump();
}

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  require(scheme_end != std::string::npos, ErrorCode::InvalidArgument, "URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  UrlParts parts;
  parts.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) parts.prefix = url.substr(path_start);
  while (!parts.prefix.empty() && parts.prefix.back() == '/') parts.prefix.pop_back();
  return parts;
}

}  // namespace folioseg::http

namespace folioseg::http {

std::string fetch_url(const std::string& url, std::chrono::milliseconds timeout) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_follow_location(true);
  const auto res = client.Get(parts.prefix.empty() ? "/" : parts.prefix);
  if (!res) fail(ErrorCode::Io, "fetching " + url + " failed: " + httplib::to_string(res.error()));
  require(res->status == 200, ErrorCode::Io, "fetching " + url + " returned HTTP " + std::to_string(res->status));
  return res->body;
}

}  // namespace folioseg::http
