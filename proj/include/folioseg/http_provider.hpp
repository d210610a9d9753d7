#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "folioseg/provider.hpp"

namespace folioseg::provider {

struct HttpProviderOptions {
  /// e.g. "http://127.0.0.1:8601"; a path prefix is allowed.
  std::string base_url;
  std::chrono::milliseconds timeout{std::chrono::seconds(60)};
  /// Send {"image_id": key} instead of the PNG bytes; for sidecars that were
  /// handed the images out of band.
  bool send_image_ids = false;
};

/// Client for model sidecars speaking the JSON-over-HTTP provider protocol
/// (POST /v1/capabilities, /v1/segment, /v1/segment_all, /v1/detect,
/// /v1/tag, /v1/embed). Capabilities are fetched once and every call is
/// checked against them before it goes on the wire.
class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpProviderOptions options);

  ProviderDescriptor describe() override;
  std::vector<Proposal> segment_with_prompts(const ImageInput& image, const PromptSet& prompts) override;
  std::vector<Proposal> segment_everything(const ImageInput& image) override;
  std::vector<TextDetection> detect_by_text(const ImageInput& image, std::span<const std::string> phrases) override;
  std::vector<ImageTag> tag_image(const ImageInput& image) override;
  Embedding embed_segment(const ImageInput& image, const BinaryMask& mask) override;

 private:
  std::string post(const std::string& path, const std::string& body);
  std::string image_body_prefix(const ImageInput& image) const;

  HttpProviderOptions options_;
  std::mutex mutex_;
  std::optional<ProviderDescriptor> descriptor_;
};

/// Serves a Provider over the sidecar protocol. Used to expose the mock
/// provider to out-of-process clients and as the reference for adapters.
class ProviderServer {
 public:
  explicit ProviderServer(std::shared_ptr<Provider> provider);
  ~ProviderServer();
  ProviderServer(const ProviderServer&) = delete;
  ProviderServer& operator=(const ProviderServer&) = delete;

  /// Makes `image_id` requests resolvable for this image.
  void register_image(ImageInput image);
  /// Binds (port 0 picks a free port), starts listening on a background
  /// thread and returns the bound port.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace folioseg::provider
