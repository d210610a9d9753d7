#pragma once

// HTTP service exposing projects, segmentation, validation, suggestions and
// export to the annotation workbench and to scripts.

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "folioseg/corpus.hpp"
#include "folioseg/provider.hpp"

namespace folioseg::api {

struct ProviderConfig {
  /// "" for none, "mock:<fixture dir>" for the built-in mock, otherwise the
  /// base URL of a sidecar.
  std::string url;
  std::chrono::milliseconds timeout{std::chrono::seconds(60)};
  bool send_image_ids = false;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8600;  // 0 picks a free port
  std::filesystem::path project_root = "projects";
  /// Remote image cache; defaults to <project_root>/.cache.
  std::filesystem::path cache_dir;
  ProviderConfig provider;
  /// Seeded into projects created through the service.
  corpus::AutomaskDefaults automask;
  /// Recorded on events when a request names no actor.
  std::string actor = "api";
  corpus::Clock clock = corpus::system_clock();
};

/// Keys: host, port, project_root, cache_dir, actor,
/// provider {url, timeout_ms, send_image_ids}, automask {min_quality, ...}.
/// Missing keys keep their defaults; relative paths resolve against `base`.
ServiceConfig config_from_json(const Json& j, const std::filesystem::path& base = {});
ServiceConfig load_config(const std::filesystem::path& path);

/// Builds the provider a ProviderConfig names; nullptr when the URL is empty.
/// Never contacts the provider.
std::shared_ptr<provider::Provider> open_provider(const ProviderConfig& config);

/// Wraps a provider so that no call exceeds its advertised concurrency and no
/// unadvertised capability is ever invoked. The descriptor is fetched lazily
/// and retried until it succeeds, so a sidecar that comes up late is picked up.
class BoundedProvider final : public provider::Provider {
 public:
  explicit BoundedProvider(std::shared_ptr<provider::Provider> inner);

  /// Throws ProviderUnavailable when there is no provider or it cannot be reached.
  provider::ProviderDescriptor describe() override;
  std::vector<geometry::Proposal> segment_with_prompts(const provider::ImageInput& image,
                                                       const provider::PromptSet& prompts) override;
  std::vector<geometry::Proposal> segment_everything(const provider::ImageInput& image) override;
  std::vector<provider::TextDetection> detect_by_text(const provider::ImageInput& image,
                                                      std::span<const std::string> phrases) override;
  std::vector<provider::ImageTag> tag_image(const provider::ImageInput& image) override;
  provider::Embedding embed_segment(const provider::ImageInput& image, const geometry::BinaryMask& mask) override;

  /// Largest number of simultaneous calls seen so far.
  std::uint32_t peak_in_flight() const;

 private:
  class Slot;
  provider::ProviderDescriptor admit(provider::Capability c);

  std::shared_ptr<provider::Provider> inner_;
  mutable std::mutex mutex_;
  std::condition_variable released_;
  std::optional<provider::ProviderDescriptor> descriptor_;
  std::uint32_t in_flight_ = 0;
  std::uint32_t peak_ = 0;
};

class Service {
 public:
  /// `provider` may be null: the service then runs degraded and every
  /// provider-backed route answers provider_unavailable.
  Service(ServiceConfig config, std::shared_ptr<provider::Provider> provider);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Loads every project under the root, binds and starts serving on a
  /// background thread. Returns the bound port.
  int start();
  int port() const noexcept;
  /// Blocks until stop() is called (for instance from a signal handler).
  void wait();
  /// Stops accepting requests, lets in-flight requests and background jobs
  /// finish, and returns once every accepted write is on disk.
  void stop();

  const BoundedProvider& provider() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Where the service keeps a project: <root>/<name>.json.
std::filesystem::path project_path(const std::filesystem::path& root, const std::string& name);

}  // namespace folioseg::api
