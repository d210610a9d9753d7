#include <fstream>
#include <sstream>

#include "folioseg/api.hpp"
#include "folioseg/error.hpp"
#include "folioseg/http_provider.hpp"
#include "folioseg/mock_provider.hpp"

namespace folioseg::api {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ServiceConfig config_from_json(const Json& j, const fs::path& base) {
  require(j.is_object(), ErrorCode::Parse, "config must be an object");
  ServiceConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("project_root")) c.project_root = resolve(base, j.at("project_root").get<std::string>());
    else if (!base.empty()) c.project_root = base / c.project_root;
    if (j.contains("cache_dir")) c.cache_dir = resolve(base, j.at("cache_dir").get<std::string>());
    c.actor = j.value("actor", c.actor);
    if (const auto it = j.find("provider"); it != j.end()) {
      c.provider.url = it->value("url", std::string());
      // A relative mock fixture directory is relative to the config file too.
      if (c.provider.url.rfind("mock:", 0) == 0 && !c.provider.url.substr(5).empty())
        c.provider.url = "mock:" + resolve(base, c.provider.url.substr(5)).string();
      c.provider.timeout = std::chrono::milliseconds(it->value("timeout_ms", 60000));
      c.provider.send_image_ids = it->value("send_image_ids", false);
    }
    if (const auto it = j.find("automask"); it != j.end()) {
      Json merged = corpus::to_json(c.automask);
      for (const auto& [k, v] : it->items()) {
        require(merged.contains(k), ErrorCode::Parse, "unknown automask key " + k);
        merged[k] = v;
      }
      c.automask = corpus::automask_from_json(merged);
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, std::string("config: ") + e.what());
  }
  require(c.port >= 0 && c.port <= 65535, ErrorCode::InvalidArgument, "config: port out of range");
  require(c.provider.timeout.count() > 0, ErrorCode::InvalidArgument, "config: provider timeout must be positive");
  require(!c.actor.empty(), ErrorCode::InvalidArgument, "config: actor must not be empty");
  return c;
}

ServiceConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(wire::parse(ss.str()), path.parent_path());
}

std::shared_ptr<provider::Provider> open_provider(const ProviderConfig& config) {
  if (config.url.empty()) return nullptr;
  if (config.url.rfind("mock:", 0) == 0 || config.url == "mock") {
    auto mock = std::make_shared<provider::MockProvider>();
    const auto dir = config.url.size() > 5 ? config.url.substr(5) : std::string();
    if (!dir.empty()) {
      require(fs::is_directory(dir), ErrorCode::Io, "mock fixture directory not found: " + dir);
      mock->load_fixture_dir(dir);
    }
    return mock;
  }
  return std::make_shared<provider::HttpProvider>(
      provider::HttpProviderOptions{config.url, config.timeout, config.send_image_ids});
}

fs::path project_path(const fs::path& root, const std::string& name) { return root / (name + ".json"); }

// BoundedProvider

class BoundedProvider::Slot {
 public:
  Slot(BoundedProvider& owner, std::uint32_t limit) : owner_(owner) {
    std::unique_lock lock(owner_.mutex_);
    owner_.released_.wait(lock, [&] { return owner_.in_flight_ < std::max<std::uint32_t>(limit, 1); });
    owner_.peak_ = std::max(owner_.peak_, ++owner_.in_flight_);
  }
  ~Slot() {
    {
      std::lock_guard lock(owner_.mutex_);
      --owner_.in_flight_;
    }
    owner_.released_.notify_one();
  }
  Slot(const Slot&) = delete;
  Slot& operator=(const Slot&) = delete;

 private:
  BoundedProvider& owner_;
};

BoundedProvider::BoundedProvider(std::shared_ptr<provider::Provider> inner) : inner_(std::move(inner)) {}

provider::ProviderDescriptor BoundedProvider::describe() {
  require(inner_ != nullptr, ErrorCode::ProviderUnavailable, "no segmentation provider is configured");
  {
    std::lock_guard lock(mutex_);
    if (descriptor_) return *descriptor_;
  }
  provider::ProviderDescriptor d;
  try {
    d = inner_->describe();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ProviderTimeout) fail(ErrorCode::ProviderUnavailable, e.what());
    throw;
  }
  std::lock_guard lock(mutex_);
  descriptor_ = d;
  return d;
}

provider::ProviderDescriptor BoundedProvider::admit(provider::Capability c) {
  auto d = describe();
  provider::require_capability(d, c);
  return d;
}

std::vector<geometry::Proposal> BoundedProvider::segment_with_prompts(const provider::ImageInput& image,
                                                                      const provider::PromptSet& prompts) {
  const auto d = admit(provider::Capability::PromptSegmentation);
  Slot slot(*this, d.concurrent_requests);
  return inner_->segment_with_prompts(image, prompts);
}

std::vector<geometry::Proposal> BoundedProvider::segment_everything(const provider::ImageInput& image) {
  const auto d = admit(provider::Capability::AutoSegmentation);
  Slot slot(*this, d.concurrent_requests);
  return inner_->segment_everything(image);
}

std::vector<provider::TextDetection> BoundedProvider::detect_by_text(const provider::ImageInput& image,
                                                                     std::span<const std::string> phrases) {
  const auto d = admit(provider::Capability::TextDetection);
  Slot slot(*this, d.concurrent_requests);
  return inner_->detect_by_text(image, phrases);
}

std::vector<provider::ImageTag> BoundedProvider::tag_image(const provider::ImageInput& image) {
  const auto d = admit(provider::Capability::ImageTagging);
  Slot slot(*this, d.concurrent_requests);
  return inner_->tag_image(image);
}

provider::Embedding BoundedProvider::embed_segment(const provider::ImageInput& image, const geometry::BinaryMask& mask) {
  const auto d = admit(provider::Capability::Embedding);
  Slot slot(*this, d.concurrent_requests);
  return inner_->embed_segment(image, mask);
}

std::uint32_t BoundedProvider::peak_in_flight() const {
  std::lock_guard lock(mutex_);
  return peak_;
}

}  // namespace folioseg::api
