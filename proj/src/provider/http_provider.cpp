#include "folioseg/http_provider.hpp"

#include <map>
#include <shared_mutex>
#include <thread>

#include "../http_common.hpp"
#include "folioseg/error.hpp"
#include "folioseg/wire.hpp"

namespace folioseg::provider {

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
  http::split_url(options_.base_url);
}

std::string HttpProvider::post(const std::string& path, const std::string& body) {
  const auto url = http::split_url(options_.base_url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post(url.prefix + path, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const auto what = options_.base_url + path + ": " + httplib::to_string(err);
    if (err == httplib::Error::Read || err == httplib::Error::Write) fail(ErrorCode::ProviderTimeout, what);
    fail(ErrorCode::ProviderUnavailable, what);
  }
  if (res->status != 200) {
    try {
      const auto j = Json::parse(res->body);
      fail(http::code_from_name(j.at("code").get<std::string>()), j.at("message").get<std::string>());
    } catch (const Json::exception&) {
      fail(ErrorCode::ProviderError, "provider returned HTTP " + std::to_string(res->status));
    }
  }
  return res->body;
}

std::string HttpProvider::image_body_prefix(const ImageInput& image) const {
  Json j;
  if (options_.send_image_ids) {
    j["image_id"] = image.key;
  } else {
    j["image"] = base64_encode(encode_png(*image.image));
  }
  return j.dump();
}

namespace {

Json parse_response(const std::string& body) {
  try {
    return Json::parse(body);
  } catch (const Json::exception& e) {
    fail(ErrorCode::ProviderError, std::string("unparsable provider response: ") + e.what());
  }
}

template <typename F>
auto decode_response(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorCode::ProviderError, std::string("unexpected provider response: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse || e.code() == ErrorCode::InvalidArgument) {
      fail(ErrorCode::ProviderError, std::string("unexpected provider response: ") + e.what());
    }
    throw;
  }
}

}  // namespace

ProviderDescriptor HttpProvider::describe() {
  {
    std::lock_guard lock(mutex_);
    if (descriptor_) return *descriptor_;
  }
  const auto body = post("/v1/capabilities", "{}");
  auto d = decode_response([&] { return wire::descriptor_from_json(parse_response(body)); });
  std::lock_guard lock(mutex_);
  descriptor_ = d;
  return d;
}

std::vector<Proposal> HttpProvider::segment_with_prompts(const ImageInput& image, const PromptSet& prompts) {
  require_capability(describe(), Capability::PromptSegmentation);
  validate_prompts(prompts, image.dims());
  auto body = Json::parse(image_body_prefix(image));
  body["prompts"] = wire::prompts_to_json(prompts);
  const auto res = parse_response(post("/v1/segment", body.dump()));
  return decode_response([&] {
    std::vector<Proposal> out;
    for (const auto& p : res.at("proposals")) out.push_back(wire::proposal_from_json(p));
    std::stable_sort(out.begin(), out.end(), [](const Proposal& a, const Proposal& b) { return a.quality > b.quality; });
    return out;
  });
}

std::vector<Proposal> HttpProvider::segment_everything(const ImageInput& image) {
  require_capability(describe(), Capability::AutoSegmentation);
  const auto res = parse_response(post("/v1/segment_all", image_body_prefix(image)));
  return decode_response([&] {
    std::vector<Proposal> out;
    for (const auto& p : res.at("proposals")) {
      auto proposal = wire::proposal_from_json(p);
      proposal.source = geometry::ProposalSource::Auto;
      out.push_back(std::move(proposal));
    }
    return out;
  });
}

std::vector<TextDetection> HttpProvider::detect_by_text(const ImageInput& image, std::span<const std::string> phrases) {
  require_capability(describe(), Capability::TextDetection);
  auto body = Json::parse(image_body_prefix(image));
  body["phrases"] = std::vector<std::string>(phrases.begin(), phrases.end());
  const auto res = parse_response(post("/v1/detect", body.dump()));
  return decode_response([&] {
    std::vector<TextDetection> out;
    for (const auto& d : res.at("detections")) out.push_back(wire::detection_from_json(d));
    sort_detections(out);
    return out;
  });
}

std::vector<ImageTag> HttpProvider::tag_image(const ImageInput& image) {
  require_capability(describe(), Capability::ImageTagging);
  const auto res = parse_response(post("/v1/tag", image_body_prefix(image)));
  return decode_response([&] {
    std::vector<ImageTag> out;
    for (const auto& t : res.at("tags")) out.push_back(wire::tag_from_json(t));
    return out;
  });
}

Embedding HttpProvider::embed_segment(const ImageInput& image, const BinaryMask& mask) {
  require_capability(describe(), Capability::Embedding);
  require(!mask.is_empty(), ErrorCode::InvalidArgument, "cannot embed an empty mask");
  auto body = Json::parse(image_body_prefix(image));
  body["mask"] = wire::mask_to_json(mask);
  const auto res = parse_response(post("/v1/embed", body.dump()));
  return decode_response([&] { return normalized(res.at("vector").get<std::vector<double>>()); });
}

// ---------------------------------------------------------------------------

struct ProviderServer::Impl {
  std::shared_ptr<Provider> provider;
  httplib::Server server;
  std::thread listener;
  std::shared_mutex images_mutex;
  std::map<std::string, ImageInput> images;

  ImageInput resolve(const Json& body) {
    if (const auto it = body.find("image_id"); it != body.end()) {
      std::shared_lock lock(images_mutex);
      const auto found = images.find(it->get<std::string>());
      if (found == images.end()) fail(ErrorCode::NotFound, "unknown image id " + it->get<std::string>());
      return found->second;
    }
    const auto bytes = base64_decode(wire::string_field(body, "image"));
    return make_input(decode_image(bytes));
  }

  template <typename F>
  void handle(const char* path, F f) {
    server.Post(path, [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto body = req.body.empty() ? Json::object() : wire::parse(req.body);
        res.set_content(f(body).dump(), "application/json");
      } catch (const Error& e) {
        res.status = http::status_for(e.code());
        res.set_content(http::error_body(e.code(), e.what()), "application/json");
      } catch (const Json::exception& e) {
        res.status = 400;
        res.set_content(http::error_body(ErrorCode::Parse, e.what()), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(http::error_body(ErrorCode::Internal, e.what()), "application/json");
      }
    });
  }
};

ProviderServer::ProviderServer(std::shared_ptr<Provider> provider) : impl_(std::make_unique<Impl>()) {
  impl_->provider = std::move(provider);
  auto* impl = impl_.get();
  auto proposals_json = [](const std::vector<Proposal>& proposals) {
    Json list = Json::array();
    for (const auto& p : proposals) list.push_back(wire::proposal_to_json(p));
    return Json{{"proposals", list}};
  };
  impl->handle("/v1/capabilities", [impl](const Json&) { return wire::descriptor_to_json(impl->provider->describe()); });
  impl->handle("/v1/segment", [impl, proposals_json](const Json& body) {
    const auto image = impl->resolve(body);
    return proposals_json(impl->provider->segment_with_prompts(image, wire::prompts_from_json(wire::field(body, "prompts"))));
  });
  impl->handle("/v1/segment_all", [impl, proposals_json](const Json& body) {
    return proposals_json(impl->provider->segment_everything(impl->resolve(body)));
  });
  impl->handle("/v1/detect", [impl](const Json& body) {
    const auto phrases = wire::field(body, "phrases").get<std::vector<std::string>>();
    Json list = Json::array();
    for (const auto& d : impl->provider->detect_by_text(impl->resolve(body), phrases)) list.push_back(wire::detection_to_json(d));
    return Json{{"detections", list}};
  });
  impl->handle("/v1/tag", [impl](const Json& body) {
    Json list = Json::array();
    for (const auto& t : impl->provider->tag_image(impl->resolve(body))) list.push_back(wire::tag_to_json(t));
    return Json{{"tags", list}};
  });
  impl->handle("/v1/embed", [impl](const Json& body) {
    const auto image = impl->resolve(body);
    const auto embedding = impl->provider->embed_segment(image, wire::mask_from_json(wire::field(body, "mask")));
    return Json{{"vector", embedding.vector}};
  });
}

ProviderServer::~ProviderServer() { stop(); }

void ProviderServer::register_image(ImageInput image) {
  std::unique_lock lock(impl_->images_mutex);
  auto key = image.key;
  impl_->images.insert_or_assign(std::move(key), std::move(image));
}

int ProviderServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::Io, "cannot bind provider server to " + host + ":" + std::to_string(port));
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  return bound;
}

void ProviderServer::wait() {
  impl_->server.wait_until_ready();
  while (impl_->server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void ProviderServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

}  // namespace folioseg::provider
