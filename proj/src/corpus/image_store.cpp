#include "folioseg/image_store.hpp"

#include "../http_common.hpp"
#include "folioseg/error.hpp"

namespace folioseg {

namespace {

constexpr std::size_t kDecodedCacheSize = 16;

bool is_remote(const std::string& uri) { return uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0; }

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

ImageStore::ImageStore(std::filesystem::path cache_dir, std::chrono::milliseconds fetch_timeout)
    : cache_dir_(std::move(cache_dir)), fetch_timeout_(fetch_timeout) {}

std::string ImageStore::media_type(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G')
    return "image/png";
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return "image/jpeg";
  return "application/octet-stream";
}

std::shared_ptr<const std::vector<std::uint8_t>> ImageStore::bytes(const std::string& uri) {
  require(!uri.empty(), ErrorCode::InvalidArgument, "empty image URI");
  if (!is_remote(uri)) {
    const auto path = uri.rfind("file://", 0) == 0 ? uri.substr(7) : uri;
    return std::make_shared<const std::vector<std::uint8_t>>(read_file_bytes(path));
  }
  std::filesystem::path ref;
  if (!cache_dir_.empty()) {
    ref = cache_dir_ / (sha256_hex(as_bytes(uri)) + ".ref");
    if (std::filesystem::exists(ref)) {
      const auto sha = read_file_bytes(ref);
      const auto blob = cache_dir_ / (std::string(sha.begin(), sha.end()) + ".img");
      if (std::filesystem::exists(blob)) return std::make_shared<const std::vector<std::uint8_t>>(read_file_bytes(blob));
    }
  }
  const auto body = http::fetch_url(uri, fetch_timeout_);
  auto data = std::make_shared<const std::vector<std::uint8_t>>(body.begin(), body.end());
  if (!cache_dir_.empty()) {
    std::filesystem::create_directories(cache_dir_);
    const auto sha = sha256_hex(*data);
    write_file_atomic(cache_dir_ / (sha + ".img"), body);
    write_file_atomic(ref, sha);
  }
  return data;
}

std::shared_ptr<const RgbImage> ImageStore::image(const std::string& uri) {
  {
    std::lock_guard lock(mutex_);
    for (auto it = decoded_.begin(); it != decoded_.end(); ++it) {
      if (it->first == uri) {
        decoded_.splice(decoded_.begin(), decoded_, it);
        return decoded_.front().second;
      }
    }
  }
  const auto data = bytes(uri);
  auto img = std::make_shared<const RgbImage>(decode_image(*data));
  std::lock_guard lock(mutex_);
  decoded_.emplace_front(uri, img);
  if (decoded_.size() > kDecodedCacheSize) decoded_.pop_back();
  return img;
}

provider::ImageInput ImageStore::input(const corpus::Folio& folio) {
  auto img = image(folio.image_uri);
  require(img->dims() == folio.dims, ErrorCode::Integrity,
          "image of folio '" + folio.id + "' no longer matches its recorded dimensions");
  auto in = provider::make_input(std::move(img), folio.image_uri);
  if (!folio.content_key.empty()) in.key = folio.content_key;
  return in;
}

corpus::Folio make_folio(ImageStore& store, std::string id, std::string image_uri, std::string shelfmark,
                         std::string folio_ref) {
  const auto img = store.image(image_uri);
  corpus::Folio f;
  f.id = std::move(id);
  f.shelfmark = std::move(shelfmark);
  f.folio_ref = std::move(folio_ref);
  f.image_uri = std::move(image_uri);
  f.dims = img->dims();
  f.content_key = pixel_key(*img);
  return f;
}

}  // namespace folioseg
