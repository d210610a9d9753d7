#pragma once

#include <chrono>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "folioseg/corpus.hpp"
#include "folioseg/image.hpp"
#include "folioseg/provider.hpp"

namespace folioseg {

/// Resolves folio image URIs (local paths, file:// or http(s) URLs) to bytes
/// and decoded rasters. Remote images are fetched once and kept in the cache
/// directory under their SHA-256; decoded rasters are memoized.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path cache_dir = {},
                      std::chrono::milliseconds fetch_timeout = std::chrono::seconds(30));

  std::shared_ptr<const std::vector<std::uint8_t>> bytes(const std::string& uri);
  std::shared_ptr<const RgbImage> image(const std::string& uri);
  /// Provider input for a folio; throws Integrity if the image no longer
  /// matches the recorded dimensions.
  provider::ImageInput input(const corpus::Folio& folio);

  /// "image/png", "image/jpeg" or "application/octet-stream".
  static std::string media_type(std::span<const std::uint8_t> bytes);

 private:
  std::filesystem::path cache_dir_;
  std::chrono::milliseconds fetch_timeout_;
  std::mutex mutex_;
  std::list<std::pair<std::string, std::shared_ptr<const RgbImage>>> decoded_;  // most recent first
};

/// Loads the image once to fill in dims and content key.
corpus::Folio make_folio(ImageStore& store, std::string id, std::string image_uri, std::string shelfmark = {},
                         std::string folio_ref = {});

}  // namespace folioseg
