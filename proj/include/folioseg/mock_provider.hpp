#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "folioseg/provider.hpp"

namespace folioseg::provider {

/// One labeled region of a fixture image.
struct TruthRegion {
  std::string label;
  geometry::Polygon region;
  friend bool operator==(const TruthRegion&, const TruthRegion&) = default;
};

/// Ground-truth sidecar of a fixture image, stored next to it as
/// `<image file>.truth.json`.
struct GroundTruth {
  std::vector<TruthRegion> regions;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

std::string truth_to_json(const GroundTruth& truth);
GroundTruth truth_from_json(std::string_view text);
std::filesystem::path truth_path_for(const std::filesystem::path& image_path);

/// Most frequent color; ties go to the smaller packed value.
std::uint32_t background_color(const RgbImage& image);

/// Deterministic stand-in for real models. Objects are the 4-connected
/// components of non-background pixels; detection and tagging read the
/// fixture's ground-truth sidecar.
class MockProvider final : public Provider {
 public:
  MockProvider() = default;

  /// Registers a sidecar for an image content key (see pixel_key).
  void add_truth(const std::string& key, GroundTruth truth);
  /// Loads every PNG/JPEG in `dir` that has a sidecar; returns the count.
  std::size_t load_fixture_dir(const std::filesystem::path& dir);

  ProviderDescriptor describe() override;
  std::vector<Proposal> segment_with_prompts(const ImageInput& image, const PromptSet& prompts) override;
  std::vector<Proposal> segment_everything(const ImageInput& image) override;
  std::vector<TextDetection> detect_by_text(const ImageInput& image, std::span<const std::string> phrases) override;
  std::vector<ImageTag> tag_image(const ImageInput& image) override;
  Embedding embed_segment(const ImageInput& image, const BinaryMask& mask) override;

 /// Cached component analysis of one image.
  struct Scene;

 private:
  GroundTruth truth_for(const ImageInput& image) const;
  /// Component analysis memoized per image key (a few recent images).
  std::shared_ptr<const Scene> scene_for(const ImageInput& image) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, GroundTruth> truths_;
  mutable std::mutex scene_mutex_;
  mutable std::deque<std::pair<std::string, std::shared_ptr<const Scene>>> scenes_;
};

}  // namespace folioseg::provider
