#include "folioseg/mock_provider.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <set>
#include <unordered_map>

#include "../geometry/runs.hpp"
#include "folioseg/error.hpp"
#include "folioseg/text.hpp"
#include "folioseg/wire.hpp"

namespace folioseg::provider {

using geometry::ComponentLabels;
using geometry::GridDims;

std::string truth_to_json(const GroundTruth& truth) {
  Json regions = Json::array();
  for (const auto& r : truth.regions) {
    regions.push_back(Json{{"label", r.label}, {"polygon", wire::polygon_to_json(r.region)}});
  }
  return Json{{"regions", regions}}.dump(2);
}

GroundTruth truth_from_json(std::string_view text) {
  const auto doc = wire::parse(text);
  GroundTruth truth;
  try {
    for (const auto& r : wire::field(doc, "regions")) {
      truth.regions.push_back({wire::string_field(r, "label"), wire::polygon_from_json(wire::field(r, "polygon"))});
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed ground-truth sidecar: ") + e.what());
  }
  return truth;
}

std::filesystem::path truth_path_for(const std::filesystem::path& image_path) {
  auto p = image_path;
  p += ".truth.json";
  return p;
}

std::uint32_t background_color(const RgbImage& image) {
  std::unordered_map<std::uint32_t, std::uint64_t> counts;
  for (std::int32_t y = 0; y < image.height; ++y)
    for (std::int32_t x = 0; x < image.width; ++x) ++counts[image.color_at(x, y)];
  std::uint32_t best = 0;
  std::uint64_t best_count = 0;
  for (const auto& [color, count] : counts) {
    if (count > best_count || (count == best_count && color < best)) {
      best = color;
      best_count = count;
    }
  }
  return best;
}

struct MockProvider::Scene {
  ComponentLabels components;
  std::vector<std::uint64_t> areas;  // indexed by label
};

namespace {

MockProvider::Scene analyze(const RgbImage& image);

}  // namespace

std::shared_ptr<const MockProvider::Scene> MockProvider::scene_for(const ImageInput& image) const {
  {
    std::lock_guard lock(scene_mutex_);
    for (const auto& [key, scene] : scenes_) {
      if (key == image.key) return scene;
    }
  }
  auto scene = std::make_shared<const Scene>(analyze(*image.image));
  std::lock_guard lock(scene_mutex_);
  scenes_.emplace_front(image.key, scene);
  if (scenes_.size() > 8) scenes_.pop_back();
  return scene;
}

namespace {

MockProvider::Scene analyze(const RgbImage& image) {
  const auto bg = background_color(image);
  geometry::Bitmap foreground(image.dims().pixel_count());
  for (std::int32_t y = 0; y < image.height; ++y)
    for (std::int32_t x = 0; x < image.width; ++x)
      foreground[static_cast<std::size_t>(y) * image.width + x] = image.color_at(x, y) != bg;
  MockProvider::Scene scene{geometry::label_components(foreground, image.dims()), {}};
  scene.areas.assign(scene.components.count + 1, 0);
  for (const auto l : scene.components.labels) ++scene.areas[l];
  return scene;
}

std::vector<BinaryMask> component_masks(const ComponentLabels& c) {
  std::vector<std::vector<geometry::detail::Interval>> intervals(c.count + 1);
  for (std::uint64_t idx = 0; idx < c.labels.size(); ++idx) {
    const auto l = c.labels[idx];
    if (l == 0) continue;
    auto& list = intervals[l];
    if (!list.empty() && list.back().end == idx) {
      ++list.back().end;
    } else {
      list.push_back({idx, idx + 1});
    }
  }
  std::vector<BinaryMask> out;
  out.reserve(c.count);
  for (std::uint32_t l = 1; l <= c.count; ++l) out.push_back(geometry::detail::from_intervals(c.dims, intervals[l]));
  return out;
}

std::uint32_t label_under(const ComponentLabels& c, const PointPrompt& p) {
  const auto x = static_cast<std::int32_t>(p.x);
  const auto y = static_cast<std::int32_t>(p.y);
  return c.labels[static_cast<std::size_t>(y) * c.dims.width + x];
}

}  // namespace

void MockProvider::add_truth(const std::string& key, GroundTruth truth) {
  std::unique_lock lock(mutex_);
  truths_[key] = std::move(truth);
}

std::size_t MockProvider::load_fixture_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> images;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  std::size_t loaded = 0;
  for (const auto& path : images) {
    const auto sidecar = truth_path_for(path);
    if (!std::filesystem::exists(sidecar)) continue;
    const auto bytes = read_file_bytes(sidecar);
    add_truth(pixel_key(load_image(path)),
              truth_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
    ++loaded;
  }
  return loaded;
}

GroundTruth MockProvider::truth_for(const ImageInput& image) const {
  {
    std::shared_lock lock(mutex_);
    if (const auto it = truths_.find(image.key); it != truths_.end()) return it->second;
  }
  if (!image.source.empty() && image.source.find("://") == std::string::npos) {
    const auto sidecar = truth_path_for(image.source);
    if (std::filesystem::exists(sidecar)) {
      const auto bytes = read_file_bytes(sidecar);
      return truth_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
  }
  return {};
}

ProviderDescriptor MockProvider::describe() { return {"mock", kAllCapabilities, 1024}; }

std::vector<Proposal> MockProvider::segment_with_prompts(const ImageInput& image, const PromptSet& prompts) {
  validate_prompts(prompts, image.dims());
  const auto scene_ptr = scene_for(image);
  const auto& scene = *scene_ptr;
  const auto& c = scene.components;

  std::vector<bool> participates(c.count + 1, !prompts.box.has_value());
  if (prompts.box) {
    // A component joins when more than half of its pixels lie inside the box.
    std::vector<std::uint64_t> inside(c.count + 1, 0);
    for (auto y = prompts.box->y_min; y < prompts.box->y_max; ++y)
      for (auto x = prompts.box->x_min; x < prompts.box->x_max; ++x) ++inside[c.labels[static_cast<std::size_t>(y) * c.dims.width + x]];
    for (std::uint32_t l = 1; l <= c.count; ++l) participates[l] = 2 * inside[l] > scene.areas[l];
  }
  participates[0] = false;

  std::vector<bool> selected(c.count + 1, false);
  bool any_positive = false;
  for (const auto& p : prompts.points) {
    if (p.polarity != Polarity::Positive) continue;
    any_positive = true;
    const auto l = label_under(c, p);
    if (participates[l]) selected[l] = true;
  }
  if (!any_positive) selected = participates;
  for (const auto& p : prompts.points) {
    if (p.polarity == Polarity::Negative) selected[label_under(c, p)] = false;
  }
  selected[0] = false;

  geometry::Bitmap result(c.labels.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < result.size(); ++i) {
    if (selected[c.labels[i]]) {
      result[i] = 1;
      any = true;
    }
  }
  if (!any) return {};
  return {Proposal{geometry::rle_encode(result, c.dims), 1.0, geometry::ProposalSource::Prompted}};
}

std::vector<Proposal> MockProvider::segment_everything(const ImageInput& image) {
  const auto scene = scene_for(image);
  std::vector<Proposal> out;
  for (auto& mask : component_masks(scene->components)) {
    const double quality = geometry::compactness(mask);
    out.push_back({std::move(mask), quality, geometry::ProposalSource::Auto});
  }
  std::stable_sort(out.begin(), out.end(), [](const Proposal& a, const Proposal& b) { return a.quality > b.quality; });
  return out;
}

std::vector<TextDetection> MockProvider::detect_by_text(const ImageInput& image, std::span<const std::string> phrases) {
  const auto truth = truth_for(image);
  std::vector<TextDetection> out;
  std::set<std::string> seen;
  for (const auto& phrase : phrases) {
    const auto key = fold_text(phrase);
    if (key.empty() || !seen.insert(key).second) continue;
    for (const auto& region : truth.regions) {
      if (fold_text(region.label) != key) continue;
      const auto box = geometry::mask_bbox(geometry::rasterize(region.region, image.dims()));
      if (box) out.push_back({phrase, *box, 1.0});
    }
  }
  sort_detections(out);
  return out;
}

std::vector<ImageTag> MockProvider::tag_image(const ImageInput& image) {
  const auto truth = truth_for(image);
  std::vector<ImageTag> out;
  std::set<std::string> seen;
  for (const auto& region : truth.regions) {
    if (seen.insert(fold_text(region.label)).second) out.push_back({region.label, 1.0});
  }
  std::sort(out.begin(), out.end(), [](const ImageTag& a, const ImageTag& b) { return a.label_text < b.label_text; });
  return out;
}

Embedding MockProvider::embed_segment(const ImageInput& image, const BinaryMask& mask) {
  return reference_embedding(*image.image, mask);
}

}  // namespace folioseg::provider
