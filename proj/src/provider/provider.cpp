#include <algorithm>
#include <cmath>
#include <tuple>

#include "folioseg/error.hpp"
#include "folioseg/provider.hpp"

namespace folioseg::provider {

void validate_prompts(const PromptSet& prompts, geometry::GridDims dims) {
  const bool has_positive = std::any_of(prompts.points.begin(), prompts.points.end(),
                                        [](const PointPrompt& p) { return p.polarity == Polarity::Positive; });
  require(has_positive || prompts.box.has_value(), ErrorCode::InvalidArgument,
          "prompt set needs a positive point or a box");
  for (const auto& p : prompts.points) {
    require(std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 && p.x < dims.width &&
                p.y < dims.height,
            ErrorCode::InvalidArgument, "point prompt outside the image");
  }
  if (prompts.box) {
    const auto& b = *prompts.box;
    require(b.is_valid() && b.x_max <= dims.width && b.y_max <= dims.height, ErrorCode::InvalidArgument,
            "box prompt must be a non-empty box inside the image");
  }
}

Embedding normalized(std::vector<double> values) {
  double norm = 0.0;
  for (const auto v : values) norm += v * v;
  norm = std::sqrt(norm);
  require(norm > 0.0 && std::isfinite(norm), ErrorCode::InvalidArgument, "cannot normalize a zero vector");
  for (auto& v : values) v /= norm;
  return Embedding{std::move(values)};
}

double cosine(const Embedding& a, const Embedding& b) {
  require(a.vector.size() == b.vector.size(), ErrorCode::DimensionMismatch, "embedding lengths differ");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) dot += a.vector[i] * b.vector[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::string_view capability_name(Capability capability) noexcept {
  switch (capability) {
    case Capability::PromptSegmentation: return "prompt_segmentation";
    case Capability::AutoSegmentation: return "auto_segmentation";
    case Capability::TextDetection: return "text_detection";
    case Capability::ImageTagging: return "image_tagging";
    case Capability::Embedding: return "embedding";
  }
  return "unknown";
}

void require_capability(const ProviderDescriptor& descriptor, Capability c) {
  if (!descriptor.has(c)) {
    fail(ErrorCode::CapabilityMissing,
         "provider '" + descriptor.name + "' does not advertise " + std::string(capability_name(c)));
  }
}

ImageInput make_input(RgbImage image, std::string source) {
  return make_input(std::make_shared<const RgbImage>(std::move(image)), std::move(source));
}

ImageInput make_input(std::shared_ptr<const RgbImage> image, std::string source) {
  require(image != nullptr, ErrorCode::InvalidArgument, "null image");
  auto key = pixel_key(*image);
  return ImageInput{std::move(image), std::move(key), std::move(source)};
}

void sort_detections(std::vector<TextDetection>& detections) {
  std::sort(detections.begin(), detections.end(), [](const TextDetection& a, const TextDetection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return std::tie(a.phrase, a.box.x_min, a.box.y_min, a.box.x_max, a.box.y_max) <
           std::tie(b.phrase, b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max);
  });
}

Embedding reference_embedding(const RgbImage& image, const BinaryMask& mask) {
  require(mask.dims() == image.dims(), ErrorCode::DimensionMismatch, "mask does not match image");
  const auto area = geometry::mask_area(mask);
  require(area > 0, ErrorCode::InvalidArgument, "cannot embed an empty mask");

  std::vector<double> v(kReferenceEmbeddingDim, 0.0);
  const auto bitmap = geometry::rle_decode(mask);
  for (std::size_t i = 0; i < bitmap.size(); ++i) {
    if (bitmap[i] == 0) continue;
    for (int c = 0; c < 3; ++c) v[c * 8 + (image.pixels[i * 3 + c] >> 5)] += 1.0;
  }
  const auto a = static_cast<double>(area);
  for (int i = 0; i < 24; ++i) v[i] /= a;

  const auto box = *geometry::mask_bbox(mask);
  v[24] = a / static_cast<double>(box.area());
  v[25] = static_cast<double>(box.width()) / static_cast<double>(box.width() + box.height());
  v[26] = a / static_cast<double>(mask.dims().pixel_count());
  v[27] = geometry::compactness(mask);
  return normalized(std::move(v));
}

}  // namespace folioseg::provider
