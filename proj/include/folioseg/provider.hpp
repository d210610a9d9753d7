#pragma once

// Zero-shot model backends behind one interface: promptable segmentation,
// whole-image mask generation, text-grounded detection, image tagging and
// segment embeddings.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "folioseg/geometry.hpp"
#include "folioseg/image.hpp"

namespace folioseg::provider {

using geometry::BBox;
using geometry::BinaryMask;
using geometry::Proposal;

enum class Polarity { Positive, Negative };

struct PointPrompt {
  double x = 0.0;
  double y = 0.0;
  Polarity polarity = Polarity::Positive;
  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

struct PromptSet {
  std::vector<PointPrompt> points;
  std::optional<BBox> box;
  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

/// Throws InvalidArgument unless there is a positive point or a box, every
/// point lies inside the image and the box is a valid box within it.
void validate_prompts(const PromptSet& prompts, geometry::GridDims dims);

struct TextDetection {
  std::string phrase;
  BBox box;
  double confidence = 0.0;
  friend bool operator==(const TextDetection&, const TextDetection&) = default;
};

struct ImageTag {
  std::string label_text;
  double confidence = 0.0;
  friend bool operator==(const ImageTag&, const ImageTag&) = default;
};

struct Embedding {
  std::vector<double> vector;
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Scales to unit L2 norm; throws InvalidArgument for a zero vector.
Embedding normalized(std::vector<double> values);
double cosine(const Embedding& a, const Embedding& b);

enum class Capability : std::uint32_t {
  PromptSegmentation = 1u << 0,
  AutoSegmentation = 1u << 1,
  TextDetection = 1u << 2,
  ImageTagging = 1u << 3,
  Embedding = 1u << 4,
};

constexpr std::uint32_t kAllCapabilities = 0x1F;

std::string_view capability_name(Capability capability) noexcept;

struct ProviderDescriptor {
  std::string name;
  std::uint32_t capabilities = 0;
  std::uint32_t concurrent_requests = 1;

  bool has(Capability c) const noexcept { return (capabilities & static_cast<std::uint32_t>(c)) != 0; }
  friend bool operator==(const ProviderDescriptor&, const ProviderDescriptor&) = default;
};

/// Throws CapabilityMissing when the descriptor does not advertise `c`.
void require_capability(const ProviderDescriptor& descriptor, Capability c);

/// Image handed to a provider: decoded pixels plus a content key that remote
/// sidecars may already know, and the source URI when there is one.
struct ImageInput {
  std::shared_ptr<const RgbImage> image;
  std::string key;
  std::string source;

  geometry::GridDims dims() const noexcept { return image->dims(); }
};

ImageInput make_input(RgbImage image, std::string source = {});
ImageInput make_input(std::shared_ptr<const RgbImage> image, std::string source = {});

class Provider {
 public:
  virtual ~Provider() = default;

  virtual ProviderDescriptor describe() = 0;
  /// Proposals ranked by quality, best first.
  virtual std::vector<Proposal> segment_with_prompts(const ImageInput& image, const PromptSet& prompts) = 0;
  virtual std::vector<Proposal> segment_everything(const ImageInput& image) = 0;
  /// Sorted by confidence descending, then phrase, then box coordinates.
  virtual std::vector<TextDetection> detect_by_text(const ImageInput& image,
                                                    std::span<const std::string> phrases) = 0;
  virtual std::vector<ImageTag> tag_image(const ImageInput& image) = 0;
  virtual Embedding embed_segment(const ImageInput& image, const BinaryMask& mask) = 0;
};

/// Canonical ordering for detection lists.
void sort_detections(std::vector<TextDetection>& detections);

/// Dimension of reference_embedding.
constexpr std::size_t kReferenceEmbeddingDim = 28;

/// Hand-computable segment descriptor: 8-bin histograms of R, G and B over the
/// masked pixels (each normalized to sum 1), then fill ratio, bbox aspect
/// w/(w+h), area fraction of the image and compactness; L2-normalized.
Embedding reference_embedding(const RgbImage& image, const BinaryMask& mask);

}  // namespace folioseg::provider
