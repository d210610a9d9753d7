#pragma once

// Mask and polygon kernel. All functions are pure; masks are immutable values.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace folioseg::geometry {

struct GridDims {
  std::int32_t width = 0;
  std::int32_t height = 0;

  std::uint64_t pixel_count() const noexcept {
    return static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  }
  bool contains(std::int64_t x, std::int64_t y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Throws InvalidArgument unless 1 <= width, height and width*height < 2^31.
void validate_dims(GridDims dims);

/// Half-open pixel box [x_min, x_max) x [y_min, y_max).
struct BBox {
  std::int32_t x_min = 0;
  std::int32_t y_min = 0;
  std::int32_t x_max = 0;
  std::int32_t y_max = 0;

  std::int32_t width() const noexcept { return x_max - x_min; }
  std::int32_t height() const noexcept { return y_max - y_min; }
  std::uint64_t area() const noexcept {
    return is_valid() ? static_cast<std::uint64_t>(width()) * static_cast<std::uint64_t>(height()) : 0;
  }
  bool is_valid() const noexcept {
    return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection of `box` with the image extent; nullopt when nothing is left.
std::optional<BBox> clip_box(const BBox& box, GridDims dims);
bool boxes_intersect(const BBox& a, const BBox& b) noexcept;

/// Row-major run-length mask. Runs alternate background/foreground and start
/// with a (possibly empty) background run; every later run is positive.
class BinaryMask {
 public:
  /// Validates the canonical form; throws InvalidArgument / DimensionMismatch.
  BinaryMask(GridDims dims, std::vector<std::uint32_t> runs);

  /// All-background mask.
  static BinaryMask empty(GridDims dims);

  GridDims dims() const noexcept { return dims_; }
  const std::vector<std::uint32_t>& runs() const noexcept { return runs_; }
  bool is_empty() const noexcept { return runs_.size() < 2; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  GridDims dims_;
  std::vector<std::uint32_t> runs_;
};

/// Row-major boolean grid; any non-zero byte is foreground.
using Bitmap = std::vector<std::uint8_t>;

BinaryMask rle_encode(std::span<const std::uint8_t> bitmap, GridDims dims);
Bitmap rle_decode(const BinaryMask& mask);

std::uint64_t mask_area(const BinaryMask& mask);
std::uint64_t intersection_area(const BinaryMask& a, const BinaryMask& b);
/// |a ∩ b| / |a ∪ b|, and 1 when both masks are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);
std::optional<BBox> mask_bbox(const BinaryMask& mask);
/// Number of pixel edges separating foreground from background or the border.
std::uint64_t crack_perimeter(const BinaryMask& mask);
/// 4*pi*A / P^2 clamped to [0, 1]; 0 for an empty mask.
double compactness(const BinaryMask& mask);

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask box_mask(const BBox& box, GridDims dims);

/// 4-connected component labels in row-major order of first pixel; 0 is
/// background and components are numbered from 1.
struct ComponentLabels {
  GridDims dims;
  std::vector<std::uint32_t> labels;
  std::uint32_t count = 0;
};
ComponentLabels label_components(std::span<const std::uint8_t> foreground, GridDims dims);

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Ring = std::vector<Point>;

/// x grows right, y grows down. Exterior rings are clockwise on screen
/// (positive shoelace area), holes counter-clockwise.
struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

double ring_signed_area(const Ring& ring);
/// Closed-ring Douglas-Peucker. Returns the input unchanged if the result
/// would degenerate below three vertices or zero area.
Ring simplify_ring(const Ring& ring, double tolerance);

/// One polygon per 4-connected foreground component, holes included, traced
/// along pixel cracks. tolerance 0 disables simplification.
std::vector<Polygon> polygonize(const BinaryMask& mask, double tolerance);

/// Pixel (i, j) is set iff (i + 0.5, j + 0.5) is inside under the even-odd
/// rule applied to every ring of the polygon.
BinaryMask rasterize(const Polygon& polygon, GridDims dims);
/// Union of the per-polygon rasterizations.
BinaryMask rasterize(std::span<const Polygon> polygons, GridDims dims);

/// Exact overlap counts behind consumed_fraction.
struct DropOverlap {
  std::uint64_t inside = 0;
  std::uint64_t area = 0;
  double fraction() const noexcept {
    return area == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(area);
  }
};
DropOverlap drop_overlap(const BinaryMask& target, const BBox& drop);
/// area(target ∩ drop) / area(target); throws InvalidArgument for empty target.
double consumed_fraction(const BinaryMask& target, const BBox& drop);

struct DropCandidate {
  std::string id;
  BinaryMask mask;
};

struct DropScore {
  std::string id;
  DropOverlap overlap;
};

/// Per-candidate overlaps in candidate order.
std::vector<DropScore> score_drop(const BBox& drop, std::span<const DropCandidate> candidates);
/// Candidate whose mask the drop box consumes the most. Ties: smaller area,
/// then smaller id. nullopt when nothing overlaps.
std::optional<std::string> assign_drop(const BBox& drop, std::span<const DropCandidate> candidates);

enum class ProposalSource { Prompted, Auto, TextGrounded };

struct Proposal {
  BinaryMask mask;
  double quality = 0.0;
  ProposalSource source = ProposalSource::Prompted;
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

std::string_view proposal_source_name(ProposalSource source) noexcept;
ProposalSource parse_proposal_source(std::string_view name);

/// Greedy suppression by descending quality (stable). A proposal is dropped
/// iff its IoU with an already kept proposal exceeds the threshold.
std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_threshold);

}  // namespace folioseg::geometry
