#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "folioseg/error.hpp"
#include "folioseg/geometry.hpp"
#include "runs.hpp"

namespace folioseg::geometry {

using detail::Interval;

void validate_dims(GridDims dims) {
  require(dims.width >= 1 && dims.height >= 1, ErrorCode::InvalidArgument,
          "grid dimensions must be positive");
  require(dims.pixel_count() <= static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max()),
          ErrorCode::InvalidArgument, "grid exceeds 2^31-1 pixels");
}

std::optional<BBox> clip_box(const BBox& box, GridDims dims) {
  BBox out{std::max(box.x_min, 0), std::max(box.y_min, 0), std::min(box.x_max, dims.width),
           std::min(box.y_max, dims.height)};
  if (!out.is_valid()) return std::nullopt;
  return out;
}

bool boxes_intersect(const BBox& a, const BBox& b) noexcept {
  return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

BinaryMask::BinaryMask(GridDims dims, std::vector<std::uint32_t> runs)
    : dims_(dims), runs_(std::move(runs)) {
  validate_dims(dims_);
  require(!runs_.empty(), ErrorCode::InvalidArgument, "mask has no runs");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < runs_.size(); ++i) {
    require(i == 0 || runs_[i] > 0, ErrorCode::InvalidArgument,
            "zero-length run after the leading background run");
    total += runs_[i];
  }
  require(total == dims_.pixel_count(), ErrorCode::DimensionMismatch,
          "run lengths sum to " + std::to_string(total) + ", expected " +
              std::to_string(dims_.pixel_count()));
}

BinaryMask BinaryMask::empty(GridDims dims) {
  validate_dims(dims);
  return BinaryMask(dims, {static_cast<std::uint32_t>(dims.pixel_count())});
}

BinaryMask rle_encode(std::span<const std::uint8_t> bitmap, GridDims dims) {
  validate_dims(dims);
  require(bitmap.size() == dims.pixel_count(), ErrorCode::DimensionMismatch,
          "bitmap has " + std::to_string(bitmap.size()) + " pixels, expected " +
              std::to_string(dims.pixel_count()));
  std::vector<std::uint32_t> runs;
  bool current = false;
  std::uint32_t length = 0;
  for (const auto px : bitmap) {
    const bool value = px != 0;
    if (value != current) {
      runs.push_back(length);
      current = value;
      length = 0;
    }
    ++length;
  }
  runs.push_back(length);
  return BinaryMask(dims, std::move(runs));
}

Bitmap rle_decode(const BinaryMask& mask) {
  Bitmap out;
  out.reserve(mask.dims().pixel_count());
  const auto& runs = mask.runs();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out.insert(out.end(), runs[i], static_cast<std::uint8_t>(i % 2));
  }
  if (out.size() != mask.dims().pixel_count()) {
    fail(ErrorCode::DimensionMismatch, "run sum does not match mask dimensions");
  }
  return out;
}

std::uint64_t mask_area(const BinaryMask& mask) {
  std::uint64_t area = 0;
  const auto& runs = mask.runs();
  for (std::size_t i = 1; i < runs.size(); i += 2) area += runs[i];
  return area;
}

std::uint64_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require(a.dims() == b.dims(), ErrorCode::DimensionMismatch, "masks have different dimensions");
  const auto ia = detail::foreground_intervals(a);
  const auto ib = detail::foreground_intervals(b);
  std::uint64_t total = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ia.size() && j < ib.size()) {
    const auto lo = std::max(ia[i].begin, ib[j].begin);
    const auto hi = std::min(ia[i].end, ib[j].end);
    if (lo < hi) total += hi - lo;
    if (ia[i].end < ib[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  const auto inter = intersection_area(a, b);
  const auto uni = mask_area(a) + mask_area(b) - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<BBox> mask_bbox(const BinaryMask& mask) {
  if (mask.is_empty()) return std::nullopt;
  const auto width = static_cast<std::uint64_t>(mask.dims().width);
  std::int32_t x_min = mask.dims().width;
  std::int32_t x_max = 0;
  std::int32_t y_min = mask.dims().height;
  std::int32_t y_max = 0;
  for (const auto& iv : detail::foreground_intervals(mask)) {
    const auto row_first = static_cast<std::int32_t>(iv.begin / width);
    const auto row_last = static_cast<std::int32_t>((iv.end - 1) / width);
    y_min = std::min(y_min, row_first);
    y_max = std::max(y_max, row_last + 1);
    if (row_first != row_last) {
      x_min = 0;
      x_max = mask.dims().width;
    } else {
      x_min = std::min(x_min, static_cast<std::int32_t>(iv.begin % width));
      x_max = std::max(x_max, static_cast<std::int32_t>((iv.end - 1) % width) + 1);
    }
  }
  return BBox{x_min, y_min, x_max, y_max};
}

std::uint64_t crack_perimeter(const BinaryMask& mask) {
  const auto bitmap = rle_decode(mask);
  const auto w = mask.dims().width;
  const auto h = mask.dims().height;
  std::uint64_t perimeter = 0;
  auto at = [&](std::int32_t x, std::int32_t y) {
    return x >= 0 && y >= 0 && x < w && y < h && bitmap[static_cast<std::size_t>(y) * w + x] != 0;
  };
  for (std::int32_t y = 0; y < h; ++y) {
    for (std::int32_t x = 0; x < w; ++x) {
      if (!at(x, y)) continue;
      perimeter += !at(x - 1, y) + !at(x + 1, y) + !at(x, y - 1) + !at(x, y + 1);
    }
  }
  return perimeter;
}

double compactness(const BinaryMask& mask) {
  const auto area = static_cast<double>(mask_area(mask));
  if (area == 0.0) return 0.0;
  const auto perimeter = static_cast<double>(crack_perimeter(mask));
  return std::clamp(4.0 * std::numbers::pi * area / (perimeter * perimeter), 0.0, 1.0);
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require(a.dims() == b.dims(), ErrorCode::DimensionMismatch, "masks have different dimensions");
  auto ia = detail::foreground_intervals(a);
  const auto ib = detail::foreground_intervals(b);
  ia.insert(ia.end(), ib.begin(), ib.end());
  std::sort(ia.begin(), ia.end(), [](const Interval& l, const Interval& r) { return l.begin < r.begin; });
  std::vector<Interval> merged;
  for (const auto& iv : ia) {
    if (!merged.empty() && iv.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, iv.end);
    } else {
      merged.push_back(iv);
    }
  }
  return detail::from_intervals(a.dims(), merged);
}

BinaryMask box_mask(const BBox& box, GridDims dims) {
  validate_dims(dims);
  const auto clipped = clip_box(box, dims);
  if (!clipped) return BinaryMask::empty(dims);
  std::vector<Interval> intervals;
  const auto w = static_cast<std::uint64_t>(dims.width);
  for (auto y = clipped->y_min; y < clipped->y_max; ++y) {
    intervals.push_back({y * w + clipped->x_min, y * w + clipped->x_max});
  }
  return detail::from_intervals(dims, intervals);
}

ComponentLabels label_components(std::span<const std::uint8_t> foreground, GridDims dims) {
  validate_dims(dims);
  require(foreground.size() == dims.pixel_count(), ErrorCode::DimensionMismatch,
          "foreground grid does not match dimensions");
  ComponentLabels out{dims, std::vector<std::uint32_t>(foreground.size(), 0), 0};
  const auto w = dims.width;
  const auto h = dims.height;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < foreground.size(); ++start) {
    if (foreground[start] == 0 || out.labels[start] != 0) continue;
    const auto label = ++out.count;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto idx = stack.back();
      stack.pop_back();
      const auto x = static_cast<std::int32_t>(idx % w);
      const auto y = static_cast<std::int32_t>(idx / w);
      auto visit = [&](std::int32_t nx, std::int32_t ny) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
        const auto n = static_cast<std::size_t>(ny) * w + nx;
        if (foreground[n] != 0 && out.labels[n] == 0) {
          out.labels[n] = label;
          stack.push_back(n);
        }
      };
      visit(x + 1, y);
      visit(x - 1, y);
      visit(x, y + 1);
      visit(x, y - 1);
    }
  }
  return out;
}

}  // namespace folioseg::geometry
