#include <algorithm>
#include <numeric>

#include "folioseg/error.hpp"
#include "folioseg/geometry.hpp"
#include "runs.hpp"

namespace folioseg::geometry {

DropOverlap drop_overlap(const BinaryMask& target, const BBox& drop) {
  DropOverlap out;
  out.area = mask_area(target);
  const auto clipped = clip_box(drop, target.dims());
  if (!clipped) return out;
  const auto width = static_cast<std::uint64_t>(target.dims().width);
  for (const auto& iv : detail::foreground_intervals(target)) {
    auto pos = iv.begin;
    while (pos < iv.end) {
      const auto row = pos / width;
      const auto row_end = std::min(iv.end, (row + 1) * width);
      if (row >= static_cast<std::uint64_t>(clipped->y_min) && row < static_cast<std::uint64_t>(clipped->y_max)) {
        const auto lo = std::max(pos - row * width, static_cast<std::uint64_t>(clipped->x_min));
        const auto hi = std::min(row_end - row * width, static_cast<std::uint64_t>(clipped->x_max));
        if (lo < hi) out.inside += hi - lo;
      }
      pos = row_end;
    }
  }
  return out;
}

double consumed_fraction(const BinaryMask& target, const BBox& drop) {
  const auto overlap = drop_overlap(target, drop);
  require(overlap.area > 0, ErrorCode::InvalidArgument, "consumed_fraction of an empty target");
  return overlap.fraction();
}

std::vector<DropScore> score_drop(const BBox& drop, std::span<const DropCandidate> candidates) {
  std::vector<DropScore> scores;
  scores.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    require(candidates[i].mask.dims() == candidates.front().mask.dims(), ErrorCode::DimensionMismatch,
            "drop candidates have different dimensions");
    scores.push_back({candidates[i].id, drop_overlap(candidates[i].mask, drop)});
  }
  return scores;
}

std::optional<std::string> assign_drop(const BBox& drop, std::span<const DropCandidate> candidates) {
  const auto scores = score_drop(drop, candidates);
  const DropScore* best = nullptr;
  for (const auto& s : scores) {
    if (s.overlap.inside == 0) continue;
    if (best == nullptr) {
      best = &s;
      continue;
    }
    // Compare inside/area exactly by cross-multiplication.
    const auto lhs = static_cast<unsigned __int128>(s.overlap.inside) * best->overlap.area;
    const auto rhs = static_cast<unsigned __int128>(best->overlap.inside) * s.overlap.area;
    if (lhs > rhs || (lhs == rhs && (s.overlap.area < best->overlap.area ||
                                     (s.overlap.area == best->overlap.area && s.id < best->id)))) {
      best = &s;
    }
  }
  if (best == nullptr) return std::nullopt;
  return best->id;
}

std::string_view proposal_source_name(ProposalSource source) noexcept {
  switch (source) {
    case ProposalSource::Prompted: return "prompted";
    case ProposalSource::Auto: return "auto";
    case ProposalSource::TextGrounded: return "text_grounded";
  }
  return "prompted";
}

ProposalSource parse_proposal_source(std::string_view name) {
  if (name == "prompted") return ProposalSource::Prompted;
  if (name == "auto") return ProposalSource::Auto;
  if (name == "text_grounded") return ProposalSource::TextGrounded;
  fail(ErrorCode::Parse, "unknown proposal source '" + std::string(name) + "'");
}

std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_threshold) {
  require(iou_threshold >= 0.0 && iou_threshold <= 1.0, ErrorCode::InvalidArgument,
          "NMS threshold must lie in [0, 1]");
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].quality > proposals[b].quality;
  });
  std::vector<Proposal> kept;
  for (const auto idx : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Proposal& k) {
      return mask_iou(k.mask, proposals[idx].mask) > iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(proposals[idx]));
  }
  return kept;
}

}  // namespace folioseg::geometry
