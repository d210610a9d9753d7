#pragma once

#include <cstdint>
#include <vector>

#include "folioseg/geometry.hpp"

namespace folioseg::geometry::detail {

/// Foreground run [begin, end) in row-major pixel index space.
struct Interval {
  std::uint64_t begin;
  std::uint64_t end;
};

inline std::vector<Interval> foreground_intervals(const BinaryMask& mask) {
  std::vector<Interval> out;
  const auto& runs = mask.runs();
  out.reserve(runs.size() / 2);
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i % 2 == 1) out.push_back({pos, pos + runs[i]});
    pos += runs[i];
  }
  return out;
}

/// Rebuilds canonical runs from sorted, non-overlapping intervals.
inline BinaryMask from_intervals(GridDims dims, const std::vector<Interval>& intervals) {
  std::vector<std::uint32_t> runs;
  std::uint64_t pos = 0;
  for (const auto& iv : intervals) {
    if (iv.begin == iv.end) continue;
    if (!runs.empty() && runs.size() % 2 == 0 && iv.begin == pos) {
      runs.back() += static_cast<std::uint32_t>(iv.end - iv.begin);
    } else {
      runs.push_back(static_cast<std::uint32_t>(iv.begin - pos));
      runs.push_back(static_cast<std::uint32_t>(iv.end - iv.begin));
    }
    pos = iv.end;
  }
  const auto total = dims.pixel_count();
  if (runs.empty()) {
    runs.push_back(static_cast<std::uint32_t>(total));
  } else if (pos < total) {
    runs.push_back(static_cast<std::uint32_t>(total - pos));
  }
  return BinaryMask(dims, std::move(runs));
}

}  // namespace folioseg::geometry::detail
