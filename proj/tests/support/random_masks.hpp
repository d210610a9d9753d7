#pragma once

// Test-only mask generators and brute-force oracles. Nothing here calls the
// run-length code paths it is used to check.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "folioseg/geometry.hpp"

namespace testsupport {

using folioseg::geometry::Bitmap;
using folioseg::geometry::GridDims;

inline Bitmap random_bitmap(std::mt19937& rng, GridDims dims, double density) {
  std::bernoulli_distribution on(density);
  Bitmap out(dims.pixel_count());
  for (auto& px : out) px = on(rng) ? 1 : 0;
  return out;
}

/// Background pixels not 8-connected to the border get filled, so the blob
/// has no holes once foreground is read as 4-connected.
inline void fill_enclosed_background(Bitmap& bitmap, GridDims dims) {
  const int w = dims.width;
  const int h = dims.height;
  std::vector<std::uint8_t> outside(bitmap.size(), 0);
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if ((x == 0 || y == 0 || x == w - 1 || y == h - 1) && bitmap[y * w + x] == 0) {
        outside[y * w + x] = 1;
        stack.push_back(y * w + x);
      }
    }
  }
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    const int x = idx % w;
    const int y = idx / w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int n = ny * w + nx;
        if (bitmap[n] == 0 && outside[n] == 0) {
          outside[n] = 1;
          stack.push_back(n);
        }
      }
    }
  }
  for (std::size_t i = 0; i < bitmap.size(); ++i) {
    if (bitmap[i] == 0 && outside[i] == 0) bitmap[i] = 1;
  }
}

/// 4-connected random growth from a seed, then hole filling.
inline Bitmap random_blob(std::mt19937& rng, GridDims dims, int target_pixels) {
  const int w = dims.width;
  const int h = dims.height;
  Bitmap out(dims.pixel_count(), 0);
  std::vector<int> frontier;
  auto add = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h || out[y * w + x]) return false;
    out[y * w + x] = 1;
    frontier.push_back(y * w + x);
    return true;
  };
  std::uniform_int_distribution<int> px(0, w - 1);
  std::uniform_int_distribution<int> py(0, h - 1);
  add(px(rng), py(rng));
  int count = 1;
  std::uniform_int_distribution<int> dir(0, 3);
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  int attempts = 0;
  while (count < target_pixels && attempts < target_pixels * 50) {
    ++attempts;
    std::uniform_int_distribution<std::size_t> pick(0, frontier.size() - 1);
    const int idx = frontier[pick(rng)];
    const int d = dir(rng);
    if (add(idx % w + dx[d], idx / w + dy[d])) ++count;
  }
  fill_enclosed_background(out, dims);
  return out;
}

/// Filled shape with random rectangular holes and a few islands inside them.
inline Bitmap random_holey_mask(std::mt19937& rng, GridDims dims) {
  const int w = dims.width;
  const int h = dims.height;
  Bitmap out(dims.pixel_count(), 0);
  std::uniform_int_distribution<int> coord(0, std::min(w, h) / 4);
  const int x0 = coord(rng);
  const int y0 = coord(rng);
  const int x1 = w - coord(rng);
  const int y1 = h - coord(rng);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) out[y * w + x] = 1;
  std::uniform_int_distribution<int> holes(1, 5);
  const int n = holes(rng);
  for (int k = 0; k < n; ++k) {
    std::uniform_int_distribution<int> hx(x0 + 1, std::max(x0 + 1, x1 - 6));
    std::uniform_int_distribution<int> hy(y0 + 1, std::max(y0 + 1, y1 - 6));
    std::uniform_int_distribution<int> size(2, 6);
    const int ax = hx(rng);
    const int ay = hy(rng);
    const int bx = std::min(x1 - 1, ax + size(rng));
    const int by = std::min(y1 - 1, ay + size(rng));
    for (int y = ay; y < by; ++y)
      for (int x = ax; x < bx; ++x) out[y * w + x] = 0;
    if (bx - ax >= 3 && by - ay >= 3) out[(ay + 1) * w + ax + 1] = 1;
  }
  // Random speckle: noise pixels and noise holes.
  std::uniform_int_distribution<int> any(0, w * h - 1);
  for (int k = 0; k < w * h / 50; ++k) out[any(rng)] ^= 1;
  return out;
}

inline std::uint64_t popcount(const Bitmap& bitmap) {
  return static_cast<std::uint64_t>(std::count_if(bitmap.begin(), bitmap.end(), [](auto v) { return v != 0; }));
}

/// Nearest-neighbour upscaling by an integer factor.
inline Bitmap upscale(const Bitmap& bitmap, GridDims dims, int factor) {
  const int w = dims.width * factor;
  Bitmap out(static_cast<std::size_t>(w) * dims.height * factor, 0);
  for (int y = 0; y < dims.height * factor; ++y)
    for (int x = 0; x < w; ++x) out[y * w + x] = bitmap[(y / factor) * dims.width + x / factor];
  return out;
}

/// Crossing-number point-in-polygon test over every ring.
inline bool inside_even_odd(const folioseg::geometry::Polygon& polygon, double px, double py) {
  bool inside = false;
  auto ring_test = [&](const folioseg::geometry::Ring& ring) {
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const auto& a = ring[i];
      const auto& b = ring[j];
      if (((a.y > py) != (b.y > py)) && (px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x)) {
        inside = !inside;
      }
    }
  };
  ring_test(polygon.exterior);
  for (const auto& hole : polygon.holes) ring_test(hole);
  return inside;
}

}  // namespace testsupport
