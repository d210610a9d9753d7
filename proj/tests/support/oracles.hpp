#pragma once

// Brute-force references for the mock provider: breadth-first flood fill over
// the raw RGB grid, with no use of the library's component labeling.

#include <cmath>
#include <map>
#include <queue>
#include <vector>

#include "folioseg/image.hpp"
#include "folioseg/provider.hpp"

namespace testsupport {

inline std::uint32_t oracle_background(const folioseg::RgbImage& img) {
  std::map<std::uint32_t, int> counts;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) ++counts[img.color_at(x, y)];
  std::uint32_t best = 0;
  int best_count = -1;
  for (const auto& [c, n] : counts)  // ascending colors: first maximum wins ties
    if (n > best_count) {
      best = c;
      best_count = n;
    }
  return best;
}

/// Pixels 4-connected to (x, y) through non-background; empty if (x, y) is background.
inline std::vector<std::uint8_t> flood_fill(const folioseg::RgbImage& img, std::uint32_t bg, int x, int y) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.width) * img.height, 0);
  if (img.color_at(x, y) == bg) return out;
  std::queue<std::pair<int, int>> q;
  q.push({x, y});
  out[y * img.width + x] = 1;
  while (!q.empty()) {
    const auto [cx, cy] = q.front();
    q.pop();
    const int nx[4] = {cx + 1, cx - 1, cx, cx};
    const int ny[4] = {cy, cy, cy + 1, cy - 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= img.width || ny[k] >= img.height) continue;
      auto& v = out[ny[k] * img.width + nx[k]];
      if (v == 0 && img.color_at(nx[k], ny[k]) != bg) {
        v = 1;
        q.push({nx[k], ny[k]});
      }
    }
  }
  return out;
}

/// All components, each as a full-size bitmap.
inline std::vector<std::vector<std::uint8_t>> oracle_components(const folioseg::RgbImage& img) {
  const auto bg = oracle_background(img);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(img.width) * img.height, 0);
  std::vector<std::vector<std::uint8_t>> out;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (seen[y * img.width + x] || img.color_at(x, y) == bg) continue;
      auto comp = flood_fill(img, bg, x, y);
      for (std::size_t i = 0; i < comp.size(); ++i) seen[i] |= comp[i];
      out.push_back(std::move(comp));
    }
  return out;
}

/// Reference semantics of a prompted segmentation over flood-filled components.
inline std::vector<std::uint8_t> oracle_prompt_result(const std::vector<std::vector<std::uint8_t>>& comps,
                                                      folioseg::geometry::GridDims dims,
                                                      const folioseg::provider::PromptSet& prompts) {
  using folioseg::provider::Polarity;
  const int w = dims.width;
  auto in_comp = [&](std::size_t k, double px, double py) {
    return comps[k][static_cast<int>(std::floor(py)) * w + static_cast<int>(std::floor(px))] != 0;
  };
  std::vector<bool> eligible(comps.size(), true);
  if (prompts.box) {
    for (std::size_t k = 0; k < comps.size(); ++k) {
      int inside = 0;
      int area = 0;
      for (int y = 0; y < dims.height; ++y)
        for (int x = 0; x < w; ++x) {
          if (!comps[k][y * w + x]) continue;
          ++area;
          inside += (x >= prompts.box->x_min && x < prompts.box->x_max && y >= prompts.box->y_min &&
                     y < prompts.box->y_max);
        }
      eligible[k] = inside * 2 > area;
    }
  }
  std::vector<bool> chosen(comps.size(), false);
  bool positives = false;
  for (const auto& p : prompts.points) {
    if (p.polarity != Polarity::Positive) continue;
    positives = true;
    for (std::size_t k = 0; k < comps.size(); ++k) chosen[k] = chosen[k] || (eligible[k] && in_comp(k, p.x, p.y));
  }
  if (!positives) chosen = eligible;
  for (const auto& p : prompts.points) {
    if (p.polarity != Polarity::Negative) continue;
    for (std::size_t k = 0; k < comps.size(); ++k)
      if (in_comp(k, p.x, p.y)) chosen[k] = false;
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * dims.height, 0);
  for (std::size_t k = 0; k < comps.size(); ++k)
    if (chosen[k])
      for (std::size_t i = 0; i < out.size(); ++i) out[i] |= comps[k][i];
  return out;
}

inline std::vector<std::uint8_t> oracle_prompt_result(const folioseg::RgbImage& img,
                                                      const folioseg::provider::PromptSet& prompts) {
  return oracle_prompt_result(oracle_components(img), img.dims(), prompts);
}

}  // namespace testsupport
