#pragma once

// Synthetic folio fixtures with ground-truth sidecars. Every labeled region is
// the bounding rectangle of exactly one object, so box prompts built from a
// region select that object alone.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "folioseg/image.hpp"
#include "folioseg/mock_provider.hpp"

namespace testsupport {

using folioseg::RgbImage;
using folioseg::geometry::BBox;
using folioseg::geometry::Polygon;
using folioseg::provider::GroundTruth;

constexpr std::uint32_t kParchment = 0xF0E6C8;
constexpr std::uint32_t kRed = 0xC0201A;
constexpr std::uint32_t kBlue = 0x1F3FA0;
constexpr std::uint32_t kGold = 0xD4A017;
constexpr std::uint32_t kGreen = 0x2E7D32;
constexpr std::uint32_t kInk = 0x202020;

struct Fixture {
  std::string name;
  RgbImage image;
  GroundTruth truth;
};

inline void fill_rect(RgbImage& img, BBox b, std::uint32_t color) {
  for (int y = b.y_min; y < b.y_max; ++y)
    for (int x = b.x_min; x < b.x_max; ++x) img.set(x, y, color);
}

inline BBox fill_disk(RgbImage& img, int cx, int cy, int r, std::uint32_t color) {
  for (int y = cy - r; y <= cy + r; ++y)
    for (int x = cx - r; x <= cx + r; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.set(x, y, color);
  return BBox{cx - r, cy - r, cx + r + 1, cy + r + 1};
}

inline BBox fill_ring(RgbImage& img, int cx, int cy, int r_out, int r_in, std::uint32_t color) {
  for (int y = cy - r_out; y <= cy + r_out; ++y)
    for (int x = cx - r_out; x <= cx + r_out; ++x) {
      const int d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 <= r_out * r_out && d2 > r_in * r_in) img.set(x, y, color);
    }
  return BBox{cx - r_out, cy - r_out, cx + r_out + 1, cy + r_out + 1};
}

inline BBox fill_triangle(RgbImage& img, int x0, int y0, int size, std::uint32_t color) {
  for (int y = 0; y < size; ++y)
    for (int x = 0; x <= y; ++x) img.set(x0 + x, y0 + y, color);
  return BBox{x0, y0, x0 + size, y0 + size};
}

inline Polygon rect_polygon(BBox b) {
  return Polygon{{{static_cast<double>(b.x_min), static_cast<double>(b.y_min)},
                  {static_cast<double>(b.x_max), static_cast<double>(b.y_min)},
                  {static_cast<double>(b.x_max), static_cast<double>(b.y_max)},
                  {static_cast<double>(b.x_min), static_cast<double>(b.y_max)}},
                 {}};
}

/// Two disks: "dragon" (red, left) and "moine" (blue, right).
inline Fixture two_disks() {
  Fixture f{"two_disks", RgbImage(64, 64, kParchment), {}};
  const auto a = fill_disk(f.image, 18, 32, 10, kRed);
  const auto b = fill_disk(f.image, 46, 32, 10, kBlue);
  f.truth.regions = {{"dragon", rect_polygon(a)}, {"moine", rect_polygon(b)}};
  return f;
}

/// Three separate objects of different shapes.
inline Fixture three_components() {
  Fixture f{"three_components", RgbImage(96, 64, kParchment), {}};
  const BBox rect{6, 8, 30, 40};
  fill_rect(f.image, rect, kGreen);
  const auto disk = fill_disk(f.image, 52, 24, 12, kGold);
  const auto tri = fill_triangle(f.image, 70, 30, 20, kInk);
  f.truth.regions = {{"arbre", rect_polygon(rect)}, {"codex", rect_polygon(disk)}, {"crosse", rect_polygon(tri)}};
  return f;
}

/// Components of area 400 (20x20) and 50 (10x5).
inline Fixture areas_400_50() {
  Fixture f{"areas_400_50", RgbImage(64, 64, kParchment), {}};
  const BBox big{8, 8, 28, 28};
  const BBox small{40, 40, 50, 45};
  fill_rect(f.image, big, kRed);
  fill_rect(f.image, small, kBlue);
  f.truth.regions = {{"faucon", rect_polygon(big)}, {"renard", rect_polygon(small)}};
  return f;
}

/// Folio-like page: a medallion ring enclosing a codex, a two-colored rock,
/// a diagonal pinch and a marginal halo.
inline Fixture folio_53v() {
  Fixture f{"lat18_53v", RgbImage(256, 256, kParchment), {}};
  fill_ring(f.image, 70, 70, 40, 30, kGold);          // unlabeled medallion frame
  const auto codex = fill_disk(f.image, 70, 70, 12, kRed);
  BBox rock{150, 40, 190, 70};
  fill_rect(f.image, rock, 0x7F7F7F);
  fill_rect(f.image, BBox{190, 40, 210, 70}, 0x5A5A5A);  // touching, different color: same object
  rock.x_max = 210;
  const auto halo = fill_ring(f.image, 190, 200, 25, 15, kGold);
  // Diagonal pinch: two squares meeting only at a corner are separate objects.
  fill_rect(f.image, BBox{30, 180, 50, 200}, kBlue);
  fill_rect(f.image, BBox{50, 200, 70, 220}, kBlue);
  f.truth.regions = {{"codex", rect_polygon(codex)}, {"rocher", rect_polygon(rock)}, {"auréole", rect_polygon(halo)}};
  return f;
}

/// Marginal figures of a second folio.
inline Fixture folio_1r() {
  Fixture f{"lat22_1r", RgbImage(200, 160, kParchment), {}};
  const auto monk = fill_disk(f.image, 40, 40, 15, kBlue);
  const BBox crozier{80, 20, 86, 70};
  fill_rect(f.image, crozier, kGold);
  const auto mitre = fill_triangle(f.image, 110, 20, 24, kRed);
  const BBox tree{150, 90, 190, 150};
  fill_rect(f.image, tree, kGreen);
  const auto falcon = fill_disk(f.image, 40, 120, 18, kInk);
  f.truth.regions = {{"moine", rect_polygon(monk)},   {"crosse", rect_polygon(crozier)},
                     {"mitre", rect_polygon(mitre)},  {"arbre", rect_polygon(tree)},
                     {"faucon", rect_polygon(falcon)}};
  return f;
}

inline Fixture blank() { return Fixture{"blank", RgbImage(32, 32, kParchment), {}}; }

inline std::vector<Fixture> all_fixtures() {
  return {two_disks(), three_components(), areas_400_50(), folio_53v(), folio_1r(), blank()};
}

/// Writes `<dir>/<name>.png` and its sidecar; returns the image path.
inline std::filesystem::path write_fixture(const Fixture& f, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (f.name + ".png");
  folioseg::write_png(f.image, path);
  folioseg::write_file_atomic(folioseg::provider::truth_path_for(path), folioseg::provider::truth_to_json(f.truth));
  return path;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("folioseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
