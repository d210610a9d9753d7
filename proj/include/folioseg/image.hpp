#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "folioseg/geometry.hpp"

namespace folioseg {

/// 8-bit interleaved RGB raster.
struct RgbImage {
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::int32_t w, std::int32_t h, std::uint32_t fill = 0);

  geometry::GridDims dims() const noexcept { return {width, height}; }
  /// Packed 0xRRGGBB.
  std::uint32_t color_at(std::int32_t x, std::int32_t y) const noexcept;
  void set(std::int32_t x, std::int32_t y, std::uint32_t rgb) noexcept;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Decodes PNG or JPEG bytes (sniffed by signature) to RGB.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
RgbImage load_image(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RgbImage& image);
void write_png(const RgbImage& image, const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
/// Content key of the decoded raster (dimensions and pixels), independent of
/// the container format the image arrived in.
std::string pixel_key(const RgbImage& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace folioseg
