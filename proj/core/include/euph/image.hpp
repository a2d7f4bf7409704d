#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace euph {

// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  static Image solid(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::span<const std::uint8_t> bytes() const { return rgb; }
  bool valid() const {
    return width > 0 && height > 0 && rgb.size() == static_cast<std::size_t>(width) * height * 3;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Binary PPM (P6) whose header carries "# sha256 <hex>" of the pixel bytes.
std::string encode_ppm(const Image& img);
// Throws CacheCorruption on a malformed header, truncated body or digest
// mismatch.
Image decode_ppm(std::string_view bytes);

std::string encode_png(const Image& img);

// Tiles images row-major on a near-square grid (3x3 for nine images), each
// resampled to tile x tile with nearest neighbour, separated by `gap` pixels.
Image contact_sheet(std::span<const Image> images, int tile = 64, int gap = 2);

// Columns used by contact_sheet for n images.
int sheet_columns(std::size_t n);

}  // namespace euph
