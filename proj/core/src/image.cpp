#include "euph/image.hpp"

#include <png.h>

#include <charconv>
#include <cmath>

#include "euph/error.hpp"
#include "euph/hash.hpp"

namespace euph {

Image Image::solid(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image img{width, height, {}};
  img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

std::string encode_ppm(const Image& img) {
  if (!img.valid()) throw UsageError("encode_ppm: invalid image");
  std::string out = "P6\n# sha256 " + to_hex(sha256(img.bytes())) + "\n" + std::to_string(img.width) +
                    " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

namespace {

std::string_view next_line(std::string_view& in) {
  auto nl = in.find('\n');
  if (nl == std::string_view::npos) throw CacheCorruption("ppm: truncated header");
  auto line = in.substr(0, nl);
  in.remove_prefix(nl + 1);
  return line;
}

int parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw CacheCorruption("ppm: bad integer in header");
  return v;
}

}  // namespace

Image decode_ppm(std::string_view in) {
  if (next_line(in) != "P6") throw CacheCorruption("ppm: bad magic");
  auto comment = next_line(in);
  constexpr std::string_view kTag = "# sha256 ";
  if (!comment.starts_with(kTag)) throw CacheCorruption("ppm: missing digest comment");
  auto expected = comment.substr(kTag.size());
  auto dims = next_line(in);
  auto sp = dims.find(' ');
  if (sp == std::string_view::npos) throw CacheCorruption("ppm: bad dimensions");
  Image img;
  img.width = parse_int(dims.substr(0, sp));
  img.height = parse_int(dims.substr(sp + 1));
  if (next_line(in) != "255") throw CacheCorruption("ppm: unsupported maxval");
  if (img.width <= 0 || img.height <= 0) throw CacheCorruption("ppm: bad dimensions");
  const auto n = static_cast<std::size_t>(img.width) * img.height * 3;
  if (in.size() != n) throw CacheCorruption("ppm: body has " + std::to_string(in.size()) + " bytes, expected " + std::to_string(n));
  img.rgb.assign(in.begin(), in.end());
  if (to_hex(sha256(img.bytes())) != expected) throw CacheCorruption("ppm: digest mismatch");
  return img;
}

std::string encode_png(const Image& img) {
  if (!img.valid()) throw UsageError("encode_png: invalid image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw BackendError("libpng init failed");
  }
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw BackendError("libpng write failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

int sheet_columns(std::size_t n) {
  int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  return cols < 1 ? 1 : cols;
}

Image contact_sheet(std::span<const Image> images, int tile, int gap) {
  if (images.empty()) throw UsageError("contact_sheet: no images");
  if (tile <= 0 || gap < 0) throw UsageError("contact_sheet: bad geometry");
  const int cols = sheet_columns(images.size());
  const int rows = static_cast<int>((images.size() + cols - 1) / cols);
  Image sheet = Image::solid(cols * tile + (cols + 1) * gap, rows * tile + (rows + 1) * gap, 255, 255, 255);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& src = images[i];
    if (!src.valid()) throw UsageError("contact_sheet: invalid tile " + std::to_string(i));
    const int ox = gap + static_cast<int>(i % cols) * (tile + gap);
    const int oy = gap + static_cast<int>(i / cols) * (tile + gap);
    for (int y = 0; y < tile; ++y) {
      const int sy = y * src.height / tile;
      for (int x = 0; x < tile; ++x) {
        const int sx = x * src.width / tile;
        const auto* s = &src.rgb[(static_cast<std::size_t>(sy) * src.width + sx) * 3];
        auto* d = &sheet.rgb[(static_cast<std::size_t>(oy + y) * sheet.width + ox + x) * 3];
        d[0] = s[0];
        d[1] = s[1];
        d[2] = s[2];
      }
    }
  }
  return sheet;
}

}  // namespace euph
