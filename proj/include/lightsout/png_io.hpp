#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightsout/image.hpp"

namespace lightsout {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t to_u8(double v) {
  const double scaled = std::round(clamp01(v) * 255.0);
  return static_cast<std::uint8_t>(scaled);
}

// Reads any PNG as 8-bit RGB rows (libpng transforms applied uniformly so a
// grayscale source and an RGB source of the same content decode identically).
inline std::vector<std::uint8_t> read_png_rgb8(const std::string& path, int& h, int& w) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open PNG for reading: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("PNG decode error: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  h = static_cast<int>(height);
  w = static_cast<int>(width);
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h) * w * 3);
  std::vector<png_bytep> row_ptrs(height);
  for (png_uint_32 y = 0; y < height; ++y)
    row_ptrs[y] = rows.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return rows;
}

// Writes 8-bit rows. Fixed compression settings and no ancillary chunks so
// identical pixels produce identical bytes on disk.
inline void write_png8(const std::string& path, const std::uint8_t* rows, int h, int w,
                       int channels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open PNG for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode error: " + path);
  }

  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, w, h, 8, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> row_ptrs(h);
  for (int y = 0; y < h; ++y)
    row_ptrs[y] = const_cast<png_bytep>(rows + static_cast<std::size_t>(y) * w * channels);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

inline Image read_image_png(const std::string& path) {
  int h = 0, w = 0;
  const auto rows = detail::read_png_rgb8(path, h, w);
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = rows[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
  return img;
}

inline void write_image_png(const std::string& path, const Image& img) {
  const int h = img.height(), w = img.width();
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        rows[(static_cast<std::size_t>(y) * w + x) * 3 + c] = detail::to_u8(img.at(c, y, x));
  detail::write_png8(path, rows.data(), h, w, 3);
}

// Hard masks round-trip as 0/255 grayscale.
inline BinaryMask read_mask_png(const std::string& path) {
  int h = 0, w = 0;
  const auto rows = detail::read_png_rgb8(path, h, w);
  BinaryMask mask(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = rows[(static_cast<std::size_t>(y) * w + x) * 3];
      mask.at(y, x) = v >= 128 ? 1 : 0;
    }
  return mask;
}

inline void write_mask_png(const std::string& path, const BinaryMask& mask) {
  const int h = mask.height(), w = mask.width();
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      rows[static_cast<std::size_t>(y) * w + x] = mask.at(y, x) ? 255 : 0;
  detail::write_png8(path, rows.data(), h, w, 1);
}

inline SoftMask read_softmask_png(const std::string& path) {
  int h = 0, w = 0;
  const auto rows = detail::read_png_rgb8(path, h, w);
  SoftMask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      m.at(y, x) = rows[(static_cast<std::size_t>(y) * w + x) * 3] / 255.0;
  return m;
}

inline void write_softmask_png(const std::string& path, const SoftMask& m) {
  const int h = m.height(), w = m.width();
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      rows[static_cast<std::size_t>(y) * w + x] = detail::to_u8(m.at(y, x));
  detail::write_png8(path, rows.data(), h, w, 1);
}

}  // namespace lightsout
