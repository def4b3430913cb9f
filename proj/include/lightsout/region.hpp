#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "lightsout/image.hpp"

namespace lightsout {

// Inclusive pixel box. Default-constructed state is the EMPTY sentinel
// (area 0), returned when no flare-free rectangle exists.
struct CropBox {
  int left = 0, right = -1, top = 0, bottom = -1;

  static CropBox whole(int height, int width) { return {0, width - 1, 0, height - 1}; }

  bool is_empty() const { return right < left || bottom < top; }
  int width() const { return is_empty() ? 0 : right - left + 1; }
  int height() const { return is_empty() ? 0 : bottom - top + 1; }
  long long area() const { return static_cast<long long>(width()) * height(); }

  bool operator==(const CropBox& o) const {
    return left == o.left && right == o.right && top == o.top && bottom == o.bottom;
  }
};

struct OutpaintCanvas {
  Image masked_image;   // crop content where mask=0, fill value elsewhere
  BinaryMask mask;      // 1 = region to generate
  CropBox origin_box;   // where the preserved content sits within the canvas
};

inline constexpr double kFillValue = 127.0 / 255.0;

// 1 where the pixel is at or above the luma threshold (saturated light pixels).
inline BinaryMask luminance_mask(const Image& img, double luma_threshold) {
  BinaryMask out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double luma =
          0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
      out.at(y, x) = luma >= luma_threshold ? 1 : 0;
    }
  return out;
}

namespace detail {

struct HistRect {
  long long area = 0;
  int left = 0, right = 0, height = 0;
};

// Largest rectangle under a histogram, stack method. Takes heights by value
// because it appends a terminating zero.
inline HistRect largest_rectangle(std::vector<long long> heights) {
  heights.push_back(0);
  std::vector<int> stack{-1};
  HistRect best;
  for (int i = 0; i < static_cast<int>(heights.size()); ++i) {
    while (stack.back() != -1 && heights[i] < heights[stack.back()]) {
      const long long h = heights[stack.back()];
      stack.pop_back();
      const int w = i - stack.back() - 1;
      const long long area = h * w;
      if (area > best.area) {
        best.area = area;
        best.left = stack.back() + 1;
        best.right = i - 1;
        best.height = static_cast<int>(h);
      }
    }
    stack.push_back(i);
  }
  return best;
}

}  // namespace detail

// Maximal axis-aligned rectangle containing no 1-pixels, found row by row with
// the histogram-of-heights trick. Ties go to the first row-major hit.
inline CropBox largest_flare_free_rect(const BinaryMask& bright) {
  const int h = bright.height(), w = bright.width();
  std::vector<long long> heights(w, 0);
  long long max_area = 0;
  CropBox best;  // EMPTY until something beats area 0
  for (int row = 0; row < h; ++row) {
    for (int x = 0; x < w; ++x) {
      const long long temp = 1 - bright.at(row, x);
      heights[x] = (heights[x] + temp) * temp;
    }
    const auto rect = detail::largest_rectangle(heights);
    if (rect.area > max_area) {
      max_area = rect.area;
      best = CropBox{rect.left, rect.right, row - rect.height + 1, row};
    }
  }
  return best;
}

inline Image crop_image(const Image& img, const CropBox& box) {
  if (box.is_empty()) throw std::invalid_argument("crop_image: empty box");
  if (box.left < 0 || box.top < 0 || box.right >= img.width() || box.bottom >= img.height())
    throw std::invalid_argument("crop_image: box out of bounds");
  Image out(box.height(), box.width());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < box.height(); ++y)
      for (int x = 0; x < box.width(); ++x)
        out.at(c, y, x) = img.at(c, box.top + y, box.left + x);
  return out;
}

inline BinaryMask crop_mask(const BinaryMask& m, const CropBox& box) {
  if (box.is_empty()) throw std::invalid_argument("crop_mask: empty box");
  if (box.left < 0 || box.top < 0 || box.right >= m.width() || box.bottom >= m.height())
    throw std::invalid_argument("crop_mask: box out of bounds");
  BinaryMask out(box.height(), box.width());
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x)
      out.at(y, x) = m.at(box.top + y, box.left + x);
  return out;
}

// Places the crop in a fill-valued canvas; the mask marks fill pixels with 1.
// Placement defaults to centered; pass place_top/place_left to pin it (used
// when the canvas should reproduce the source scene's geometry).
inline OutpaintCanvas build_outpaint_input(const Image& img, const CropBox& box, int canvas_h,
                                           int canvas_w, int place_top = -1, int place_left = -1) {
  if (box.is_empty()) throw std::invalid_argument("build_outpaint_input: empty box");
  if (canvas_h < box.height() || canvas_w < box.width())
    throw std::invalid_argument("build_outpaint_input: canvas smaller than crop");
  const int top = place_top >= 0 ? place_top : (canvas_h - box.height()) / 2;
  const int left = place_left >= 0 ? place_left : (canvas_w - box.width()) / 2;
  if (top + box.height() > canvas_h || left + box.width() > canvas_w)
    throw std::invalid_argument("build_outpaint_input: placement exceeds canvas");

  OutpaintCanvas canvas;
  canvas.masked_image = Image(canvas_h, canvas_w, kFillValue);
  canvas.mask = BinaryMask(canvas_h, canvas_w, 1);
  canvas.origin_box = CropBox{left, left + box.width() - 1, top, top + box.height() - 1};
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x) {
      canvas.mask.at(top + y, left + x) = 0;
      for (int c = 0; c < 3; ++c)
        canvas.masked_image.at(c, top + y, left + x) = img.at(c, box.top + y, box.left + x);
    }
  return canvas;
}

// Grows each box side outward by `shift`, clamped to image bounds. With the
// default 15 px this reintroduces a partial light source near the boundary.
inline CropBox scenario_incomplete(const Image& img, const CropBox& box, int shift = 15) {
  if (box.is_empty()) return box;
  if (shift < 0) throw std::invalid_argument("scenario_incomplete: negative shift");
  CropBox out;
  out.left = std::max(0, box.left - shift);
  out.top = std::max(0, box.top - shift);
  out.right = std::min(img.width() - 1, box.right + shift);
  out.bottom = std::min(img.height() - 1, box.bottom + shift);
  return out;
}

// Pulls the preserved-content region back out of a canvas-sized image.
inline Image extract_original_region(const Image& full, const OutpaintCanvas& canvas) {
  if (full.height() != canvas.masked_image.height() || full.width() != canvas.masked_image.width())
    throw std::invalid_argument("extract_original_region: image does not match canvas dims");
  return crop_image(full, canvas.origin_box);
}

}  // namespace lightsout
