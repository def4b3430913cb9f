#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightsout {

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Planar RGB image, values in [0,1], row-major per channel.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0)
      : h_(height), w_(width), data_(static_cast<std::size_t>(3) * height * width, fill) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("Image: dimensions must be positive");
  }

  int height() const { return h_; }
  int width() const { return w_; }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[idx(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[idx(c, y, x)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  bool same_shape(const Image& other) const { return h_ == other.h_ && w_ == other.w_; }

  Image clamped() const {
    Image out = *this;
    for (auto& v : out.data_) v = clamp01(v);
    return out;
  }

 private:
  std::size_t idx(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * h_ + y) * w_ + x;
  }
  int h_ = 0, w_ = 0;
  std::vector<double> data_;
};

// Hard mask, values restricted to {0,1}. Stored as bytes.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0)
      : h_(height), w_(width), data_(static_cast<std::size_t>(height) * width, fill) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("BinaryMask: dimensions must be positive");
    if (fill > 1) throw std::invalid_argument("BinaryMask: fill must be 0 or 1");
  }

  int height() const { return h_; }
  int width() const { return w_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  std::uint8_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  std::uint8_t* data() { return data_.data(); }
  const std::uint8_t* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  bool same_shape(const BinaryMask& other) const { return h_ == other.h_ && w_ == other.w_; }

  std::size_t count_ones() const {
    std::size_t n = 0;
    for (auto v : data_) n += v;
    return n;
  }

 private:
  int h_ = 0, w_ = 0;
  std::vector<std::uint8_t> data_;
};

// Continuous single-channel map in [0,1] (predicted light masks, soft targets).
class SoftMask {
 public:
  SoftMask() = default;
  SoftMask(int height, int width, double fill = 0.0)
      : h_(height), w_(width), data_(static_cast<std::size_t>(height) * width, fill) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("SoftMask: dimensions must be positive");
  }

  int height() const { return h_; }
  int width() const { return w_; }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  double at(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  bool same_shape(const SoftMask& other) const { return h_ == other.h_ && w_ == other.w_; }

 private:
  int h_ = 0, w_ = 0;
  std::vector<double> data_;
};

// BT.601 luma. Keeps masks derived from renders consistent with 8-bit sources.
inline SoftMask rgb_to_luminance(const Image& img) {
  SoftMask out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out.at(y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
  return out;
}

inline BinaryMask threshold_mask(const SoftMask& m, double tau) {
  BinaryMask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      out.at(y, x) = m.at(y, x) > tau ? 1 : 0;
  return out;
}

// out = mask*generated + (1-mask)*known. With mask values in {0,1} the
// selected source value passes through bit-exactly.
inline Image alpha_composite(const Image& generated, const Image& known, const BinaryMask& mask) {
  if (!generated.same_shape(known) || generated.height() != mask.height() ||
      generated.width() != mask.width())
    throw std::invalid_argument("alpha_composite: shape mismatch");
  Image out(generated.height(), generated.width());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < generated.height(); ++y)
      for (int x = 0; x < generated.width(); ++x) {
        const double m = mask.at(y, x);
        out.at(c, y, x) = m * generated.at(c, y, x) + (1.0 - m) * known.at(c, y, x);
      }
  return out;
}

inline Image alpha_composite(const Image& generated, const Image& known, const SoftMask& mask) {
  if (!generated.same_shape(known) || generated.height() != mask.height() ||
      generated.width() != mask.width())
    throw std::invalid_argument("alpha_composite: shape mismatch");
  Image out(generated.height(), generated.width());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < generated.height(); ++y)
      for (int x = 0; x < generated.width(); ++x) {
        const double m = mask.at(y, x);
        out.at(c, y, x) = m * generated.at(c, y, x) + (1.0 - m) * known.at(c, y, x);
      }
  return out;
}

inline BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mask_and_not: shape mismatch");
  BinaryMask out(a.height(), a.width());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      out.at(y, x) = static_cast<std::uint8_t>(a.at(y, x) & (1 - b.at(y, x)));
  return out;
}

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mask_or: shape mismatch");
  BinaryMask out(a.height(), a.width());
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      out.at(y, x) = static_cast<std::uint8_t>(a.at(y, x) | b.at(y, x));
  return out;
}

}  // namespace lightsout
