#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lightsout/image.hpp"

namespace lightsout {

// Peak signal of 1.0; returns 99 dB for exact matches so reports stay finite.
inline double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return 99.0;
  const double v = 10.0 * std::log10(1.0 / mse);
  return v > 99.0 ? 99.0 : v;
}

// PSNR restricted to pixels where mask==1 (the generated region).
inline double masked_psnr(const Image& a, const Image& b, const BinaryMask& mask) {
  if (!a.same_shape(b)) throw std::invalid_argument("masked_psnr: shape mismatch");
  if (a.height() != mask.height() || a.width() != mask.width())
    throw std::invalid_argument("masked_psnr: mask shape mismatch");
  double mse = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = a.at(c, y, x) - b.at(c, y, x);
        mse += d * d;
      }
      n += 3;
    }
  if (n == 0) throw std::invalid_argument("masked_psnr: mask selects no pixels");
  mse /= static_cast<double>(n);
  if (mse <= 0.0) return 99.0;
  const double v = 10.0 * std::log10(1.0 / mse);
  return v > 99.0 ? 99.0 : v;
}

namespace detail {

inline const std::vector<double>& ssim_window() {
  // 11x11 Gaussian, sigma 1.5, normalized to sum 1
  static const std::vector<double> win = [] {
    std::vector<double> w(121);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) {
        const double dy = i - 5, dx = j - 5;
        w[i * 11 + j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
        sum += w[i * 11 + j];
      }
    for (auto& v : w) v /= sum;
    return w;
  }();
  return win;
}

inline double ssim_channel(const Image& a, const Image& b, int c) {
  const auto& win = ssim_window();
  constexpr double C1 = 0.01 * 0.01;  // (K1*L)^2 with L=1
  constexpr double C2 = 0.03 * 0.03;
  const int h = a.height(), w = a.width();
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y + 11 <= h; ++y)
    for (int x = 0; x + 11 <= w; ++x) {
      double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double wv = win[i * 11 + j];
          const double va = a.at(c, y + i, x + j);
          const double vb = b.at(c, y + i, x + j);
          mu_a += wv * va;
          mu_b += wv * vb;
          aa += wv * va * va;
          bb += wv * vb * vb;
          ab += wv * va * vb;
        }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
      const double den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
      total += num / den;
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace detail

// Mean SSIM over valid (fully interior) windows, averaged across channels.
inline double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  if (a.height() < 11 || a.width() < 11)
    throw std::invalid_argument("ssim: image smaller than 11x11 window");
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += detail::ssim_channel(a, b, c);
  return s / 3.0;
}

// Intersection over union for hard masks; two empty masks count as identical.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("iou: shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool va = a.data()[i] != 0, vb = b.data()[i] != 0;
    inter += va && vb;
    uni += va || vb;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline BinaryMask binarize(const SoftMask& m, double tau = 0.5) {
  BinaryMask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      out.at(y, x) = m.at(y, x) > tau ? 1 : 0;
  return out;
}

inline double miou(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw std::invalid_argument("miou: mismatched or empty batches");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += iou(pred[i], gt[i]);
  return s / static_cast<double>(pred.size());
}

}  // namespace lightsout
