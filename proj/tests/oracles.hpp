#pragma once

// Reference implementations the tests compare library results against.
// Everything here favors obviousness over speed: direct formula
// transcriptions, exhaustive enumeration, no shared code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

// -------- metrics --------

inline double mse(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(n);
}

inline double psnr_from_mse(double m) {
  if (m <= 0.0) return 99.0;
  const double v = 10.0 * std::log10(1.0 / m);
  return v > 99.0 ? 99.0 : v;
}

// SSIM of two constant images: variances and covariance vanish, leaving
// (2ab+C1)/(a^2+b^2+C1) after the C2 factors cancel.
inline double ssim_constant_pair(double a, double b) {
  const double c1 = 0.01 * 0.01;
  return (2.0 * a * b + c1) / (a * a + b * b + c1);
}

// -------- largest empty rectangle --------

// Exhaustive O(H^2 W^2) search over all rectangles using 2D prefix sums.
struct RectOracle {
  int h, w;
  std::vector<long long> prefix;  // (h+1) x (w+1)

  explicit RectOracle(const std::vector<std::uint8_t>& mask, int height, int width)
      : h(height), w(width), prefix(static_cast<std::size_t>(height + 1) * (width + 1), 0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        at(y + 1, x + 1) = mask[static_cast<std::size_t>(y) * w + x] + at(y, x + 1) + at(y + 1, x) -
                           at(y, x);
  }

  long long& at(int y, int x) { return prefix[static_cast<std::size_t>(y) * (w + 1) + x]; }
  long long at(int y, int x) const { return prefix[static_cast<std::size_t>(y) * (w + 1) + x]; }

  long long box_sum(int top, int left, int bottom, int right) const {
    return at(bottom + 1, right + 1) - at(top, right + 1) - at(bottom + 1, left) + at(top, left);
  }

  long long max_empty_area() const {
    long long best = 0;
    for (int top = 0; top < h; ++top)
      for (int bottom = top; bottom < h; ++bottom)
        for (int left = 0; left < w; ++left)
          for (int right = left; right < w; ++right) {
            if (box_sum(top, left, bottom, right) != 0) continue;
            const long long area =
                static_cast<long long>(bottom - top + 1) * (right - left + 1);
            if (area > best) best = area;
          }
    return best;
  }
};

// -------- matching --------

// Minimum assignment cost by trying every permutation (fine for N <= 8).
inline double min_permutation_cost(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[i][perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// -------- losses --------

inline double smooth_l1(double x) {
  const double a = std::fabs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

inline double bce(const std::vector<double>& pred, const std::vector<double>& gt) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::min(1.0 - 1e-7, std::max(1e-7, pred[i]));
    s += -(gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p));
  }
  return s;
}

inline double uncertainty_total(double l_pos, double l_conf, double s1, double s2) {
  const double v1 = std::exp(s1), v2 = std::exp(s2);
  return l_pos / (2.0 * v1) + l_conf / (2.0 * v2) + std::log(1.0 + v1) + std::log(1.0 + v2);
}

}  // namespace oracle
