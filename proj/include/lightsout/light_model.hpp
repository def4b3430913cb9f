#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lightsout/hungarian.hpp"
#include "lightsout/image.hpp"

namespace lightsout {

// One circular light source in normalized canvas coordinates. x and y may lie
// outside [0,1]: off-frame sources are the whole point.
struct LightSource {
  double x = 0.0, y = 0.0, r = 0.0;
};

struct LightSourceSet {
  std::vector<LightSource> params;
  std::vector<double> confidences;

  int size() const { return static_cast<int>(params.size()); }

  void validate() const {
    if (params.empty() || params.size() != confidences.size())
      throw std::invalid_argument("LightSourceSet: params/confidences size mismatch");
    for (const auto& p : params)
      if (p.r < 0.0) throw std::invalid_argument("LightSourceSet: negative radius");
  }
};

// sigma^2 = exp(s) keeps the weighted terms finite for any real s.
struct UncertaintyWeights {
  double s1 = 0.0, s2 = 0.0;
  double sigma1_sq() const { return std::exp(s1); }
  double sigma2_sq() const { return std::exp(s2); }
};

inline double smooth_l1(double x) {
  const double a = std::fabs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

// derivative: x on |x|<1, sign(x) outside; continuous at the joint
inline double smooth_l1_grad(double x) {
  if (x > 1.0) return 1.0;
  if (x < -1.0) return -1.0;
  return x;
}

inline bool is_active(double gt_confidence) { return gt_confidence > 0.5; }

namespace detail {

inline double pair_cost(const LightSource& pred, const LightSource& gt, bool gt_active) {
  if (!gt_active) return 0.0;
  return smooth_l1(pred.x - gt.x) + smooth_l1(pred.y - gt.y) + smooth_l1(pred.r - gt.r);
}

inline void check_permutation(const std::vector<int>& assignment, int n) {
  if (static_cast<int>(assignment.size()) != n)
    throw std::invalid_argument("assignment size mismatch");
  std::vector<char> seen(n, 0);
  for (int j : assignment) {
    if (j < 0 || j >= n || seen[j]) throw std::invalid_argument("assignment is not a permutation");
    seen[j] = 1;
  }
}

}  // namespace detail

// Optimal pred->gt pairing. Inactive ground-truth slots cost nothing to match,
// so they absorb whichever predictions the active slots reject.
inline std::vector<int> bipartite_match(const LightSourceSet& pred, const LightSourceSet& gt) {
  pred.validate();
  gt.validate();
  if (pred.size() != gt.size())
    throw std::invalid_argument("bipartite_match: sets must have equal size");
  const int n = pred.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost[i][j] = detail::pair_cost(pred.params[i], gt.params[j], is_active(gt.confidences[j]));
  return min_cost_assignment(cost);
}

inline double matching_cost(const LightSourceSet& pred, const LightSourceSet& gt,
                            const std::vector<int>& assignment) {
  detail::check_permutation(assignment, pred.size());
  double total = 0.0;
  for (int i = 0; i < pred.size(); ++i)
    total += detail::pair_cost(pred.params[i], gt.params[assignment[i]],
                               is_active(gt.confidences[assignment[i]]));
  return total;
}

// Smooth-L1 over x, y, r of matched pairs whose ground truth is active.
inline double position_loss(const LightSourceSet& pred, const LightSourceSet& gt,
                            const std::vector<int>& assignment) {
  pred.validate();
  gt.validate();
  detail::check_permutation(assignment, pred.size());
  double loss = 0.0;
  for (int i = 0; i < pred.size(); ++i) {
    const int j = assignment[i];
    if (!is_active(gt.confidences[j])) continue;
    loss += smooth_l1(pred.params[i].x - gt.params[j].x) +
            smooth_l1(pred.params[i].y - gt.params[j].y) +
            smooth_l1(pred.params[i].r - gt.params[j].r);
  }
  return loss;
}

// Per-prediction confidence targets: 1 where the assignment pairs the slot
// with an active ground-truth source, else 0.
inline std::vector<double> matched_confidence_targets(const LightSourceSet& gt,
                                                      const std::vector<int>& assignment) {
  detail::check_permutation(assignment, gt.size());
  std::vector<double> targets(assignment.size());
  for (std::size_t i = 0; i < assignment.size(); ++i)
    targets[i] = is_active(gt.confidences[assignment[i]]) ? 1.0 : 0.0;
  return targets;
}

inline constexpr double kConfidenceEps = 1e-7;

inline double confidence_loss(const std::vector<double>& pred_c, const std::vector<double>& gt_c) {
  if (pred_c.size() != gt_c.size() || pred_c.empty())
    throw std::invalid_argument("confidence_loss: size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < pred_c.size(); ++i) {
    const double c = std::clamp(pred_c[i], kConfidenceEps, 1.0 - kConfidenceEps);
    loss += -(gt_c[i] * std::log(c) + (1.0 - gt_c[i]) * std::log(1.0 - c));
  }
  return loss;
}

inline double total_loss(double l_pos, double l_conf, const UncertaintyWeights& w) {
  const double v1 = w.sigma1_sq(), v2 = w.sigma2_sq();
  return l_pos / (2.0 * v1) + l_conf / (2.0 * v2) + std::log(1.0 + v1) + std::log(1.0 + v2);
}

// Partials of total_loss wrt the unconstrained parameters s1, s2.
struct TotalLossGrad {
  double ds1 = 0.0, ds2 = 0.0;
};

inline TotalLossGrad total_loss_grad_s(double l_pos, double l_conf, const UncertaintyWeights& w) {
  const double v1 = w.sigma1_sq(), v2 = w.sigma2_sq();
  TotalLossGrad g;
  g.ds1 = -l_pos / (2.0 * v1) + v1 / (1.0 + v1);
  g.ds2 = -l_conf / (2.0 * v2) + v2 / (1.0 + v2);
  return g;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Soft spatial mask from source parameters: sum of c_i * sigmoid(r_i - dist)
// in pixel units, thresholded confidences, sum clamped to 1. Sources are
// accumulated in a canonical order so the result is exactly invariant to how
// the set happens to be ordered.
inline SoftMask render_light_mask(const LightSourceSet& src, int canvas_h, int canvas_w,
                                  double confidence_threshold = 0.5) {
  src.validate();
  if (canvas_h < 1 || canvas_w < 1)
    throw std::invalid_argument("render_light_mask: bad canvas dims");

  struct PxSource {
    double cx, cy, r, c;
  };
  std::vector<PxSource> active;
  const double scale_r = static_cast<double>(std::min(canvas_h, canvas_w));
  for (int i = 0; i < src.size(); ++i) {
    const double c = src.confidences[i];
    if (c < confidence_threshold) continue;
    active.push_back({src.params[i].x * canvas_w, src.params[i].y * canvas_h,
                      src.params[i].r * scale_r, c});
  }
  std::sort(active.begin(), active.end(), [](const PxSource& a, const PxSource& b) {
    if (a.cx != b.cx) return a.cx < b.cx;
    if (a.cy != b.cy) return a.cy < b.cy;
    if (a.r != b.r) return a.r < b.r;
    return a.c < b.c;
  });

  SoftMask mask(canvas_h, canvas_w);
  for (int y = 0; y < canvas_h; ++y)
    for (int x = 0; x < canvas_w; ++x) {
      double v = 0.0;
      for (const auto& s : active) {
        const double dx = x - s.cx, dy = y - s.cy;
        v += s.c * sigmoid(s.r - std::sqrt(dx * dx + dy * dy));
      }
      mask.at(y, x) = v > 1.0 ? 1.0 : v;
    }
  return mask;
}

// L2 conditioning loss between predicted and rendered light masks (mean over
// pixels).
inline double condition_loss(const SoftMask& pred_mask, const SoftMask& target_mask) {
  if (!pred_mask.same_shape(target_mask))
    throw std::invalid_argument("condition_loss: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const double d = pred_mask.data()[i] - target_mask.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(pred_mask.size());
}

}  // namespace lightsout
