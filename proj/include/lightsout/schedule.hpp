#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace lightsout {

// Forward-process schedule. Arrays are indexed 0..T where index 0 is the
// no-noise boundary (alpha_bar[0] = 1); training timesteps live in [1, T].
struct NoiseSchedule {
  int T = 0;
  std::vector<double> alpha;      // alpha[0] = 1 boundary
  std::vector<double> alpha_bar;  // cumulative product, alpha_bar[0] = 1

  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4,
                              double beta_end = 2e-2) {
    if (steps < 1) throw std::invalid_argument("NoiseSchedule: steps must be >= 1");
    NoiseSchedule s;
    s.T = steps;
    s.alpha.resize(steps + 1);
    s.alpha_bar.resize(steps + 1);
    s.alpha[0] = 1.0;
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= steps; ++t) {
      const double beta =
          steps == 1 ? beta_start
                     : beta_start + (beta_end - beta_start) * (t - 1) / double(steps - 1);
      s.alpha[t] = 1.0 - beta;
      s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    }
    return s;
  }

  void check_t(int t) const {
    if (t < 0 || t > T) throw std::out_of_range("NoiseSchedule: t out of range");
  }

  // Ascending sampling subsequence; the last entry is always T so the
  // initial pure-noise state sits exactly on a schedule level.
  std::vector<int> sampling_timesteps(int n) const {
    if (n < 1 || n > T) throw std::invalid_argument("sampling_timesteps: need 1 <= N <= T");
    std::vector<int> ts(n);
    for (int i = 0; i < n; ++i)
      ts[i] = static_cast<int>(std::llround(static_cast<double>(i + 1) * T / n));
    return ts;
  }

  // Stochasticity of the generalized sampler update for a jump from t_cur
  // down to t_target; eta = 0 is the deterministic sampler, 1 is ancestral.
  double sigma(int t_cur, int t_target, double eta) const {
    check_t(t_cur);
    check_t(t_target);
    if (t_target >= t_cur) throw std::invalid_argument("sigma: t_target must be below t_cur");
    const double ab_cur = alpha_bar[t_cur], ab_tgt = alpha_bar[t_target];
    return eta * std::sqrt((1.0 - ab_tgt) / (1.0 - ab_cur)) * std::sqrt(1.0 - ab_cur / ab_tgt);
  }
};

}  // namespace lightsout
