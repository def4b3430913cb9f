#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lightsout/image.hpp"
#include "lightsout/region.hpp"
#include "lightsout/rng.hpp"
#include "lightsout/schedule.hpp"
#include "lightsout/tensor.hpp"

namespace lightsout {

// Captions are out of scope; the contract still carries a prompt slot.
inline constexpr std::string_view kPromptPlaceholder = "a night photograph";

struct DenoiserInputs {
  const DTensor& x_t;           // 3,H,W diffusion state
  const DTensor& masked_image;  // 3,H,W known content with fill elsewhere
  const DTensor& mask;          // 1,H,W 1 = region to generate
  const DTensor& light_mask;    // 1,H,W conditioning M_L
  std::string_view prompt = kPromptPlaceholder;
  double guidance = 1.0;
  int t = 0;
};

// Anything that predicts noise. aux_light, when requested and supported,
// receives the auxiliary light-mask head output.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual bool is_trained() const = 0;
  virtual DTensor predict_eps(const DenoiserInputs& in, DTensor* aux_light = nullptr) = 0;
};

struct SamplerConfig {
  int steps = 50;
  double guidance = 7.0;
  int reinject = 4;
  double eta = 1.0;
  enum class Blend { rgb, latent } blend = Blend::latent;
  std::uint64_t seed = 0;
};

inline const char* blend_name(SamplerConfig::Blend b) {
  return b == SamplerConfig::Blend::rgb ? "rgb" : "latent";
}

inline DTensor gaussian_tensor(Rng& rng, int c, int h, int w) {
  DTensor t(c, h, w);
  for (auto& v : t.v) v = rng.normal();
  return t;
}

// x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps
inline DTensor forward_diffuse(const DTensor& x0, int t, const DTensor& eps,
                               const NoiseSchedule& sched) {
  sched.check_t(t);
  if (!x0.same_shape(eps)) throw std::invalid_argument("forward_diffuse: shape mismatch");
  const double ab = sched.alpha_bar[t];
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  DTensor out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = a * x0.v[i] + b * eps.v[i];
  return out;
}

// Generalized eta-parameterized update from level t_cur down to t_target.
// z may be null when sigma is zero (eta=0 or t_target=0).
inline DTensor sampler_step(const DTensor& x_t, int t_cur, int t_target, const DTensor& eps,
                            const NoiseSchedule& sched, double eta, const DTensor* z) {
  sched.check_t(t_cur);
  sched.check_t(t_target);
  if (t_target >= t_cur) throw std::invalid_argument("sampler_step: t_target must be below t_cur");
  if (!x_t.same_shape(eps)) throw std::invalid_argument("sampler_step: eps shape mismatch");

  const double ab_cur = sched.alpha_bar[t_cur];
  const double ab_tgt = sched.alpha_bar[t_target];
  const double sigma = sched.sigma(t_cur, t_target, eta);
  const double c_x0 = std::sqrt(ab_tgt);
  const double c_dir = std::sqrt(std::max(0.0, 1.0 - ab_tgt - sigma * sigma));
  const double inv_sqrt_ab = 1.0 / std::sqrt(ab_cur);
  const double sqrt_1m_ab = std::sqrt(1.0 - ab_cur);

  if (sigma > 0.0 && z == nullptr)
    throw std::invalid_argument("sampler_step: stochastic step needs z");

  DTensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x0_pred = (x_t.v[i] - sqrt_1m_ab * eps.v[i]) * inv_sqrt_ab;
    double v = c_x0 * x0_pred + c_dir * eps.v[i];
    if (sigma > 0.0) v += sigma * z->v[i];
    out.v[i] = v;
  }
  return out;
}

// Per-step known/generated recombination of diffusion states: generated where
// mask=1, noised known content where mask=0. Binary masks select bit-exactly.
inline DTensor blend_step_latent(const DTensor& x_known, const DTensor& x_gen,
                                 const DTensor& mask) {
  if (!x_known.same_shape(x_gen)) throw std::invalid_argument("blend_step_latent: shape mismatch");
  if (mask.c != 1 || mask.h != x_gen.h || mask.w != x_gen.w)
    throw std::invalid_argument("blend_step_latent: mask shape mismatch");
  DTensor out = x_gen;
  for (int c = 0; c < out.c; ++c)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        const double m = mask.at(0, y, x);
        out.at(c, y, x) = m * x_gen.at(c, y, x) + (1.0 - m) * x_known.at(c, y, x);
      }
  return out;
}

struct SampleResult {
  Image image;          // final composited RGB output
  DTensor x0;           // raw final state before clamping/compositing
  int denoiser_calls = 0;
};

namespace detail {

inline void abort_on_nan(const DTensor& x, int t_cur, const char* where) {
  for (const double v : x.v)
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("sampler: non-finite state after ") + where +
                               " at t=" + std::to_string(t_cur));
}

struct RunContext {
  const DTensor known;   // masked image as a tensor (known content, fill elsewhere)
  const DTensor mask;    // 1,H,W
  const DTensor light;   // 1,H,W
  const NoiseSchedule& sched;
  const SamplerConfig& cfg;
  Rng rng;
};

inline RunContext make_context(const OutpaintCanvas& canvas, const SoftMask& light_mask,
                               const NoiseSchedule& sched, const SamplerConfig& cfg) {
  if (light_mask.height() != canvas.mask.height() || light_mask.width() != canvas.mask.width())
    throw std::invalid_argument("outpaint: light mask shape mismatch");
  return RunContext{image_to_tensor(canvas.masked_image), mask_to_tensor(canvas.mask),
                    softmask_to_tensor(light_mask), sched, cfg, Rng(cfg.seed)};
}

// One denoise-and-advance from t_cur to t_target, shared by both samplers so
// the degenerate R=0 comparison is meaningful.
inline DTensor advance(DTensor x, int t_cur, int t_target, Denoiser& den, RunContext& ctx,
                       int& calls) {
  const DenoiserInputs in{x,          ctx.known,         ctx.mask, ctx.light,
                          kPromptPlaceholder, ctx.cfg.guidance, t_cur};
  const DTensor eps = den.predict_eps(in);
  ++calls;
  if (!eps.same_shape(x)) throw std::runtime_error("denoiser returned wrong shape");

  const double sigma = ctx.sched.sigma(t_cur, t_target, ctx.cfg.eta);
  DTensor z;
  if (sigma > 0.0) z = gaussian_tensor(ctx.rng, x.c, x.h, x.w);
  x = sampler_step(x, t_cur, t_target, eps, ctx.sched, ctx.cfg.eta, sigma > 0.0 ? &z : nullptr);
  detail::abort_on_nan(x, t_cur, "sampler_step");

  if (ctx.cfg.blend == SamplerConfig::Blend::latent) {
    const DTensor noise = gaussian_tensor(ctx.rng, x.c, x.h, x.w);
    const DTensor x_known = forward_diffuse(ctx.known, t_target, noise, ctx.sched);
    x = blend_step_latent(x_known, x, ctx.mask);
  }
  return x;
}

inline SampleResult finish(DTensor x, const OutpaintCanvas& canvas, int calls) {
  SampleResult res;
  res.x0 = std::move(x);
  const Image generated = tensor_to_image_clamped(res.x0);
  res.image = alpha_composite(generated, canvas.masked_image, canvas.mask);
  res.denoiser_calls = calls;
  return res;
}

}  // namespace detail

// Plain sampler: N denoiser calls, no reinjection. Kept as an independent
// loop so the R=0 degeneracy of the reinjection sampler can be checked
// against it bitwise.
inline SampleResult plain_sample(const OutpaintCanvas& canvas, const SoftMask& light_mask,
                                 Denoiser& den, const NoiseSchedule& sched,
                                 const SamplerConfig& cfg) {
  if (!den.is_trained()) throw std::runtime_error("plain_sample: denoiser is not trained");
  auto ctx = detail::make_context(canvas, light_mask, sched, cfg);
  const auto ts = sched.sampling_timesteps(cfg.steps);

  DTensor x = gaussian_tensor(ctx.rng, 3, ctx.mask.h, ctx.mask.w);
  int calls = 0;
  for (int i = cfg.steps - 1; i >= 0; --i) {
    const int t_cur = ts[i];
    const int t_target = i > 0 ? ts[i - 1] : 0;
    x = detail::advance(std::move(x), t_cur, t_target, den, ctx, calls);
  }
  return detail::finish(std::move(x), canvas, calls);
}

// Noise-reinjection sampler. After each advance, while repeats remain and the
// run is not at the final level, the state is pushed back up to t_cur with
// the forward kernel between the two levels and re-denoised; denoiser call
// count is (N-1)(1+R)+1.
inline SampleResult outpaint(const OutpaintCanvas& canvas, const SoftMask& light_mask,
                             Denoiser& den, const NoiseSchedule& sched,
                             const SamplerConfig& cfg) {
  if (!den.is_trained()) throw std::runtime_error("outpaint: denoiser is not trained");
  if (cfg.reinject < 0) throw std::invalid_argument("outpaint: reinject must be >= 0");
  auto ctx = detail::make_context(canvas, light_mask, sched, cfg);
  const auto ts = sched.sampling_timesteps(cfg.steps);

  DTensor x = gaussian_tensor(ctx.rng, 3, ctx.mask.h, ctx.mask.w);
  int calls = 0;
  for (int i = cfg.steps - 1; i >= 0; --i) {
    const int t_cur = ts[i];
    const int t_target = i > 0 ? ts[i - 1] : 0;
    int r = cfg.reinject;
    while (true) {
      x = detail::advance(std::move(x), t_cur, t_target, den, ctx, calls);
      if (i > 0 && r > 0) {
        // forward kernel from t_target back up to t_cur: the alpha product
        // over the skipped schedule interval, not the single-step alpha
        const double a_eff = ctx.sched.alpha_bar[t_cur] / ctx.sched.alpha_bar[t_target];
        const DTensor zeta = gaussian_tensor(ctx.rng, x.c, x.h, x.w);
        const double ca = std::sqrt(a_eff), cb = std::sqrt(1.0 - a_eff);
        for (std::size_t j = 0; j < x.size(); ++j) x.v[j] = ca * x.v[j] + cb * zeta.v[j];
        detail::abort_on_nan(x, t_cur, "reinjection");
        --r;
      } else {
        break;
      }
    }
  }
  return detail::finish(std::move(x), canvas, calls);
}

}  // namespace lightsout
