#pragma once

// Shared test fixtures: tiny deterministic denoisers and canvas builders used
// by the sampler tests and the acceptance suite.

#include <cmath>

#include "lightsout/region.hpp"
#include "lightsout/rng.hpp"
#include "lightsout/sampler.hpp"

namespace fixtures {

// eps = a*x + b: deterministic, shape-preserving, no learned state.
struct LinearDenoiser : lightsout::Denoiser {
  double a = 0.3, b = 0.05;
  bool trained = true;

  bool is_trained() const override { return trained; }
  lightsout::DTensor predict_eps(const lightsout::DenoiserInputs& in,
                                 lightsout::DTensor* aux) override {
    lightsout::DTensor out = in.x_t;
    for (auto& v : out.v) v = a * v + b;
    if (aux) *aux = lightsout::DTensor(1, in.x_t.h, in.x_t.w, 0.0);
    return out;
  }
};

// Knows the clean signal and inverts the forward process analytically:
// eps = (x_t - sqrt(abar_t) x0) / sqrt(1 - abar_t).
struct TrueEpsDenoiser : lightsout::Denoiser {
  const lightsout::DTensor* x0 = nullptr;
  const lightsout::NoiseSchedule* sched = nullptr;

  bool is_trained() const override { return true; }
  lightsout::DTensor predict_eps(const lightsout::DenoiserInputs& in,
                                 lightsout::DTensor*) override {
    const double ab = sched->alpha_bar[in.t];
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    lightsout::DTensor out = in.x_t;
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = (in.x_t.v[i] - sa * x0->v[i]) / sb;
    return out;
  }
};

struct NanDenoiser : lightsout::Denoiser {
  bool is_trained() const override { return true; }
  lightsout::DTensor predict_eps(const lightsout::DenoiserInputs& in,
                                 lightsout::DTensor*) override {
    lightsout::DTensor out = in.x_t;
    out.v[0] = std::nan("");
    return out;
  }
};

struct UntrainedDenoiser : lightsout::Denoiser {
  bool is_trained() const override { return false; }
  lightsout::DTensor predict_eps(const lightsout::DenoiserInputs& in,
                                 lightsout::DTensor*) override {
    return in.x_t;
  }
};

inline lightsout::Image random_image(lightsout::Rng& rng, int h, int w) {
  lightsout::Image img(h, w);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
  return img;
}

// a small crop of a random image centered in a larger canvas
inline lightsout::OutpaintCanvas small_canvas(lightsout::Rng& rng, int crop = 8, int canvas = 12) {
  const auto img = random_image(rng, crop + 4, crop + 4);
  const lightsout::CropBox box{2, 2 + crop - 1, 2, 2 + crop - 1};
  return lightsout::build_outpaint_input(img, box, canvas, canvas);
}

}  // namespace fixtures
