#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightsout/image.hpp"
#include "lightsout/light_model.hpp"
#include "lightsout/region.hpp"
#include "lightsout/rng.hpp"

namespace lightsout {

struct StreakSpec {
  int count = 0;          // evenly spaced rays through the center
  double angle = 0.0;     // radians, orientation of the first ray
  double width = 1.5;     // cross-section stddev, px
  double length = 16.0;   // along-ray stddev, px
  double strength = 0.35;
};

struct LightSpec {
  double cx = 32.0, cy = 32.0;  // scene pixels
  double radius = 4.0;          // px
  double glow_strength = 0.5;
  double falloff = 2.0;  // p in glow = strength / (1 + (d/r)^p)
  StreakSpec streaks;
};

struct SceneSpec {
  int h = 64, w = 64;
  std::vector<LightSpec> lights;
  double background_level = 0.08;
  double background_span = 0.10;
  int background_shapes = 3;
  std::uint64_t seed = 0;
};

struct ScenePair {
  Image clean;            // scene with its light discs but no flare
  Image flared;           // clip(clean + flare layer)
  LightSourceSet lights;  // normalized scene coords, zero-padded to n slots
  BinaryMask disc_mask;   // pixel centers within radius of a source center
  BinaryMask glare_mask;
  BinaryMask streak_mask;
};

inline constexpr double kGlareLumaThreshold = 0.05;

// The dark backdrop the flares sit on: a low-order gradient plus a few soft
// dim blobs, everything well below the saturation band.
inline Image render_background(const SceneSpec& spec, Rng& rng) {
  Image img(spec.h, spec.w);
  const double u0 = rng.uniform() * 2.0 - 1.0;
  const double u1 = rng.uniform() * 2.0 - 1.0;
  const double u2 = rng.uniform() * 2.0 - 1.0;
  const double fx = 0.5 + rng.uniform() * 1.5;
  const double fy = 0.5 + rng.uniform() * 1.5;
  double tint[3] = {1.0, 0.9 + 0.1 * rng.uniform(), 0.85 + 0.15 * rng.uniform()};

  for (int y = 0; y < spec.h; ++y)
    for (int x = 0; x < spec.w; ++x) {
      const double xf = double(x) / spec.w, yf = double(y) / spec.h;
      const double wave = std::cos(3.14159265358979 * (xf * fx + yf * fy));
      double v = spec.background_level +
                 spec.background_span * 0.5 * (u0 * xf + u1 * yf + u2 * wave + 1.0);
      v = std::clamp(v, 0.01, 0.4);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v * tint[c];
    }

  for (int s = 0; s < spec.background_shapes; ++s) {
    const double bx = rng.uniform() * spec.w;
    const double by = rng.uniform() * spec.h;
    const double sig = 3.0 + rng.uniform() * 10.0;
    const double amp = (rng.uniform() - 0.3) * 0.12;
    for (int y = 0; y < spec.h; ++y)
      for (int x = 0; x < spec.w; ++x) {
        const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        const double g = amp * std::exp(-d2 / (2.0 * sig * sig));
        for (int c = 0; c < 3; ++c)
          img.at(c, y, x) = std::clamp(img.at(c, y, x) + g, 0.005, 0.5);
      }
  }
  return img;
}

inline ScenePair generate_scene(const SceneSpec& spec, int n_slots = 4) {
  if (spec.h <= 0 || spec.w <= 0) throw std::invalid_argument("generate_scene: bad dims");
  if (static_cast<int>(spec.lights.size()) > n_slots)
    throw std::invalid_argument("generate_scene: more lights than slots");
  for (const auto& l : spec.lights)
    if (l.radius <= 0.0) throw std::invalid_argument("generate_scene: radius must be positive");

  Rng rng(derive_seed(spec.seed, 0xb6'5c'e4'e5));
  ScenePair out{render_background(spec, rng),
                Image(spec.h, spec.w),
                LightSourceSet{std::vector<LightSource>(n_slots), std::vector<double>(n_slots)},
                BinaryMask(spec.h, spec.w),
                BinaryMask(spec.h, spec.w),
                BinaryMask(spec.h, spec.w)};

  // saturated anti-aliased discs belong to the clean scene; the flare layer
  // (glow + streaks) is what removal is supposed to strip
  Image flare(spec.h, spec.w);
  Image streak_layer(spec.h, spec.w);

  for (std::size_t i = 0; i < spec.lights.size(); ++i) {
    const auto& l = spec.lights[i];
    for (int y = 0; y < spec.h; ++y)
      for (int x = 0; x < spec.w; ++x) {
        const double dx = x - l.cx, dy = y - l.cy;
        const double d = std::sqrt(dx * dx + dy * dy);

        const double cov = std::clamp(l.radius + 0.5 - d, 0.0, 1.0);
        if (cov > 0.0)
          for (int c = 0; c < 3; ++c)
            out.clean.at(c, y, x) += cov * (1.0 - out.clean.at(c, y, x));
        if (d <= l.radius) out.disc_mask.at(y, x) = 1;

        if (l.glow_strength > 0.0) {
          const double g = l.glow_strength / (1.0 + std::pow(d / l.radius, l.falloff));
          for (int c = 0; c < 3; ++c) flare.at(c, y, x) += g;
        }
        const auto& st = l.streaks;
        if (st.count > 0 && st.strength > 0.0) {
          double s = 0.0;
          for (int ray = 0; ray < st.count; ++ray) {
            const double th = st.angle + ray * 3.14159265358979 / st.count;
            const double u = dx * std::cos(th) + dy * std::sin(th);
            const double v = -dx * std::sin(th) + dy * std::cos(th);
            s += st.strength * std::exp(-v * v / (2.0 * st.width * st.width)) *
                 std::exp(-u * u / (2.0 * st.length * st.length));
          }
          for (int c = 0; c < 3; ++c) {
            flare.at(c, y, x) += s;
            streak_layer.at(c, y, x) += s;
          }
        }
      }

    out.lights.params[i] = {l.cx / spec.w, l.cy / spec.h,
                            l.radius / std::min(spec.h, spec.w)};
    out.lights.confidences[i] = 1.0;
  }

  const SoftMask flare_luma = rgb_to_luminance(flare);
  const SoftMask streak_luma = rgb_to_luminance(streak_layer);
  for (int y = 0; y < spec.h; ++y)
    for (int x = 0; x < spec.w; ++x) {
      if (flare_luma.at(y, x) > kGlareLumaThreshold) out.glare_mask.at(y, x) = 1;
      if (streak_luma.at(y, x) > kGlareLumaThreshold && !out.disc_mask.at(y, x))
        out.streak_mask.at(y, x) = 1;
      for (int c = 0; c < 3; ++c)
        out.flared.at(c, y, x) = clamp01(out.clean.at(c, y, x) + flare.at(c, y, x));
    }
  return out;
}

// Randomized scene recipe. Lights sit near the frame border so a usable
// flare-free interior rectangle exists; flare reaches into that interior.
inline SceneSpec random_scene_spec(std::uint64_t seed, int h = 64, int w = 64) {
  Rng rng(derive_seed(seed, 0x5ce'0a11));
  SceneSpec spec;
  spec.h = h;
  spec.w = w;
  spec.seed = seed;
  spec.background_level = 0.05 + rng.uniform() * 0.07;
  spec.background_span = 0.05 + rng.uniform() * 0.10;
  spec.background_shapes = rng.uniform_int(2, 4);

  const int n = rng.uniform() < 0.35 ? 2 : 1;
  for (int i = 0; i < n; ++i) {
    LightSpec l;
    l.radius = 3.0 + rng.uniform() * 3.0;
    const double margin = l.radius + 1.0;
    const int side = rng.uniform_int(0, 3);
    const double band = 0.18;  // keep sources pinned near one border
    auto along = [&](int extent) { return margin + rng.uniform() * (extent - 2 * margin); };
    auto into = [&](int extent) { return margin + rng.uniform() * (band * extent); };
    switch (side) {
      case 0: l.cx = into(w), l.cy = along(h); break;
      case 1: l.cx = w - into(w), l.cy = along(h); break;
      case 2: l.cx = along(w), l.cy = into(h); break;
      default: l.cx = along(w), l.cy = h - into(h); break;
    }
    l.glow_strength = 0.35 + rng.uniform() * 0.45;
    l.falloff = 1.8 + rng.uniform() * 0.6;
    if (rng.uniform() < 0.75) {
      l.streaks.count = rng.uniform_int(1, 3);
      l.streaks.angle = rng.uniform() * 3.14159265358979;
      l.streaks.width = 1.0 + rng.uniform();
      l.streaks.length = 10.0 + rng.uniform() * 12.0;
      l.streaks.strength = 0.2 + rng.uniform() * 0.3;
    }
    spec.lights.push_back(l);
  }
  return spec;
}

inline const char* kScenarioNoLight = "no_light";
inline const char* kScenarioIncomplete = "incomplete";

struct Scenario {
  std::string name;
  OutpaintCanvas canvas;      // scene-sized, crop pinned at its source position
  LightSourceSet gt_lights;   // canvas frame == scene frame, so unchanged
  BinaryMask disc_mask;       // canvas frame
  CropBox box;                // crop in scene coords
};

struct ScenarioSet {
  std::optional<Scenario> no_light;
  std::optional<Scenario> incomplete;
  std::string skip_reason;  // nonempty means the sample is unusable
};

inline constexpr int kMinCropExtent = 8;

// Region-prep applied to the flared scene. The bright mask is the luminance
// mask unioned with the ground-truth disc mask so the crop can never clip a
// disc through its dim anti-aliased rim.
inline ScenarioSet make_scenarios(const ScenePair& pair, double lum_threshold = 0.95,
                                  int shift = 15) {
  ScenarioSet out;
  const BinaryMask bright = mask_or(luminance_mask(pair.flared, lum_threshold), pair.disc_mask);
  const CropBox box = largest_flare_free_rect(bright);
  if (box.is_empty()) {
    out.skip_reason = "no flare-free rectangle";
    return out;
  }
  if (box.width() < kMinCropExtent || box.height() < kMinCropExtent) {
    out.skip_reason = "flare-free rectangle below minimum extent";
    return out;
  }

  const int h = pair.flared.height(), w = pair.flared.width();
  auto build = [&](const char* name, const CropBox& b) {
    Scenario s{name, build_outpaint_input(pair.flared, b, h, w, b.top, b.left), pair.lights,
               pair.disc_mask, b};
    return s;
  };
  auto no_light = build(kScenarioNoLight, box);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (pair.disc_mask.at(y, x) && !no_light.canvas.mask.at(y, x)) {
        out.skip_reason = "crop touches a light disc";
        return out;
      }

  out.no_light = std::move(no_light);
  out.incomplete = build(kScenarioIncomplete, scenario_incomplete(pair.flared, box, shift));
  return out;
}

}  // namespace lightsout
