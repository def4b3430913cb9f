#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "lightsout/sampler.hpp"
#include "lightsout/schedule.hpp"

using namespace lightsout;

TEST_CASE("linear schedule invariants") {
  const auto s = NoiseSchedule::linear();
  REQUIRE(s.T == 1000);
  CHECK(s.alpha_bar[0] == 1.0);
  CHECK(s.alpha_bar[s.T] < 1e-4);

  for (int t = 1; t <= s.T; ++t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);

  double prod = 1.0;
  for (int t = 1; t <= s.T; ++t) {
    prod *= s.alpha[t];
    CHECK(std::fabs(prod - s.alpha_bar[t]) < 1e-10);
  }

  for (int t_cur : {10, 100, 500, 1000})
    for (int t_tgt : {0, 5, 50}) {
      if (t_tgt >= t_cur) continue;
      CHECK(s.sigma(t_cur, t_tgt, 1.0) >= 0.0);
      CHECK(s.sigma(t_cur, t_tgt, 0.0) == 0.0);
    }
  CHECK(s.sigma(500, 0, 1.0) == 0.0);  // abar_0 = 1 kills the first factor
}

TEST_CASE("sampling timestep subsequences") {
  const auto s = NoiseSchedule::linear();

  const auto ts50 = s.sampling_timesteps(50);
  REQUIRE(ts50.size() == 50);
  CHECK(ts50.front() == 20);
  CHECK(ts50.back() == 1000);
  for (std::size_t i = 1; i < ts50.size(); ++i) CHECK(ts50[i] > ts50[i - 1]);

  CHECK(s.sampling_timesteps(1) == std::vector<int>{1000});
  const auto full = s.sampling_timesteps(1000);
  CHECK(full.front() == 1);
  CHECK(full.back() == 1000);

  CHECK_THROWS(s.sampling_timesteps(0));
  CHECK_THROWS(s.sampling_timesteps(1001));
}

TEST_CASE("forward diffusion") {
  const auto s = NoiseSchedule::linear();
  Rng rng(51);
  const DTensor x0 = gaussian_tensor(rng, 3, 6, 6);
  const DTensor eps = gaussian_tensor(rng, 3, 6, 6);

  SECTION("t=0 is the identity") {
    const auto x = forward_diffuse(x0, 0, eps, s);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.v[i] == x0.v[i]);
  }
  SECTION("t=T is almost pure noise") {
    const auto x = forward_diffuse(x0, s.T, eps, s);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::fabs(x.v[i] - eps.v[i]) < 0.05);
  }
  SECTION("abar=0.25 halves the signal") {
    NoiseSchedule tiny;
    tiny.T = 1;
    tiny.alpha = {1.0, 0.25};
    tiny.alpha_bar = {1.0, 0.25};
    const DTensor ones(3, 2, 2, 1.0);
    const DTensor zero(3, 2, 2, 0.0);
    const auto x = forward_diffuse(ones, 1, zero, tiny);
    for (const double v : x.v) CHECK(v == 0.5);
  }
  SECTION("bad input is rejected") {
    CHECK_THROWS(forward_diffuse(x0, -1, eps, s));
    CHECK_THROWS(forward_diffuse(x0, s.T + 1, eps, s));
    CHECK_THROWS(forward_diffuse(x0, 1, DTensor(3, 6, 5), s));
  }
}

TEST_CASE("sampler step algebra") {
  const auto s = NoiseSchedule::linear();
  Rng rng(52);
  const DTensor x0 = gaussian_tensor(rng, 3, 5, 5);
  const DTensor eps = gaussian_tensor(rng, 3, 5, 5);
  const int t_cur = 600;

  const auto x_t = forward_diffuse(x0, t_cur, eps, s);

  SECTION("stepping to t=0 with the true noise recovers x0") {
    const auto out = sampler_step(x_t, t_cur, 0, eps, s, 0.0, nullptr);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out.v[i] == Catch::Approx(x0.v[i]).margin(1e-12));
  }
  SECTION("deterministic step with the true noise lands on the forward trajectory") {
    const int t_tgt = 240;
    const auto out = sampler_step(x_t, t_cur, t_tgt, eps, s, 0.0, nullptr);
    const auto expect = forward_diffuse(x0, t_tgt, eps, s);
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out.v[i] == Catch::Approx(expect.v[i]).margin(1e-12));
  }
  SECTION("stochastic step demands z") {
    CHECK_THROWS(sampler_step(x_t, t_cur, 240, eps, s, 1.0, nullptr));
  }
  SECTION("level ordering is enforced") {
    CHECK_THROWS(sampler_step(x_t, t_cur, t_cur, eps, s, 0.0, nullptr));
    CHECK_THROWS(sampler_step(x_t, t_cur, 700, eps, s, 0.0, nullptr));
  }
}

TEST_CASE("per-step latent blending") {
  Rng rng(53);
  const DTensor known = gaussian_tensor(rng, 3, 6, 6);
  const DTensor gen = gaussian_tensor(rng, 3, 6, 6);

  SECTION("all-zero mask keeps known") {
    const DTensor m(1, 6, 6, 0.0);
    const auto out = blend_step_latent(known, gen, m);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.v[i] == known.v[i]);
  }
  SECTION("all-one mask keeps generated") {
    const DTensor m(1, 6, 6, 1.0);
    const auto out = blend_step_latent(known, gen, m);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.v[i] == gen.v[i]);
  }
  SECTION("checkerboard selects per pixel") {
    DTensor m(1, 6, 6);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) m.at(0, y, x) = (x + y) % 2;
    const auto out = blend_step_latent(known, gen, m);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
          CHECK(out.at(c, y, x) == ((x + y) % 2 ? gen.at(c, y, x) : known.at(c, y, x)));
  }
}

TEST_CASE("denoiser call count across the step/reinjection grid") {
  const auto sched = NoiseSchedule::linear();
  Rng rng(54);
  const auto canvas = fixtures::small_canvas(rng);
  const SoftMask light(canvas.mask.height(), canvas.mask.width(), 0.0);

  struct Counting : fixtures::LinearDenoiser {
    int calls = 0;
    DTensor predict_eps(const DenoiserInputs& in, DTensor* aux) override {
      ++calls;
      return fixtures::LinearDenoiser::predict_eps(in, aux);
    }
  };

  for (int n = 1; n <= 6; ++n)
    for (int r = 0; r <= 5; ++r) {
      Counting den;
      SamplerConfig cfg;
      cfg.steps = n;
      cfg.reinject = r;
      cfg.eta = 1.0;
      cfg.seed = 1000 + n * 10 + r;
      const auto res = outpaint(canvas, light, den, sched, cfg);
      const int expected = (n - 1) * (1 + r) + 1;
      CHECK(res.denoiser_calls == expected);
      CHECK(den.calls == expected);
    }
}

TEST_CASE("R=0 reinjection sampler degenerates to the plain sampler bitwise") {
  const auto sched = NoiseSchedule::linear();
  Rng rng(55);
  const auto canvas = fixtures::small_canvas(rng);
  const SoftMask light(canvas.mask.height(), canvas.mask.width(), 0.0);

  for (const auto blend : {SamplerConfig::Blend::rgb, SamplerConfig::Blend::latent}) {
    fixtures::LinearDenoiser den;
    SamplerConfig cfg;
    cfg.steps = 5;
    cfg.reinject = 0;
    cfg.eta = 1.0;
    cfg.blend = blend;
    cfg.seed = 777;

    const auto a = outpaint(canvas, light, den, sched, cfg);
    const auto b = plain_sample(canvas, light, den, sched, cfg);
    REQUIRE(a.x0.size() == b.x0.size());
    CHECK(std::memcmp(a.x0.data(), b.x0.data(), a.x0.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.image.data(), b.image.data(), a.image.size() * sizeof(double)) == 0);
    CHECK(a.denoiser_calls == b.denoiser_calls);
  }
}

TEST_CASE("deterministic sampling runs are bitwise repeatable") {
  const auto sched = NoiseSchedule::linear();
  Rng rng(56);
  const auto canvas = fixtures::small_canvas(rng);
  const SoftMask light(canvas.mask.height(), canvas.mask.width(), 0.0);
  fixtures::LinearDenoiser den;

  for (const double eta : {0.0, 1.0}) {
    SamplerConfig cfg;
    cfg.steps = 4;
    cfg.reinject = 3;
    cfg.eta = eta;
    cfg.seed = 4242;
    const auto a = outpaint(canvas, light, den, sched, cfg);
    const auto b = outpaint(canvas, light, den, sched, cfg);
    CHECK(std::memcmp(a.x0.data(), b.x0.data(), a.x0.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.image.data(), b.image.data(), a.image.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("reinjection followed by a perfect deterministic denoise is an expectation fixed point") {
  const auto sched = NoiseSchedule::linear();
  Rng rng(57);
  const DTensor x0 = gaussian_tensor(rng, 3, 32, 32);

  fixtures::TrueEpsDenoiser den;
  den.x0 = &x0;
  den.sched = &sched;

  const int t_cur = 400, t_tgt = 300;
  const DTensor base_noise = gaussian_tensor(rng, 3, 32, 32);
  const DTensor x_before = forward_diffuse(x0, t_tgt, base_noise, sched);

  // push back up with the inter-level kernel, then denoise down at sigma=0
  const double a_eff = sched.alpha_bar[t_cur] / sched.alpha_bar[t_tgt];
  double mean_diff = 0.0, var_before = 0.0, var_after = 0.0;
  const int trials = 64;
  std::size_t n = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const DTensor zeta = gaussian_tensor(rng, 3, 32, 32);
    DTensor x_up = x_before;
    for (std::size_t i = 0; i < x_up.size(); ++i)
      x_up.v[i] = std::sqrt(a_eff) * x_before.v[i] + std::sqrt(1.0 - a_eff) * zeta.v[i];

    const DTensor dummy(1, 32, 32, 0.0);
    const DenoiserInputs in{x_up, x_up, dummy, dummy, kPromptPlaceholder, 1.0, t_cur};
    const auto eps = den.predict_eps(in, nullptr);
    const auto x_after = sampler_step(x_up, t_cur, t_tgt, eps, sched, 0.0, nullptr);

    for (std::size_t i = 0; i < x_after.size(); ++i) {
      const double sig = std::sqrt(sched.alpha_bar[t_tgt]) * x0.v[i];
      mean_diff += x_after.v[i] - x_before.v[i];
      var_before += (x_before.v[i] - sig) * (x_before.v[i] - sig);
      var_after += (x_after.v[i] - sig) * (x_after.v[i] - sig);
      ++n;
    }
  }
  mean_diff /= static_cast<double>(n);
  var_before /= static_cast<double>(n);
  var_after /= static_cast<double>(n);

  CHECK(std::fabs(mean_diff) < 0.01);
  CHECK(var_before == Catch::Approx(1.0 - sched.alpha_bar[t_tgt]).margin(0.05));
  CHECK(var_after == Catch::Approx(var_before).margin(0.05));
}

TEST_CASE("sampler failure modes") {
  const auto sched = NoiseSchedule::linear();
  Rng rng(58);
  const auto canvas = fixtures::small_canvas(rng);
  const SoftMask light(canvas.mask.height(), canvas.mask.width(), 0.0);
  SamplerConfig cfg;
  cfg.steps = 3;
  cfg.seed = 9;

  SECTION("untrained denoiser is refused") {
    fixtures::UntrainedDenoiser den;
    CHECK_THROWS_WITH(outpaint(canvas, light, den, sched, cfg),
                      Catch::Matchers::ContainsSubstring("not trained"));
  }
  SECTION("non-finite state aborts with context") {
    fixtures::NanDenoiser den;
    CHECK_THROWS_WITH(outpaint(canvas, light, den, sched, cfg),
                      Catch::Matchers::ContainsSubstring("non-finite"));
  }
}

TEST_CASE("rgb blend mode preserves the known region bit-exactly") {
  const auto sched = NoiseSchedule::linear();
  Rng rng(59);
  const auto canvas = fixtures::small_canvas(rng);
  const SoftMask light(canvas.mask.height(), canvas.mask.width(), 0.0);
  fixtures::LinearDenoiser den;

  SamplerConfig cfg;
  cfg.steps = 4;
  cfg.reinject = 2;
  cfg.blend = SamplerConfig::Blend::rgb;
  cfg.seed = 31337;

  const auto res = outpaint(canvas, light, den, sched, cfg);
  for (int y = 0; y < canvas.mask.height(); ++y)
    for (int x = 0; x < canvas.mask.width(); ++x) {
      if (canvas.mask.at(y, x)) continue;
      for (int c = 0; c < 3; ++c)
        REQUIRE(res.image.at(c, y, x) == canvas.masked_image.at(c, y, x));
    }
}
