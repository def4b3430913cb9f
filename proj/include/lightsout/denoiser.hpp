#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightsout/lora.hpp"
#include "lightsout/nn.hpp"
#include "lightsout/rng.hpp"
#include "lightsout/sampler.hpp"
#include "lightsout/schedule.hpp"
#include "lightsout/tensor.hpp"

namespace lightsout {

struct DenoiserConfig {
  int channels = 12;  // width at full resolution, doubled at half resolution
  int t_dim = 32;     // sinusoidal embedding size
  int t_hidden = 64;
};

// Pixel-space encoder-decoder over [x_t, I_M, M, M_L] with a timestep FiLM at
// the bottleneck, a zero-initialized noise head, and an auxiliary light-mask
// head. Small enough to train on one core, shaped like the real thing.
class ToyDenoiser : public Denoiser {
 public:
  DenoiserConfig cfg;
  bool trained_flag = false;

  void init(const DenoiserConfig& config, std::uint64_t seed) {
    cfg = config;
    Rng rng(derive_seed(seed, 0xd0'15'e4'11));
    const int c = cfg.channels, c2 = 2 * cfg.channels;
    enc1.init("den.enc1", 8, c, 3, 1, 1, rng);
    enc2.init("den.enc2", c, c2, 3, 2, 1, rng);
    mid1.init("den.mid1", c2, c2, 3, 1, 1, rng);
    mid2.init("den.mid2", c2, c2, 3, 1, 1, rng);
    dec.init("den.dec", c2 + c, c, 3, 1, 1, rng);
    eps_head.init_zero("den.eps", c, 3, 3, 1, 1);  // untrained model predicts zero noise
    aux_head.init("den.aux", c, 1, 3, 1, 1, rng);
    tl1.init("den.t1", cfg.t_dim, cfg.t_hidden, rng);
    tl2.init("den.t2", cfg.t_hidden, 2 * c2, rng);  // per-channel scale and shift
    trained_flag = false;
  }

  bool is_trained() const override { return trained_flag; }

  std::vector<Param*> params() {
    std::vector<Param*> all;
    for (auto* layer : conv_layers())
      for (auto* p : layer->params()) all.push_back(p);
    for (auto* layer : {&tl1, &tl2})
      for (auto* p : layer->params()) all.push_back(p);
    return all;
  }

  std::vector<Conv2d*> conv_layers() {
    return {&enc1, &enc2, &mid1, &mid2, &dec, &eps_head, &aux_head};
  }

  // training-path forward over an assembled 8-channel input
  void forward_train(const Tensor& input, int t, Tensor& eps_out, Tensor& aux_raw_out) {
    if (input.c != 8) throw std::invalid_argument("denoiser: expected 8 input channels");
    if (input.h % 2 != 0 || input.w % 2 != 0)
      throw std::invalid_argument("denoiser: dims must be even");

    skip = a1.forward(enc1.forward(input));
    Tensor h = a2.forward(enc2.forward(skip));
    film_in = mid1.forward(h);

    const auto emb = timestep_embedding(t, cfg.t_dim);
    t_pre = tl1.forward(emb);
    film_sb = tl2.forward(vec_silu(t_pre));
    Tensor modulated(film_in.c, film_in.h, film_in.w);
    for (int c = 0; c < film_in.c; ++c) {
      const float s = 1.0f + film_sb[c];
      const float b = film_sb[film_in.c + c];
      for (int y = 0; y < film_in.h; ++y)
        for (int x = 0; x < film_in.w; ++x) modulated.at(c, y, x) = film_in.at(c, y, x) * s + b;
    }
    h = a4.forward(mid2.forward(a3.forward(modulated)));
    dec_in = concat_channels(upsample_nearest2x(h), skip);
    Tensor d = a5.forward(dec.forward(dec_in));
    eps_out = eps_head.forward(d);
    aux_raw_out = aux_head.forward(d);
  }

  void backward_train(const Tensor& g_eps, const Tensor& g_aux_raw) {
    Tensor gd = eps_head.backward(g_eps);
    const Tensor gd2 = aux_head.backward(g_aux_raw);
    for (std::size_t i = 0; i < gd.size(); ++i) gd.v[i] += gd2.v[i];
    const Tensor g_cat = dec.backward(a5.backward(gd));
    Tensor g_up, g_skip;
    split_channels(g_cat, g_cat.c - skip.c, g_up, g_skip);
    Tensor g = mid2.backward(a4.backward(upsample_nearest2x_backward(g_up)));
    g = a3.backward(g);

    // FiLM: out = in*(1+s) + b, per bottleneck channel
    std::vector<float> g_sb(2 * film_in.c, 0.0f);
    Tensor g_film(film_in.c, film_in.h, film_in.w);
    for (int c = 0; c < film_in.c; ++c) {
      const float s = 1.0f + film_sb[c];
      float gs = 0.0f, gb = 0.0f;
      for (int y = 0; y < film_in.h; ++y)
        for (int x = 0; x < film_in.w; ++x) {
          const float gy = g.at(c, y, x);
          g_film.at(c, y, x) = gy * s;
          gs += gy * film_in.at(c, y, x);
          gb += gy;
        }
      g_sb[c] = gs;
      g_sb[film_in.c + c] = gb;
    }
    tl1.backward(vec_silu_backward(t_pre, tl2.backward(g_sb)));

    g = enc2.backward(a2.backward(mid1.backward(g_film)));
    for (std::size_t i = 0; i < g_skip.size(); ++i) g.v[i] += g_skip.v[i];
    enc1.backward(a1.backward(g));
  }

  DTensor predict_eps(const DenoiserInputs& in, DTensor* aux_light = nullptr) override {
    const Tensor x_t = to_float(in.x_t);
    const Tensor base = concat_channels(concat_channels(x_t, to_float(in.masked_image)),
                                        to_float(in.mask));
    const Tensor light = to_float(in.light_mask);

    Tensor eps_c, aux_raw;
    forward_train(concat_channels(base, light), in.t, eps_c, aux_raw);
    if (aux_light != nullptr) {
      DTensor aux(1, aux_raw.h, aux_raw.w);
      for (std::size_t i = 0; i < aux_raw.size(); ++i)
        aux.v[i] = 1.0 / (1.0 + std::exp(-double(aux_raw.v[i])));
      *aux_light = std::move(aux);
    }
    if (in.guidance == 1.0) return to_double(eps_c);

    // classifier-free combination against a light-mask-free pass
    Tensor eps_u, aux_unused;
    forward_train(concat_channels(base, Tensor(1, light.h, light.w, 0.0f)), in.t, eps_u,
                  aux_unused);
    DTensor out(eps_c.c, eps_c.h, eps_c.w);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double u = eps_u.v[i], c = eps_c.v[i];
      out.v[i] = u + in.guidance * (c - u);
    }
    return out;
  }

  void save(const std::string& path, std::uint64_t seed) {
    nlohmann::json meta{{"kind", "denoiser"},
                        {"channels", cfg.channels},
                        {"t_dim", cfg.t_dim},
                        {"t_hidden", cfg.t_hidden},
                        {"seed", seed}};
    save_weights(path, params(), meta);
  }

  void load(const std::string& path) {
    nlohmann::json meta = load_weights_meta(path);
    DenoiserConfig c;
    c.channels = meta.at("channels").get<int>();
    c.t_dim = meta.at("t_dim").get<int>();
    c.t_hidden = meta.at("t_hidden").get<int>();
    init(c, 0);
    load_weights(path, params());
    trained_flag = true;
  }

 private:
  Conv2d enc1, enc2, mid1, mid2, dec, eps_head, aux_head;
  Linear tl1, tl2;
  SiLU a1, a2, a3, a4, a5;
  Tensor skip, film_in, dec_in;
  std::vector<float> t_pre, film_sb;
};

struct DenoiserSample {
  Tensor x0;     // 3,H,W complete target scene
  Tensor cond;   // 4,H,W: masked image + mask
  Tensor light;  // 1,H,W ground-truth M_L
};

inline DenoiserSample make_denoiser_sample(const Image& full, const OutpaintCanvas& canvas,
                                           const SoftMask& light) {
  return {to_float(image_to_tensor(full)),
          concat_channels(to_float(image_to_tensor(canvas.masked_image)),
                          to_float(mask_to_tensor(canvas.mask))),
          to_float(softmask_to_tensor(light))};
}

struct DenoiserTrainConfig {
  double lr = 1e-4;
  int batch = 8;
  int steps = 2000;
  double lambda_light = 0.1;
  double cond_dropout = 0.1;  // chance to blank M_L so guidance has an unconditional mode
  bool lora_only = false;
  int lora_rank = 4;
  double lora_scale = 1.0;
  std::uint64_t seed = 0;
};

struct DenoiserTrainResult {
  std::vector<double> loss_curve;  // eps term + lambda * condition term, per step
  std::vector<double> eps_curve;   // eps term alone
  std::uint64_t lora_base_before = 0;
  std::uint64_t lora_base_after = 0;
};

inline DenoiserTrainResult train_denoiser(const std::vector<DenoiserSample>& dataset,
                                          ToyDenoiser& model, const NoiseSchedule& sched,
                                          const DenoiserTrainConfig& tc) {
  if (dataset.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
  Rng rng(derive_seed(tc.seed, 0xdeb'ace));

  std::vector<ConvLoRA> adapters;
  std::vector<Param*> active;
  auto convs = model.conv_layers();
  if (tc.lora_only) {
    adapters.resize(convs.size());
    for (std::size_t i = 0; i < convs.size(); ++i) {
      // narrow layers (the 1-channel aux head) cap the usable rank
      const int max_rank =
          std::min(convs[i]->out_c, convs[i]->in_c * convs[i]->k * convs[i]->k);
      adapters[i].attach(*convs[i], std::min(tc.lora_rank, max_rank), tc.lora_scale, rng);
      active.push_back(&adapters[i].A);
      active.push_back(&adapters[i].B);
    }
  } else {
    active = model.params();
  }
  auto all_params = model.params();

  AdamConfig adam;
  adam.lr = tc.lr;
  DenoiserTrainResult result;
  if (tc.lora_only) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto& a : adapters) h ^= a.base_checksum();
    result.lora_base_before = h;
  }

  const int n = static_cast<int>(dataset.size());
  for (int step = 1; step <= tc.steps; ++step) {
    zero_grads(all_params);
    zero_grads(active);
    double loss_eps_total = 0.0, loss_cond_total = 0.0;
    for (int bi = 0; bi < tc.batch; ++bi) {
      const auto& sample = dataset[rng.uniform_int(0, n - 1)];
      const int t = rng.uniform_int(1, sched.T);
      const bool drop = rng.uniform() < tc.cond_dropout;

      const double ab = sched.alpha_bar[t];
      const float ca = static_cast<float>(std::sqrt(ab));
      const float cb = static_cast<float>(std::sqrt(1.0 - ab));
      Tensor eps(sample.x0.c, sample.x0.h, sample.x0.w);
      for (auto& v : eps.v) v = static_cast<float>(rng.normal());
      Tensor x_t(sample.x0.c, sample.x0.h, sample.x0.w);
      for (std::size_t i = 0; i < x_t.size(); ++i)
        x_t.v[i] = ca * sample.x0.v[i] + cb * eps.v[i];

      const Tensor light_in =
          drop ? Tensor(1, sample.light.h, sample.light.w, 0.0f) : sample.light;
      const Tensor input =
          concat_channels(concat_channels(x_t, sample.cond), light_in);

      Tensor eps_hat, aux_raw;
      model.forward_train(input, t, eps_hat, aux_raw);

      const double inv_eps_n = 1.0 / double(eps_hat.size());
      Tensor g_eps(eps_hat.c, eps_hat.h, eps_hat.w);
      double loss_eps = 0.0;
      for (std::size_t i = 0; i < eps_hat.size(); ++i) {
        const double d = double(eps_hat.v[i]) - eps.v[i];
        loss_eps += d * d * inv_eps_n;
        g_eps.v[i] = static_cast<float>(2.0 * d * inv_eps_n / tc.batch);
      }

      const double inv_px = 1.0 / double(aux_raw.size());
      Tensor g_aux(aux_raw.c, aux_raw.h, aux_raw.w);
      double loss_cond = 0.0;
      for (std::size_t i = 0; i < aux_raw.size(); ++i) {
        const double m = 1.0 / (1.0 + std::exp(-double(aux_raw.v[i])));
        const double d = m - sample.light.v[i];
        loss_cond += d * d * inv_px;
        g_aux.v[i] =
            static_cast<float>(tc.lambda_light * 2.0 * d * inv_px * m * (1.0 - m) / tc.batch);
      }

      model.backward_train(g_eps, g_aux);
      loss_eps_total += loss_eps / tc.batch;
      loss_cond_total += loss_cond / tc.batch;
    }

    if (tc.lora_only) {
      // conv grads were accumulated over the whole batch; project once
      for (std::size_t i = 0; i < convs.size(); ++i) adapters[i].accumulate_grads(*convs[i]);
    }
    adam_step(active, adam, step);
    if (tc.lora_only)
      for (std::size_t i = 0; i < convs.size(); ++i) adapters[i].materialize(*convs[i]);

    result.eps_curve.push_back(loss_eps_total);
    result.loss_curve.push_back(loss_eps_total + tc.lambda_light * loss_cond_total);
  }

  if (tc.lora_only) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto& a : adapters) h ^= a.base_checksum();
    result.lora_base_after = h;
  }
  model.trained_flag = true;
  return result;
}

}  // namespace lightsout
