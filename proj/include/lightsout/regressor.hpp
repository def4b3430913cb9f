#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightsout/image.hpp"
#include "lightsout/light_model.hpp"
#include "lightsout/nn.hpp"
#include "lightsout/region.hpp"
#include "lightsout/rng.hpp"
#include "lightsout/tensor.hpp"

namespace lightsout {

struct RegressorConfig {
  int n_sources = 4;
  int channels = 16;  // extractor width, doubled after the first downsample
  int hidden = 64;    // head width
  int input_h = 64, input_w = 64;
  double confidence_threshold = 0.5;
};

// RGB canvas content plus the fill mask as a fourth channel.
inline Tensor canvas_to_input(const OutpaintCanvas& canvas) {
  return concat_channels(to_float(image_to_tensor(canvas.masked_image)),
                         to_float(mask_to_tensor(canvas.mask)));
}

// Strided conv stack pooled to a feature vector, then two small perceptron
// heads: one for the (x, y, r) triples, one for the confidences.
class LightRegressor {
 public:
  RegressorConfig cfg;
  bool trained = false;

  void init(const RegressorConfig& config, std::uint64_t seed) {
    cfg = config;
    if (cfg.n_sources < 1) throw std::invalid_argument("regressor: n_sources must be >= 1");
    Rng rng(derive_seed(seed, 0x9e9'7e55));
    const int c = cfg.channels, c2 = 2 * cfg.channels;
    c1.init("extract.c1", 4, c, 3, 2, 1, rng);
    c2_.init("extract.c2", c, c2, 3, 2, 1, rng);
    c3.init("extract.c3", c2, c2, 3, 2, 1, rng);
    gp1.init("params.fc1", c2, cfg.hidden, rng);
    gp2.init("params.fc2", cfg.hidden, 3 * cfg.n_sources, rng);
    hc1.init("conf.fc1", c2, cfg.hidden, rng);
    hc2.init("conf.fc2", cfg.hidden, cfg.n_sources, rng);
    // bias radii small at the start: softplus(-3) is about 0.05 canvas units
    for (int i = 0; i < cfg.n_sources; ++i) gp2.b.v[3 * i + 2] = -3.0f;
    trained = false;
  }

  std::vector<Param*> params() {
    std::vector<Param*> all;
    for (auto* layer : {&c1, &c2_, &c3})
      for (auto* p : layer->params()) all.push_back(p);
    for (auto* layer : {&gp1, &gp2, &hc1, &hc2})
      for (auto* p : layer->params()) all.push_back(p);
    return all;
  }

  void forward_raw(const OutpaintCanvas& canvas, std::vector<float>& raw_p,
                   std::vector<float>& raw_c) {
    if (canvas.masked_image.height() != cfg.input_h || canvas.masked_image.width() != cfg.input_w)
      throw std::invalid_argument("regressor: input dims do not match the trained resolution");
    Tensor t = a1.forward(c1.forward(canvas_to_input(canvas)));
    t = a2.forward(c2_.forward(t));
    t = a3.forward(c3.forward(t));
    pooled_c = t.c;
    pooled_h = t.h;
    pooled_w = t.w;
    const auto feat = global_avg_pool(t);
    hp_pre = gp1.forward(feat);
    raw_p = gp2.forward(vec_silu(hp_pre));
    hc_pre = hc1.forward(feat);
    raw_c = hc2.forward(vec_silu(hc_pre));
  }

  LightSourceSet decode(const std::vector<float>& raw_p, const std::vector<float>& raw_c) const {
    LightSourceSet out;
    out.params.resize(cfg.n_sources);
    out.confidences.resize(cfg.n_sources);
    for (int i = 0; i < cfg.n_sources; ++i) {
      out.params[i].x = 2.0 * sigmoidf(raw_p[3 * i]) - 0.5;
      out.params[i].y = 2.0 * sigmoidf(raw_p[3 * i + 1]) - 0.5;
      out.params[i].r = softplusf(raw_p[3 * i + 2]);
      out.confidences[i] = sigmoidf(raw_c[i]);
    }
    return out;
  }

  LightSourceSet forward(const OutpaintCanvas& canvas) {
    std::vector<float> raw_p, raw_c;
    forward_raw(canvas, raw_p, raw_c);
    return decode(raw_p, raw_c);
  }

  // grads arrive wrt the raw head outputs; activation chains live in the
  // training loop where the losses are formed
  void backward_raw(const std::vector<float>& g_raw_p, const std::vector<float>& g_raw_c) {
    auto gf = gp1.backward(vec_silu_backward(hp_pre, gp2.backward(g_raw_p)));
    const auto gf2 = hc1.backward(vec_silu_backward(hc_pre, hc2.backward(g_raw_c)));
    for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += gf2[i];
    Tensor g = global_avg_pool_backward(gf, pooled_c, pooled_h, pooled_w);
    g = c3.backward(a3.backward(g));
    g = c2_.backward(a2.backward(g));
    c1.backward(a1.backward(g));
  }

  void save(const std::string& path, std::uint64_t seed) {
    nlohmann::json meta{{"kind", "regressor"},          {"n_sources", cfg.n_sources},
                        {"channels", cfg.channels},     {"hidden", cfg.hidden},
                        {"input_h", cfg.input_h},       {"input_w", cfg.input_w},
                        {"threshold", cfg.confidence_threshold},
                        {"seed", seed}};
    save_weights(path, params(), meta);
  }

  void load(const std::string& path) {
    nlohmann::json probe = load_weights_meta(path);
    RegressorConfig c;
    c.n_sources = probe.at("n_sources").get<int>();
    c.channels = probe.at("channels").get<int>();
    c.hidden = probe.at("hidden").get<int>();
    c.input_h = probe.at("input_h").get<int>();
    c.input_w = probe.at("input_w").get<int>();
    c.confidence_threshold = probe.at("threshold").get<double>();
    init(c, 0);
    load_weights(path, params());
    trained = true;
  }

 private:
  Conv2d c1, c2_, c3;
  SiLU a1, a2, a3;
  Linear gp1, gp2, hc1, hc2;
  std::vector<float> hp_pre, hc_pre;
  int pooled_c = 0, pooled_h = 0, pooled_w = 0;
};

inline LightSourceSet regressor_forward(LightRegressor& model, const OutpaintCanvas& canvas) {
  return model.forward(canvas);
}

struct RegressorSample {
  OutpaintCanvas canvas;
  LightSourceSet gt;
};

struct RegressorTrainConfig {
  double lr = 1e-4;
  int batch = 32;
  int epochs = 100;
  std::uint64_t seed = 0;
};

struct RegressorTrainResult {
  std::vector<double> loss_curve;  // batch-mean total loss per optimizer step
  UncertaintyWeights weights;
};

inline RegressorTrainResult train_regressor(const std::vector<RegressorSample>& dataset,
                                            LightRegressor& model,
                                            const RegressorTrainConfig& tc) {
  if (dataset.empty()) throw std::invalid_argument("train_regressor: empty dataset");
  Rng rng(derive_seed(tc.seed, 0x7'2a1'9e55));

  Param uncert;
  uncert.resize("uncertainty.s", {2});
  auto params = model.params();
  params.push_back(&uncert);
  AdamConfig adam;
  adam.lr = tc.lr;

  RegressorTrainResult result;
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  const int n = static_cast<int>(dataset.size());
  const int nsrc = model.cfg.n_sources;
  int step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    for (int start = 0; start < n; start += tc.batch) {
      const int bsz = std::min(tc.batch, n - start);
      zero_grads(params);
      double batch_loss = 0.0;
      for (int bi = 0; bi < bsz; ++bi) {
        const auto& sample = dataset[order[start + bi]];
        if (sample.gt.size() != nsrc)
          throw std::invalid_argument("train_regressor: gt set size mismatch");
        std::vector<float> raw_p, raw_c;
        model.forward_raw(sample.canvas, raw_p, raw_c);
        const LightSourceSet pred = model.decode(raw_p, raw_c);

        const auto assignment = bipartite_match(pred, sample.gt);
        const double l_pos = position_loss(pred, sample.gt, assignment);
        const auto targets = matched_confidence_targets(sample.gt, assignment);
        const double l_conf = confidence_loss(pred.confidences, targets);
        const UncertaintyWeights w{uncert.v[0], uncert.v[1]};
        batch_loss += total_loss(l_pos, l_conf, w);

        const double wp = 1.0 / (2.0 * w.sigma1_sq() * bsz);
        const double wc = 1.0 / (2.0 * w.sigma2_sq() * bsz);

        std::vector<float> g_raw_p(raw_p.size(), 0.0f);
        for (int pi = 0; pi < nsrc; ++pi) {
          const int gi = assignment[pi];
          if (!is_active(sample.gt.confidences[gi])) continue;
          const auto& pp = pred.params[pi];
          const auto& gp = sample.gt.params[gi];
          const double res[3] = {pp.x - gp.x, pp.y - gp.y, pp.r - gp.r};
          for (int k = 0; k < 3; ++k) {
            const double gl = smooth_l1_grad(res[k]) * wp;
            const float raw = raw_p[3 * pi + k];
            const float s = sigmoidf(raw);
            const double dact = k < 2 ? 2.0 * s * (1.0 - s) : s;  // range map vs softplus
            g_raw_p[3 * pi + k] = static_cast<float>(gl * dact);
          }
        }
        std::vector<float> g_raw_c(raw_c.size());
        for (int pi = 0; pi < nsrc; ++pi)
          g_raw_c[pi] = static_cast<float>((pred.confidences[pi] - targets[pi]) * wc);

        model.backward_raw(g_raw_p, g_raw_c);
        const auto sg = total_loss_grad_s(l_pos, l_conf, w);
        uncert.g[0] += static_cast<float>(sg.ds1 / bsz);
        uncert.g[1] += static_cast<float>(sg.ds2 / bsz);
      }
      result.loss_curve.push_back(batch_loss / bsz);
      adam_step(params, adam, ++step);
    }
  }
  model.trained = true;
  result.weights = {uncert.v[0], uncert.v[1]};
  return result;
}

// Dense ablation: same inputs, but the network paints the light mask directly
// instead of predicting parameters for the rendering function.
class DenseMaskNet {
 public:
  int channels = 16;
  int input_h = 64, input_w = 64;
  bool trained = false;

  void init(int c, int h, int w, std::uint64_t seed) {
    if (h % 4 != 0 || w % 4 != 0)
      throw std::invalid_argument("dense baseline: dims must be divisible by 4");
    channels = c;
    input_h = h;
    input_w = w;
    Rng rng(derive_seed(seed, 0xde'5e'ba'5e));
    e1.init("dense.e1", 4, c, 3, 2, 1, rng);
    e2.init("dense.e2", c, 2 * c, 3, 2, 1, rng);
    mid.init("dense.mid", 2 * c, 2 * c, 3, 1, 1, rng);
    d1.init("dense.d1", 2 * c, c, 3, 1, 1, rng);
    d2.init("dense.d2", c, c, 3, 1, 1, rng);
    head.init("dense.head", c, 1, 3, 1, 1, rng);
    trained = false;
  }

  std::vector<Param*> params() {
    std::vector<Param*> all;
    for (auto* layer : {&e1, &e2, &mid, &d1, &d2, &head})
      for (auto* p : layer->params()) all.push_back(p);
    return all;
  }

  Tensor forward_raw(const OutpaintCanvas& canvas) {
    if (canvas.masked_image.height() != input_h || canvas.masked_image.width() != input_w)
      throw std::invalid_argument("dense baseline: input dims mismatch");
    Tensor t = a1.forward(e1.forward(canvas_to_input(canvas)));
    t = a2.forward(e2.forward(t));
    t = a3.forward(mid.forward(t));
    t = a4.forward(d1.forward(upsample_nearest2x(t)));
    t = a5.forward(d2.forward(upsample_nearest2x(t)));
    return head.forward(t);
  }

  SoftMask predict(const OutpaintCanvas& canvas) {
    const Tensor raw = forward_raw(canvas);
    SoftMask out(raw.h, raw.w);
    for (int y = 0; y < raw.h; ++y)
      for (int x = 0; x < raw.w; ++x) out.at(y, x) = sigmoidf(raw.at(0, y, x));
    return out;
  }

  void backward_raw(const Tensor& g_raw) {
    Tensor g = head.backward(g_raw);
    g = upsample_nearest2x_backward(d2.backward(a5.backward(g)));
    g = upsample_nearest2x_backward(d1.backward(a4.backward(g)));
    g = mid.backward(a3.backward(g));
    g = e2.backward(a2.backward(g));
    e1.backward(a1.backward(g));
  }

 private:
  Conv2d e1, e2, mid, d1, d2, head;
  SiLU a1, a2, a3, a4, a5;
};

struct DenseSample {
  OutpaintCanvas canvas;
  SoftMask target;
};

inline std::vector<double> train_dense_baseline(const std::vector<DenseSample>& dataset,
                                                DenseMaskNet& model,
                                                const RegressorTrainConfig& tc) {
  if (dataset.empty()) throw std::invalid_argument("train_dense_baseline: empty dataset");
  Rng rng(derive_seed(tc.seed, 0xd'e2'5e55));
  auto params = model.params();
  AdamConfig adam;
  adam.lr = tc.lr;

  std::vector<double> curve;
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  const int n = static_cast<int>(dataset.size());
  int step = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
    for (int start = 0; start < n; start += tc.batch) {
      const int bsz = std::min(tc.batch, n - start);
      zero_grads(params);
      double batch_loss = 0.0;
      for (int bi = 0; bi < bsz; ++bi) {
        const auto& sample = dataset[order[start + bi]];
        const Tensor raw = model.forward_raw(sample.canvas);
        const double inv_px = 1.0 / (double(raw.h) * raw.w);
        Tensor g(raw.c, raw.h, raw.w);
        double loss = 0.0;
        for (int y = 0; y < raw.h; ++y)
          for (int x = 0; x < raw.w; ++x) {
            const float m = sigmoidf(raw.at(0, y, x));
            const double diff = double(m) - sample.target.at(y, x);
            loss += diff * diff * inv_px;
            g.at(0, y, x) =
                static_cast<float>(2.0 * diff * inv_px * m * (1.0 - m) / bsz);
          }
        batch_loss += loss;
        model.backward_raw(g);
      }
      curve.push_back(batch_loss / bsz);
      adam_step(params, adam, ++step);
    }
  }
  model.trained = true;
  return curve;
}

}  // namespace lightsout
