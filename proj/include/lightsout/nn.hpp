#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lightsout/hash.hpp"
#include "lightsout/rng.hpp"
#include "lightsout/tensor.hpp"

namespace lightsout {

// One learnable tensor plus its gradient and Adam moments.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<float> v, g, m, mv;

  void resize(std::string n, std::vector<int> s) {
    name = std::move(n);
    shape = std::move(s);
    std::size_t total = 1;
    for (int d : shape) total *= static_cast<std::size_t>(d);
    v.assign(total, 0.0f);
    g.assign(total, 0.0f);
    m.assign(total, 0.0f);
    mv.assign(total, 0.0f);
  }

  std::size_t size() const { return v.size(); }

  void init_normal(Rng& rng, double stddev) {
    for (auto& x : v) x = static_cast<float>(rng.normal() * stddev);
  }
};

inline void zero_grads(const std::vector<Param*>& params) {
  for (auto* p : params) std::fill(p->g.begin(), p->g.end(), 0.0f);
}

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// step_index starts at 1 for the first update
inline void adam_step(const std::vector<Param*>& params, const AdamConfig& cfg, int step_index) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, step_index);
  const double bc2 = 1.0 - std::pow(cfg.beta2, step_index);
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->g[i];
      const double m = cfg.beta1 * p->m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p->mv[i] + (1.0 - cfg.beta2) * g * g;
      p->m[i] = static_cast<float>(m);
      p->mv[i] = static_cast<float>(v);
      p->v[i] -= static_cast<float>(cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps));
    }
  }
}

// -------- layers --------

struct Conv2d {
  int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
  Param w, b;
  // forward caches for backward
  std::vector<float> cols;
  int cached_h = 0, cached_w = 0;

  void init(const std::string& name, int ic, int oc, int kernel, int str, int padding, Rng& rng) {
    in_c = ic;
    out_c = oc;
    k = kernel;
    stride = str;
    pad = padding;
    w.resize(name + ".w", {oc, ic, k, k});
    b.resize(name + ".b", {oc});
    w.init_normal(rng, std::sqrt(2.0 / (ic * k * k)));
  }

  void init_zero(const std::string& name, int ic, int oc, int kernel, int str, int padding) {
    in_c = ic;
    out_c = oc;
    k = kernel;
    stride = str;
    pad = padding;
    w.resize(name + ".w", {oc, ic, k, k});
    b.resize(name + ".b", {oc});
  }

  Tensor forward(const Tensor& x) {
    if (x.c != in_c) throw std::invalid_argument("Conv2d: channel mismatch at " + w.name);
    cached_h = x.h;
    cached_w = x.w;
    return conv2d_fwd<float>(x, w.v, b.v, out_c, k, stride, pad, &cols);
  }

  Tensor backward(const Tensor& gy) {
    return conv2d_bwd<float>(gy, cols, w.v, w.g, b.g, in_c, cached_h, cached_w, k, stride, pad);
  }

  std::vector<Param*> params() { return {&w, &b}; }
};

struct Linear {
  int in_n = 0, out_n = 0;
  Param w, b;
  std::vector<float> x_cache;

  void init(const std::string& name, int in, int out, Rng& rng) {
    in_n = in;
    out_n = out;
    w.resize(name + ".w", {out, in});
    b.resize(name + ".b", {out});
    w.init_normal(rng, std::sqrt(2.0 / in));
  }

  std::vector<float> forward(const std::vector<float>& x) {
    if (static_cast<int>(x.size()) != in_n)
      throw std::invalid_argument("Linear: input size mismatch at " + w.name);
    x_cache = x;
    std::vector<float> y(out_n);
    for (int o = 0; o < out_n; ++o) {
      float s = b.v[o];
      const float* row = w.v.data() + static_cast<std::size_t>(o) * in_n;
      for (int i = 0; i < in_n; ++i) s += row[i] * x[i];
      y[o] = s;
    }
    return y;
  }

  std::vector<float> backward(const std::vector<float>& gy) {
    std::vector<float> gx(in_n, 0.0f);
    for (int o = 0; o < out_n; ++o) {
      const float go = gy[o];
      b.g[o] += go;
      float* grow = w.g.data() + static_cast<std::size_t>(o) * in_n;
      const float* row = w.v.data() + static_cast<std::size_t>(o) * in_n;
      for (int i = 0; i < in_n; ++i) {
        grow[i] += go * x_cache[i];
        gx[i] += row[i] * go;
      }
    }
    return gx;
  }

  std::vector<Param*> params() { return {&w, &b}; }
};

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

inline float softplusf(float x) {
  if (x > 20.0f) return x;
  if (x < -20.0f) return std::exp(x);
  return std::log1p(std::exp(x));
}

struct SiLU {
  Tensor x_cache;
  Tensor forward(const Tensor& x) {
    x_cache = x;
    Tensor y = x;
    for (auto& v : y.v) v = v * sigmoidf(v);
    return y;
  }
  Tensor backward(const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const float s = sigmoidf(x_cache.v[i]);
      gx.v[i] *= s * (1.0f + x_cache.v[i] * (1.0f - s));
    }
    return gx;
  }
};

// vector flavors for the perceptron heads
inline std::vector<float> vec_silu(const std::vector<float>& x) {
  std::vector<float> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoidf(x[i]);
  return y;
}

inline std::vector<float> vec_silu_backward(const std::vector<float>& x,
                                            const std::vector<float>& gy) {
  std::vector<float> gx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float s = sigmoidf(x[i]);
    gx[i] = gy[i] * s * (1.0f + x[i] * (1.0f - s));
  }
  return gx;
}

struct ReLU {
  Tensor x_cache;
  Tensor forward(const Tensor& x) {
    x_cache = x;
    Tensor y = x;
    for (auto& v : y.v) v = v > 0.0f ? v : 0.0f;
    return y;
  }
  Tensor backward(const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (x_cache.v[i] <= 0.0f) gx.v[i] = 0.0f;
    return gx;
  }
};

inline Tensor upsample_nearest2x(const Tensor& x) {
  Tensor y(x.c, x.h * 2, x.w * 2);
  for (int ci = 0; ci < x.c; ++ci)
    for (int yi = 0; yi < y.h; ++yi)
      for (int xi = 0; xi < y.w; ++xi) y.at(ci, yi, xi) = x.at(ci, yi / 2, xi / 2);
  return y;
}

inline Tensor upsample_nearest2x_backward(const Tensor& gy) {
  Tensor gx(gy.c, gy.h / 2, gy.w / 2);
  for (int ci = 0; ci < gy.c; ++ci)
    for (int yi = 0; yi < gy.h; ++yi)
      for (int xi = 0; xi < gy.w; ++xi) gx.at(ci, yi / 2, xi / 2) += gy.at(ci, yi, xi);
  return gx;
}

inline std::vector<float> global_avg_pool(const Tensor& x) {
  std::vector<float> y(x.c, 0.0f);
  const float inv = 1.0f / static_cast<float>(x.h * x.w);
  for (int ci = 0; ci < x.c; ++ci) {
    float s = 0.0f;
    for (int yi = 0; yi < x.h; ++yi)
      for (int xi = 0; xi < x.w; ++xi) s += x.at(ci, yi, xi);
    y[ci] = s * inv;
  }
  return y;
}

inline Tensor global_avg_pool_backward(const std::vector<float>& gy, int c, int h, int w) {
  Tensor gx(c, h, w);
  const float inv = 1.0f / static_cast<float>(h * w);
  for (int ci = 0; ci < c; ++ci) {
    const float v = gy[ci] * inv;
    for (int yi = 0; yi < h; ++yi)
      for (int xi = 0; xi < w; ++xi) gx.at(ci, yi, xi) = v;
  }
  return gx;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.h != b.h || a.w != b.w) throw std::invalid_argument("concat_channels: spatial mismatch");
  Tensor y(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), y.v.begin());
  std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.v.size());
  return y;
}

inline void split_channels(const Tensor& y, int c_first, Tensor& ga, Tensor& gb) {
  ga = Tensor(c_first, y.h, y.w);
  gb = Tensor(y.c - c_first, y.h, y.w);
  std::copy(y.v.begin(), y.v.begin() + ga.v.size(), ga.v.begin());
  std::copy(y.v.begin() + ga.v.size(), y.v.end(), gb.v.begin());
}

// Sinusoidal timestep features, the usual sin/cos ladder.
inline std::vector<float> timestep_embedding(int t, int dim) {
  std::vector<float> e(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e[i] = static_cast<float>(std::sin(t * freq));
    e[half + i] = static_cast<float>(std::cos(t * freq));
  }
  return e;
}

// -------- weight container --------
// magic, u64 header length, JSON header (names/shapes/meta), raw float32 data.

inline constexpr char kWeightsMagic[8] = {'L', 'O', 'W', 'T', 'S', '0', '1', '\n'};

inline void save_weights(const std::string& path, const std::vector<Param*>& params,
                         const nlohmann::json& meta) {
  nlohmann::json header;
  header["schema"] = 1;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  for (const auto* p : params)
    header["tensors"].push_back({{"name", p->name}, {"shape", p->shape}});
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open weights file for writing: " + path);
  f.write(kWeightsMagic, 8);
  const std::uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto* p : params)
    f.write(reinterpret_cast<const char*>(p->v.data()),
            static_cast<std::streamsize>(p->size() * sizeof(float)));
  if (!f) throw std::runtime_error("short write on weights file: " + path);
}

inline nlohmann::json load_weights(const std::string& path, const std::vector<Param*>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open weights file: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kWeightsMagic, 8) != 0)
    throw std::runtime_error("not a weights file: " + path);
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  const auto header = nlohmann::json::parse(hs);

  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size())
    throw std::runtime_error("weights file tensor count mismatch: " + path);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i]->name ||
        t.at("shape").get<std::vector<int>>() != params[i]->shape)
      throw std::runtime_error("weights file layout mismatch at tensor '" + params[i]->name +
                               "': " + path);
    f.read(reinterpret_cast<char*>(params[i]->v.data()),
           static_cast<std::streamsize>(params[i]->size() * sizeof(float)));
  }
  if (!f) throw std::runtime_error("truncated weights file: " + path);
  return header.at("meta");
}

// Header-only peek, used to size a model before loading its tensors.
inline nlohmann::json load_weights_meta(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open weights file: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kWeightsMagic, 8) != 0)
    throw std::runtime_error("not a weights file: " + path);
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw std::runtime_error("truncated weights file: " + path);
  return nlohmann::json::parse(hs).at("meta");
}

inline std::uint64_t weights_checksum(const std::vector<Param*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* p : params) h = fnv1a64(p->v.data(), p->size() * sizeof(float), h);
  return h;
}

}  // namespace lightsout
