#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "lightsout/image.hpp"
#include "lightsout/metrics.hpp"
#include "lightsout/nn.hpp"
#include "lightsout/png_io.hpp"
#include "lightsout/rng.hpp"
#include "lightsout/tensor.hpp"

namespace lightsout {

// ---------------------------------------------------------------------------
// Built-in flare remover: a small fully-convolutional encoder-decoder that
// regresses the clean scene from the flared one. The head is zero-initialized
// and the output is residual, so an untrained net is the identity map and
// training only has to learn the (negative) flare layer.
// ---------------------------------------------------------------------------

struct SifrConfig {
  int channels = 12;
};

namespace detail {

// Replicate-pad on the bottom/right so two stride-2 levels divide evenly.
// The original content stays at the top-left corner.
inline Tensor pad_replicate_br(const Tensor& x, int h_pad, int w_pad) {
  Tensor y(x.c, h_pad, w_pad);
  for (int c = 0; c < x.c; ++c)
    for (int yy = 0; yy < h_pad; ++yy)
      for (int xx = 0; xx < w_pad; ++xx)
        y.at(c, yy, xx) = x.at(c, std::min(yy, x.h - 1), std::min(xx, x.w - 1));
  return y;
}

inline int round_up4(int n) { return (n + 3) / 4 * 4; }

}  // namespace detail

class ToySifr {
 public:
  SifrConfig cfg;
  bool trained = false;

  void init(const SifrConfig& config, std::uint64_t seed) {
    cfg = config;
    Rng rng(derive_seed(seed, 0x51f2));
    const int c = cfg.channels, c2 = 2 * cfg.channels;
    e1.init("sifr.e1", 3, c, 3, 2, 1, rng);
    e2.init("sifr.e2", c, c2, 3, 2, 1, rng);
    mid.init("sifr.mid", c2, c2, 3, 1, 1, rng);
    d1.init("sifr.d1", c2, c, 3, 1, 1, rng);
    d2.init("sifr.d2", c, c, 3, 1, 1, rng);
    head.init_zero("sifr.head", c, 3, 3, 1, 1);
    trained = false;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (Conv2d* l : {&e1, &e2, &mid, &d1, &d2, &head})
      for (Param* p : l->params()) out.push_back(p);
    return out;
  }

  // Accepts any dims >= 4 a side; pads internally and crops back, so crops
  // and full canvases go through the same weights.
  Tensor forward_train(const Tensor& x) {
    if (x.c != 3) throw std::invalid_argument("ToySifr: expected a 3-channel input");
    if (x.h < 4 || x.w < 4) throw std::invalid_argument("ToySifr: input smaller than 4x4");
    in_h = x.h;
    in_w = x.w;
    pad_h = detail::round_up4(x.h);
    pad_w = detail::round_up4(x.w);
    Tensor xp = detail::pad_replicate_br(x, pad_h, pad_w);
    Tensor h = a1.forward(e1.forward(xp));
    h = a2.forward(e2.forward(h));
    h = a3.forward(mid.forward(h));
    h = a4.forward(d1.forward(upsample_nearest2x(h)));
    h = a5.forward(d2.forward(upsample_nearest2x(h)));
    const Tensor delta = head.forward(h);
    Tensor out(3, in_h, in_w);
    for (int c = 0; c < 3; ++c)
      for (int yy = 0; yy < in_h; ++yy)
        for (int xx = 0; xx < in_w; ++xx) out.at(c, yy, xx) = x.at(c, yy, xx) + delta.at(c, yy, xx);
    return out;
  }

  void backward_train(const Tensor& g_out) {
    Tensor gd(3, pad_h, pad_w);
    for (int c = 0; c < 3; ++c)
      for (int yy = 0; yy < in_h; ++yy)
        for (int xx = 0; xx < in_w; ++xx) gd.at(c, yy, xx) = g_out.at(c, yy, xx);
    Tensor g = a5.backward(head.backward(gd));
    g = upsample_nearest2x_backward(d2.backward(g));
    g = a4.backward(g);
    g = upsample_nearest2x_backward(d1.backward(g));
    g = a3.backward(g);
    g = a2.backward(mid.backward(g));
    g = a1.backward(e2.backward(g));
    e1.backward(g);
  }

  void save(const std::string& path, std::uint64_t seed) {
    nlohmann::json meta{{"kind", "sifr"}, {"channels", cfg.channels}, {"seed", seed}};
    save_weights(path, params(), meta);
  }

  void load(const std::string& path) {
    nlohmann::json meta = load_weights_meta(path);
    SifrConfig c;
    c.channels = meta.at("channels").get<int>();
    init(c, 0);
    load_weights(path, params());
    trained = true;
  }

 private:
  Conv2d e1, e2, mid, d1, d2, head;
  SiLU a1, a2, a3, a4, a5;
  int in_h = 0, in_w = 0, pad_h = 0, pad_w = 0;
};

inline Image toy_sifr_apply(ToySifr& net, const Image& img) {
  if (!net.trained) throw std::runtime_error("toy_sifr_apply: model is not trained");
  const Tensor out = net.forward_train(to_float(image_to_tensor(img)));
  return tensor_to_image_clamped(to_double(out));
}

struct SifrSample {
  Tensor flared;  // 3,H,W input
  Tensor clean;   // 3,H,W target
};

struct SifrTrainConfig {
  double lr = 1e-3;
  int batch = 8;
  int steps = 1500;
  std::uint64_t seed = 0;
};

// Per-pixel L1 regression of clean from flared; returns the per-step
// batch-mean loss curve.
inline std::vector<double> train_toy_sifr(const std::vector<SifrSample>& dataset, ToySifr& net,
                                          const SifrTrainConfig& tc) {
  if (dataset.empty()) throw std::invalid_argument("train_toy_sifr: empty dataset");
  Rng rng(derive_seed(tc.seed, 0x7e4c));
  auto params = net.params();
  AdamConfig adam;
  adam.lr = tc.lr;

  const int n = static_cast<int>(dataset.size());
  std::vector<double> curve;
  curve.reserve(tc.steps);
  for (int step = 1; step <= tc.steps; ++step) {
    zero_grads(params);
    double loss = 0.0;
    for (int b = 0; b < tc.batch; ++b) {
      const SifrSample& s = dataset[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
      if (!s.flared.same_shape(s.clean))
        throw std::invalid_argument("train_toy_sifr: pair shape mismatch");
      const Tensor out = net.forward_train(s.flared);
      Tensor g(out.c, out.h, out.w);
      const double inv = 1.0 / (static_cast<double>(out.size()) * tc.batch);
      double l1 = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out.v[i] - s.clean.v[i];
        l1 += std::abs(d);
        g.v[i] = static_cast<float>((d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv);
      }
      loss += l1 / (static_cast<double>(out.size()) * tc.batch);
      net.backward_train(g);
    }
    adam_step(params, adam, step);
    curve.push_back(loss);
  }
  net.trained = true;
  return curve;
}

// ---------------------------------------------------------------------------
// Backend descriptor + file-protocol runner. Everything, built-in or
// external, consumes one PNG path and produces another, so swapping a real
// flare-removal model in means writing a one-line wrapper script.
// ---------------------------------------------------------------------------

struct SifrBackend {
  enum class Kind { identity, toy_unet, command };
  Kind kind = Kind::identity;
  std::string command_template;  // Kind::command; must contain {in} and {out}
  std::string weights;           // Kind::toy_unet
  double timeout_sec = 30.0;
};

// "identity" | "toy-unet" | "cmd:<template with {in} and {out}>"
inline SifrBackend parse_sifr_backend(const std::string& text) {
  SifrBackend b;
  if (text == "identity") {
    b.kind = SifrBackend::Kind::identity;
  } else if (text == "toy-unet") {
    b.kind = SifrBackend::Kind::toy_unet;
  } else if (text.rfind("cmd:", 0) == 0) {
    b.kind = SifrBackend::Kind::command;
    b.command_template = text.substr(4);
    if (b.command_template.find("{in}") == std::string::npos ||
        b.command_template.find("{out}") == std::string::npos)
      throw std::invalid_argument("sifr backend: command template must contain {in} and {out}");
  } else {
    throw std::invalid_argument("sifr backend: expected identity, toy-unet, or cmd:<template>, got \"" +
                                text + "\"");
  }
  return b;
}

inline std::string sifr_backend_name(const SifrBackend& b) {
  switch (b.kind) {
    case SifrBackend::Kind::identity: return "identity";
    case SifrBackend::Kind::toy_unet: return "toy-unet";
    default: return "cmd:" + b.command_template;
  }
}

namespace detail {

inline std::string shell_single_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'')
      out += "'\\''";
    else
      out += ch;
  }
  out += "'";
  return out;
}

inline std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

inline std::string read_text_tail(const std::string& path, std::size_t max_bytes = 2000) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  if (s.size() > max_bytes) s = "..." + s.substr(s.size() - max_bytes);
  return s;
}

}  // namespace detail

// Runs a backend on PNG files. For the command kind the template's {in} and
// {out} are substituted, the command runs under a watchdog, and the output
// must come back as a readable PNG with the input's dimensions.
class SifrRunner {
 public:
  explicit SifrRunner(const SifrBackend& backend) : backend_(backend) {
    if (backend_.kind == SifrBackend::Kind::toy_unet) {
      if (backend_.weights.empty())
        throw std::runtime_error("sifr backend: toy-unet needs a weights path");
      net_.load(backend_.weights);
    }
  }

  const SifrBackend& backend() const { return backend_; }

  void invoke(const std::string& in_path, const std::string& out_path) {
    const Image input = read_image_png(in_path);
    switch (backend_.kind) {
      case SifrBackend::Kind::identity:
        std::filesystem::copy_file(in_path, out_path,
                                   std::filesystem::copy_options::overwrite_existing);
        return;
      case SifrBackend::Kind::toy_unet:
        write_image_png(out_path, toy_sifr_apply(net_, input));
        return;
      case SifrBackend::Kind::command: break;
    }

    std::error_code ec;
    std::filesystem::remove(out_path, ec);  // a stale file must not pass validation
    const std::string log_path = out_path + ".log";
    const std::string cmd = detail::replace_all(
        detail::replace_all(backend_.command_template, "{in}", in_path), "{out}", out_path);
    char timeout_buf[32];
    std::snprintf(timeout_buf, sizeof timeout_buf, "%g", backend_.timeout_sec);
    const std::string full = "timeout " + std::string(timeout_buf) + "s sh -c " +
                             detail::shell_single_quote(cmd) + " > " +
                             detail::shell_single_quote(log_path) + " 2>&1";
    const int status = std::system(full.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) {
      const std::string diag = detail::read_text_tail(log_path);
      if (code == 124)
        throw std::runtime_error("sifr backend timed out after " + std::string(timeout_buf) +
                                 "s: " + cmd + (diag.empty() ? "" : "\n" + diag));
      throw std::runtime_error("sifr backend exited with code " + std::to_string(code) + ": " +
                               cmd + (diag.empty() ? "" : "\n" + diag));
    }

    Image output;
    try {
      output = read_image_png(out_path);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("sifr backend produced unreadable output: ") +
                               e.what());
    }
    if (output.height() != input.height() || output.width() != input.width())
      throw std::runtime_error(
          "sifr backend changed image dimensions: " + std::to_string(input.width()) + "x" +
          std::to_string(input.height()) + " -> " + std::to_string(output.width()) + "x" +
          std::to_string(output.height()));
  }

 private:
  SifrBackend backend_;
  ToySifr net_;
};

}  // namespace lightsout
