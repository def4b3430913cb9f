#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "lightsout/image.hpp"

namespace lightsout {

// CHW tensor. Float for network internals, double where tests demand
// reference-precision math (the conv kernels are templated so the exact same
// code path can be gradient-checked in double).
template <typename T>
struct BasicTensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  BasicTensor() = default;
  BasicTensor(int channels, int height, int width, T fill = T(0))
      : c(channels), h(height), w(width),
        v(static_cast<std::size_t>(channels) * height * width, fill) {
    if (channels <= 0 || height <= 0 || width <= 0)
      throw std::invalid_argument("BasicTensor: dimensions must be positive");
  }

  T& at(int ci, int yi, int xi) { return v[(static_cast<std::size_t>(ci) * h + yi) * w + xi]; }
  T at(int ci, int yi, int xi) const {
    return v[(static_cast<std::size_t>(ci) * h + yi) * w + xi];
  }

  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  bool same_shape(const BasicTensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

using Tensor = BasicTensor<float>;
using DTensor = BasicTensor<double>;

inline Tensor to_float(const DTensor& d) {
  Tensor t(d.c, d.h, d.w);
  for (std::size_t i = 0; i < d.size(); ++i) t.v[i] = static_cast<float>(d.v[i]);
  return t;
}

inline DTensor to_double(const Tensor& t) {
  DTensor d(t.c, t.h, t.w);
  for (std::size_t i = 0; i < t.size(); ++i) d.v[i] = static_cast<double>(t.v[i]);
  return d;
}

inline DTensor image_to_tensor(const Image& img) {
  DTensor t(3, img.height(), img.width());
  std::copy(img.data(), img.data() + img.size(), t.v.begin());
  return t;
}

inline Image tensor_to_image_clamped(const DTensor& t) {
  if (t.c != 3) throw std::invalid_argument("tensor_to_image_clamped: need 3 channels");
  Image img(t.h, t.w);
  for (std::size_t i = 0; i < t.size(); ++i) img.data()[i] = clamp01(t.v[i]);
  return img;
}

inline DTensor mask_to_tensor(const BinaryMask& m) {
  DTensor t(1, m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) t.v[i] = m.data()[i];
  return t;
}

inline DTensor softmask_to_tensor(const SoftMask& m) {
  DTensor t(1, m.height(), m.width());
  std::copy(m.data(), m.data() + m.size(), t.v.begin());
  return t;
}

inline SoftMask tensor_to_softmask(const DTensor& t) {
  if (t.c != 1) throw std::invalid_argument("tensor_to_softmask: need 1 channel");
  SoftMask m(t.h, t.w);
  for (std::size_t i = 0; i < t.size(); ++i) m.data()[i] = clamp01(t.v[i]);
  return m;
}

namespace detail {

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// input CHW -> columns (c*k*k) x (oh*ow)
template <typename T>
void im2col(const BasicTensor<T>& x, int k, int stride, int pad, std::vector<T>& cols, int oh,
            int ow) {
  const int ck2 = x.c * k * k;
  cols.assign(static_cast<std::size_t>(ck2) * oh * ow, T(0));
  for (int ci = 0; ci < x.c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ci * k + ky) * k + kx;
        T* dst = cols.data() + static_cast<std::size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= x.h) {
            dst += ow;
            continue;
          }
          for (int ox = 0; ox < ow; ++ox, ++dst) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < x.w) *dst = x.at(ci, iy, ix);
          }
        }
      }
}

// columns (c*k*k) x (oh*ow) accumulated back into CHW
template <typename T>
void col2im(const std::vector<T>& cols, int c, int h, int w, int k, int stride, int pad,
            BasicTensor<T>& x, int oh, int ow) {
  x = BasicTensor<T>(c, h, w, T(0));
  for (int ci = 0; ci < c; ++ci)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ci * k + ky) * k + kx;
        const T* src = cols.data() + static_cast<std::size_t>(row) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            src += ow;
            continue;
          }
          for (int ox = 0; ox < ow; ++ox, ++src) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) x.at(ci, iy, ix) += *src;
          }
        }
      }
}

template <typename T>
using EigenMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace detail

// weight layout: out_c rows of (in_c*k*k); bias per output channel
template <typename T>
BasicTensor<T> conv2d_fwd(const BasicTensor<T>& x, const std::vector<T>& weight,
                          const std::vector<T>& bias, int out_c, int k, int stride, int pad,
                          std::vector<T>* cols_cache = nullptr) {
  const int oh = detail::conv_out_dim(x.h, k, stride, pad);
  const int ow = detail::conv_out_dim(x.w, k, stride, pad);
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: output collapses to zero");
  const int ck2 = x.c * k * k;
  if (weight.size() != static_cast<std::size_t>(out_c) * ck2 ||
      bias.size() != static_cast<std::size_t>(out_c))
    throw std::invalid_argument("conv2d: weight/bias size mismatch");

  std::vector<T> local_cols;
  std::vector<T>& cols = cols_cache ? *cols_cache : local_cols;
  detail::im2col(x, k, stride, pad, cols, oh, ow);

  // operands are copied into Eigen-owned (uniformly aligned) storage so the
  // kernel's reduction order never depends on where the heap put a vector;
  // reruns must be bit-identical
  using Mat = detail::EigenMatrix<T>;
  Mat W(out_c, ck2), C(ck2, oh * ow);
  std::copy(weight.begin(), weight.end(), W.data());
  std::copy(cols.begin(), cols.end(), C.data());
  Mat Y(out_c, oh * ow);
  Y.noalias() = W * C;

  BasicTensor<T> y(out_c, oh, ow);
  for (int oc = 0; oc < out_c; ++oc)
    for (int i = 0; i < oh * ow; ++i) y.v[static_cast<std::size_t>(oc) * oh * ow + i] = Y(oc, i) + bias[oc];
  return y;
}

// Backward pass. cols must be the cache from the forward call. Gradients are
// accumulated into grad_weight/grad_bias.
template <typename T>
BasicTensor<T> conv2d_bwd(const BasicTensor<T>& gy, const std::vector<T>& cols,
                          const std::vector<T>& weight, std::vector<T>& grad_weight,
                          std::vector<T>& grad_bias, int in_c, int in_h, int in_w, int k,
                          int stride, int pad) {
  const int out_c = gy.c, oh = gy.h, ow = gy.w;
  const int ck2 = in_c * k * k;
  // same aligned-copy discipline as the forward pass, for the same reason
  using Mat = detail::EigenMatrix<T>;
  Mat GY(out_c, oh * ow), C(ck2, oh * ow), W(out_c, ck2);
  std::copy(gy.v.begin(), gy.v.end(), GY.data());
  std::copy(cols.begin(), cols.end(), C.data());
  std::copy(weight.begin(), weight.end(), W.data());

  Mat GW(out_c, ck2);
  GW.noalias() = GY * C.transpose();
  for (std::size_t i = 0; i < grad_weight.size(); ++i) grad_weight[i] += GW.data()[i];
  for (int oc = 0; oc < out_c; ++oc) grad_bias[oc] += GY.row(oc).sum();

  Mat GC(ck2, oh * ow);
  GC.noalias() = W.transpose() * GY;
  std::vector<T> gcols(GC.data(), GC.data() + static_cast<std::size_t>(ck2) * oh * ow);

  BasicTensor<T> gx;
  detail::col2im(gcols, in_c, in_h, in_w, k, stride, pad, gx, oh, ow);
  return gx;
}

}  // namespace lightsout
