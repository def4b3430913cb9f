#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "lightsout/nn.hpp"

namespace lightsout {

// Low-rank weight delta for an m x n weight matrix: W' = W + scale * A * B.
// A is m x d, B is d x n. Double for contract-precision checks, float for
// network use; both share this code.
template <typename T>
struct LoRAAdapterT {
  int m = 0, n = 0, d = 0;
  double scale = 1.0;
  std::vector<T> A, B;  // row-major

  void init(int rows, int cols, int rank, double s, Rng& rng) {
    if (rank < 1 || rank > std::min(rows, cols))
      throw std::invalid_argument("LoRAAdapter: rank out of range");
    m = rows;
    n = cols;
    d = rank;
    scale = s;
    A.assign(static_cast<std::size_t>(m) * d, T(0));
    B.assign(static_cast<std::size_t>(d) * n, T(0));
    // standard init: A random, B zero, so the delta starts at exactly zero
    for (auto& v : A) v = static_cast<T>(rng.normal() / std::sqrt(static_cast<double>(d)));
  }
};

using LoRAAdapter = LoRAAdapterT<double>;

template <typename T>
std::vector<T> lora_apply(const std::vector<T>& base, int m, int n,
                          const LoRAAdapterT<T>& ad) {
  if (ad.m != m || ad.n != n)
    throw std::invalid_argument("lora_apply: adapter shape does not match weight");
  if (ad.d < 1 || ad.d > std::min(m, n)) throw std::invalid_argument("lora_apply: bad rank");
  if (base.size() != static_cast<std::size_t>(m) * n)
    throw std::invalid_argument("lora_apply: base size mismatch");

  std::vector<T> out = base;
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> mA(ad.A.data(), m, ad.d);
  Eigen::Map<const Mat> mB(ad.B.data(), ad.d, n);
  Eigen::Map<Mat> mO(out.data(), m, n);
  mO.noalias() += (mA * mB) * static_cast<T>(ad.scale);
  return out;
}

// Trainable low-rank delta attached to one convolution. The conv's weight is
// materialized as frozen_base + scale*A*B before each forward; gradients that
// land on the conv weight are projected onto A and B. The frozen base is
// never written after attach.
struct ConvLoRA {
  Param A, B;
  std::vector<float> base;
  int m = 0, n = 0, rank = 0;
  double scale = 1.0;

  void attach(Conv2d& conv, int r, double s, Rng& rng) {
    m = conv.out_c;
    n = conv.in_c * conv.k * conv.k;
    if (r < 1 || r > std::min(m, n)) throw std::invalid_argument("ConvLoRA: rank out of range");
    rank = r;
    scale = s;
    base = conv.w.v;
    A.resize(conv.w.name + ".lora_a", {m, rank});
    B.resize(conv.w.name + ".lora_b", {rank, n});
    for (auto& v : A.v) v = static_cast<float>(rng.normal() / std::sqrt(static_cast<double>(rank)));
  }

  void materialize(Conv2d& conv) const {
    LoRAAdapterT<float> ad;
    ad.m = m;
    ad.n = n;
    ad.d = rank;
    ad.scale = scale;
    ad.A = A.v;
    ad.B = B.v;
    conv.w.v = lora_apply<float>(base, m, n, ad);
  }

  // project the conv weight gradient onto the adapter factors
  void accumulate_grads(const Conv2d& conv) {
    using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> GW(conv.w.g.data(), m, n);
    Eigen::Map<const Mat> mA(A.v.data(), m, rank);
    Eigen::Map<const Mat> mB(B.v.data(), rank, n);
    Eigen::Map<Mat> GA(A.g.data(), m, rank);
    Eigen::Map<Mat> GB(B.g.data(), rank, n);
    GA.noalias() += static_cast<float>(scale) * (GW * mB.transpose());
    GB.noalias() += static_cast<float>(scale) * (mA.transpose() * GW);
  }

  std::uint64_t base_checksum() const { return fnv1a64(base.data(), base.size() * sizeof(float)); }

  std::vector<Param*> params() { return {&A, &B}; }
};

}  // namespace lightsout
