#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "outpaint/errors.hpp"

namespace outpaint::nn {

// Dense NCHW float tensor. Linear layers use it with h=w=1.
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, float fill = 0.f)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  size_t size() const { return data.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

  float* sample(int i) { return data.data() + i * sample_size(); }
  const float* sample(int i) const { return data.data() + i * sample_size(); }

  float& at(int ni, int ci, int yi, int xi) {
    return data[((static_cast<size_t>(ni) * c + ci) * h + yi) * w + xi];
  }
  float at(int ni, int ci, int yi, int xi) const {
    return data[((static_cast<size_t>(ni) * c + ci) * h + yi) * w + xi];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  void zero() { std::fill(data.begin(), data.end(), 0.f); }

  bool all_finite() const {
    for (float v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

using MatMap = Eigen::Map<
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic,
                                                   Eigen::Dynamic,
                                                   Eigen::RowMajor>>;

// One learnable array plus its gradient accumulator.
struct Param {
  std::vector<float> value;
  std::vector<float> grad;

  explicit Param(size_t size = 0) : value(size, 0.f), grad(size, 0.f) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.f); }
};

inline void kaiming_init(std::vector<float>& w, int fan_in,
                         std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.f,
                                       std::sqrt(2.f / std::max(1, fan_in)));
  for (float& v : w) v = dist(rng);
}

}  // namespace outpaint::nn
