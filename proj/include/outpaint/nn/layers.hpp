#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "outpaint/nn/tensor.hpp"

namespace outpaint::nn {

struct Layer {
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& gout) = 0;
  virtual std::vector<Param*> params() { return {}; }
};

// im2col: (inC*k*k) x (oh*ow), row-major.
inline void im2col(const float* src, int c, int h, int w, int k, int stride,
                   int pad, int dilation, int oh, int ow, float* col) {
  const int K = c * k * k;
  for (int row = 0; row < K; ++row) {
    const int ci = row / (k * k);
    const int ky = (row / k) % k;
    const int kx = row % k;
    float* dst = col + static_cast<size_t>(row) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride - pad + ky * dilation;
      if (iy < 0 || iy >= h) {
        std::fill(dst, dst + ow, 0.f);
        dst += ow;
        continue;
      }
      const float* srow = src + (static_cast<size_t>(ci) * h + iy) * w;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride - pad + kx * dilation;
        *dst++ = (ix >= 0 && ix < w) ? srow[ix] : 0.f;
      }
    }
  }
}

inline void col2im(const float* col, int c, int h, int w, int k, int stride,
                   int pad, int dilation, int oh, int ow, float* dst) {
  const int K = c * k * k;
  for (int row = 0; row < K; ++row) {
    const int ci = row / (k * k);
    const int ky = (row / k) % k;
    const int kx = row % k;
    const float* src = col + static_cast<size_t>(row) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride - pad + ky * dilation;
      if (iy < 0 || iy >= h) {
        src += ow;
        continue;
      }
      float* drow = dst + (static_cast<size_t>(ci) * h + iy) * w;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride - pad + kx * dilation;
        if (ix >= 0 && ix < w) drow[ix] += src[ox];
      }
      src += ow;
    }
  }
}

class Conv2d : public Layer {
 public:
  Conv2d(int in_c, int out_c, int k, int stride, int pad, int dilation,
         std::mt19937_64& rng, bool spectral_norm = false)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad),
        dil_(dilation), sn_(spectral_norm),
        weight_(static_cast<size_t>(out_c) * in_c * k * k), bias_(out_c) {
    kaiming_init(weight_.value, in_c * k * k, rng);
    if (sn_) {
      u_.assign(out_c_, 0.f);
      v_.assign(static_cast<size_t>(in_c_) * k_ * k_, 0.f);
      std::normal_distribution<float> nd(0.f, 1.f);
      for (float& x : u_) x = nd(rng);
      normalize(u_);
      power_iterate();  // seed v_ so eval-mode forward has a usable sigma
    }
  }

  Tensor forward(const Tensor& x, bool train) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    const int oh = (x.h + 2 * pad_ - dil_ * (k_ - 1) - 1) / stride_ + 1;
    const int ow = (x.w + 2 * pad_ - dil_ * (k_ - 1) - 1) / stride_ + 1;
    const int K = in_c_ * k_ * k_;
    cols_.assign(static_cast<size_t>(x.n) * K * oh * ow, 0.f);

    sigma_ = sn_ ? estimate_sigma(train) : 1.f;
    const float inv_sigma = 1.f / sigma_;

    Tensor y(x.n, out_c_, oh, ow);
    ConstMatMap W(weight_.value.data(), out_c_, K);
    for (int i = 0; i < x.n; ++i) {
      float* col = cols_.data() + static_cast<size_t>(i) * K * oh * ow;
      im2col(x.sample(i), x.c, x.h, x.w, k_, stride_, pad_, dil_, oh, ow, col);
      ConstMatMap C(col, K, oh * ow);
      MatMap Y(y.sample(i), out_c_, oh * ow);
      Y.noalias() = (W * C) * inv_sigma;
      for (int oc = 0; oc < out_c_; ++oc)
        Y.row(oc).array() += bias_.value[oc];
    }
    out_hw_ = {oh, ow};
    return y;
  }

  Tensor backward(const Tensor& gout) override {
    const auto [n, c, h, w] = in_shape_;
    const auto [oh, ow] = out_hw_;
    const int K = in_c_ * k_ * k_;
    const float inv_sigma = 1.f / sigma_;

    Tensor gin(n, c, h, w);
    MatMap GW(weight_.grad.data(), out_c_, K);
    ConstMatMap W(weight_.value.data(), out_c_, K);
    std::vector<float> gcol(static_cast<size_t>(K) * oh * ow);
    for (int i = 0; i < n; ++i) {
      ConstMatMap G(gout.sample(i), out_c_, oh * ow);
      ConstMatMap C(cols_.data() + static_cast<size_t>(i) * K * oh * ow, K,
                    oh * ow);
      GW.noalias() += (G * C.transpose()) * inv_sigma;
      // Plain loop: Eigen's redux order depends on buffer alignment, which
      // would make bias grads vary run to run.
      for (int oc = 0; oc < out_c_; ++oc) {
        const float* row = gout.sample(i) + static_cast<size_t>(oc) * oh * ow;
        float s = 0.f;
        for (int p = 0; p < oh * ow; ++p) s += row[p];
        bias_.grad[oc] += s;
      }
      MatMap GC(gcol.data(), K, oh * ow);
      GC.noalias() = (W.transpose() * G) * inv_sigma;
      col2im(gcol.data(), c, h, w, k_, stride_, pad_, dil_, oh, ow,
             gin.sample(i));
    }
    return gin;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  // Spectrally normalized weight as used by the forward pass.
  std::vector<float> effective_weight(int power_iters = 0) {
    if (!sn_) return weight_.value;
    for (int it = 0; it < power_iters; ++it) power_iterate();
    std::vector<float> w = weight_.value;
    const float s = current_sigma();
    for (float& x : w) x /= s;
    return w;
  }

  int out_channels() const { return out_c_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  int dilation() const { return dil_; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }
  bool spectral() const { return sn_; }
  std::vector<float>& sn_u() { return u_; }
  std::vector<float>& sn_v() { return v_; }

 private:
  static void normalize(std::vector<float>& x) {
    float n = 0.f;
    for (float v : x) n += v * v;
    n = std::sqrt(n) + 1e-12f;
    for (float& v : x) v /= n;
  }

  void power_iterate() {
    const int K = in_c_ * k_ * k_;
    const float* W = weight_.value.data();
    // Fixed-order mat-vec products; see the bias-grad note below.
    for (int j = 0; j < K; ++j) {
      float s = 0.f;
      for (int oc = 0; oc < out_c_; ++oc)
        s += W[static_cast<size_t>(oc) * K + j] * u_[oc];
      v_[j] = s;
    }
    normalize(v_);
    for (int oc = 0; oc < out_c_; ++oc) {
      float s = 0.f;
      const float* row = W + static_cast<size_t>(oc) * K;
      for (int j = 0; j < K; ++j) s += row[j] * v_[j];
      u_[oc] = s;
    }
    normalize(u_);
  }

  float current_sigma() const {
    const int K = in_c_ * k_ * k_;
    // Fixed-order accumulation; see the bias-grad note above.
    float s = 0.f;
    for (int oc = 0; oc < out_c_; ++oc) {
      float wv = 0.f;
      const float* row = weight_.value.data() + static_cast<size_t>(oc) * K;
      for (int j = 0; j < K; ++j) wv += row[j] * v_[j];
      s += u_[oc] * wv;
    }
    return std::max(1e-12f, s);
  }

  float estimate_sigma(bool train) {
    if (train) power_iterate();
    return current_sigma();
  }

  int in_c_, out_c_, k_, stride_, pad_, dil_;
  bool sn_;
  Param weight_, bias_;
  std::vector<float> u_, v_;
  float sigma_ = 1.f;
  std::vector<float> cols_;
  std::array<int, 4> in_shape_{};
  std::array<int, 2> out_hw_{};
};

class InstanceNorm : public Layer {
 public:
  explicit InstanceNorm(int channels)
      : c_(channels), gamma_(channels), beta_(channels) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.f);
  }

  Tensor forward(const Tensor& x, bool) override {
    xhat_ = Tensor(x.n, x.c, x.h, x.w);
    inv_std_.assign(static_cast<size_t>(x.n) * x.c, 0.f);
    Tensor y(x.n, x.c, x.h, x.w);
    const size_t P = x.plane();
    for (int i = 0; i < x.n; ++i)
      for (int ci = 0; ci < x.c; ++ci) {
        const float* src = x.sample(i) + ci * P;
        float mean = 0.f;
        for (size_t p = 0; p < P; ++p) mean += src[p];
        mean /= P;
        float var = 0.f;
        for (size_t p = 0; p < P; ++p) {
          const float d = src[p] - mean;
          var += d * d;
        }
        var /= P;
        const float istd = 1.f / std::sqrt(var + kEps);
        inv_std_[static_cast<size_t>(i) * x.c + ci] = istd;
        float* xh = xhat_.sample(i) + ci * P;
        float* dst = y.sample(i) + ci * P;
        const float g = gamma_.value[ci], b = beta_.value[ci];
        for (size_t p = 0; p < P; ++p) {
          xh[p] = (src[p] - mean) * istd;
          dst[p] = g * xh[p] + b;
        }
      }
    return y;
  }

  Tensor backward(const Tensor& gout) override {
    Tensor gin(gout.n, gout.c, gout.h, gout.w);
    const size_t P = gout.plane();
    for (int i = 0; i < gout.n; ++i)
      for (int ci = 0; ci < gout.c; ++ci) {
        const float* g = gout.sample(i) + ci * P;
        const float* xh = xhat_.sample(i) + ci * P;
        float sum_g = 0.f, sum_gx = 0.f;
        for (size_t p = 0; p < P; ++p) {
          sum_g += g[p];
          sum_gx += g[p] * xh[p];
        }
        gamma_.grad[ci] += sum_gx;
        beta_.grad[ci] += sum_g;
        const float istd = inv_std_[static_cast<size_t>(i) * gout.c + ci];
        const float gam = gamma_.value[ci];
        float* gi = gin.sample(i) + ci * P;
        const float inv_p = 1.f / P;
        for (size_t p = 0; p < P; ++p)
          gi[p] = gam * istd *
                  (g[p] - sum_g * inv_p - xh[p] * sum_gx * inv_p);
      }
    return gin;
  }

  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }

  static constexpr float kEps = 1e-5f;

 private:
  int c_;
  Param gamma_, beta_;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    mask_.assign(x.size(), 0);
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i) {
      if (y.data[i] > 0.f)
        mask_[i] = 1;
      else
        y.data[i] = 0.f;
    }
    return y;
  }
  Tensor backward(const Tensor& g) override {
    Tensor gin = g;
    for (size_t i = 0; i < gin.size(); ++i)
      if (!mask_[i]) gin.data[i] = 0.f;
    return gin;
  }

 private:
  std::vector<uint8_t> mask_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
  Tensor forward(const Tensor& x, bool) override {
    mask_.assign(x.size(), 0);
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i) {
      if (y.data[i] > 0.f)
        mask_[i] = 1;
      else
        y.data[i] *= slope_;
    }
    return y;
  }
  Tensor backward(const Tensor& g) override {
    Tensor gin = g;
    for (size_t i = 0; i < gin.size(); ++i)
      if (!mask_[i]) gin.data[i] *= slope_;
    return gin;
  }

 private:
  float slope_;
  std::vector<uint8_t> mask_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    out_ = x;
    for (float& v : out_.data) v = 1.f / (1.f + std::exp(-v));
    return out_;
  }
  Tensor backward(const Tensor& g) override {
    Tensor gin = g;
    for (size_t i = 0; i < gin.size(); ++i)
      gin.data[i] *= out_.data[i] * (1.f - out_.data[i]);
    return gin;
  }

 private:
  Tensor out_;
};

class UpsampleNearest2x : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int i = 0; i < x.n; ++i)
      for (int ci = 0; ci < x.c; ++ci)
        for (int yy = 0; yy < y.h; ++yy)
          for (int xx = 0; xx < y.w; ++xx)
            y.at(i, ci, yy, xx) = x.at(i, ci, yy / 2, xx / 2);
    return y;
  }
  Tensor backward(const Tensor& g) override {
    const auto [n, c, h, w] = in_shape_;
    Tensor gin(n, c, h, w);
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < g.h; ++yy)
          for (int xx = 0; xx < g.w; ++xx)
            gin.at(i, ci, yy / 2, xx / 2) += g.at(i, ci, yy, xx);
    return gin;
  }

 private:
  std::array<int, 4> in_shape_{};
};

class MaxPool2x2 : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor y(x.n, x.c, x.h / 2, x.w / 2);
    argmax_.assign(y.size(), 0);
    size_t oi = 0;
    for (int i = 0; i < x.n; ++i)
      for (int ci = 0; ci < x.c; ++ci)
        for (int yy = 0; yy < y.h; ++yy)
          for (int xx = 0; xx < y.w; ++xx, ++oi) {
            float best = -1e30f;
            size_t best_idx = 0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const float v = x.at(i, ci, yy * 2 + dy, xx * 2 + dx);
                if (v > best) {
                  best = v;
                  best_idx = ((static_cast<size_t>(i) * x.c + ci) * x.h +
                              yy * 2 + dy) *
                                 x.w +
                             xx * 2 + dx;
                }
              }
            y.data[oi] = best;
            argmax_[oi] = best_idx;
          }
    return y;
  }
  Tensor backward(const Tensor& g) override {
    const auto [n, c, h, w] = in_shape_;
    Tensor gin(n, c, h, w);
    for (size_t i = 0; i < g.size(); ++i) gin.data[argmax_[i]] += g.data[i];
    return gin;
  }

 private:
  std::array<int, 4> in_shape_{};
  std::vector<size_t> argmax_;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor y(x.n, x.c, 1, 1);
    const size_t P = x.plane();
    for (int i = 0; i < x.n; ++i)
      for (int ci = 0; ci < x.c; ++ci) {
        const float* src = x.sample(i) + ci * P;
        float s = 0.f;
        for (size_t p = 0; p < P; ++p) s += src[p];
        y.at(i, ci, 0, 0) = s / P;
      }
    return y;
  }
  Tensor backward(const Tensor& g) override {
    const auto [n, c, h, w] = in_shape_;
    Tensor gin(n, c, h, w);
    const size_t P = gin.plane();
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < c; ++ci) {
        const float gv = g.at(i, ci, 0, 0) / P;
        float* dst = gin.sample(i) + ci * P;
        for (size_t p = 0; p < P; ++p) dst[p] = gv;
      }
    return gin;
  }

 private:
  std::array<int, 4> in_shape_{};
};

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim, std::mt19937_64& rng)
      : in_(in_dim), out_(out_dim),
        weight_(static_cast<size_t>(out_dim) * in_dim), bias_(out_dim) {
    kaiming_init(weight_.value, in_dim, rng);
  }

  Tensor forward(const Tensor& x, bool) override {
    x_ = x;
    Tensor y(x.n, out_, 1, 1);
    ConstMatMap W(weight_.value.data(), out_, in_);
    ConstMatMap X(x.data.data(), x.n, in_);
    MatMap Y(y.data.data(), x.n, out_);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < x.n; ++i)
      for (int o = 0; o < out_; ++o) Y(i, o) += bias_.value[o];
    return y;
  }

  Tensor backward(const Tensor& g) override {
    Tensor gin(x_.n, x_.c, x_.h, x_.w);
    ConstMatMap G(g.data.data(), g.n, out_);
    ConstMatMap X(x_.data.data(), x_.n, in_);
    ConstMatMap W(weight_.value.data(), out_, in_);
    MatMap GW(weight_.grad.data(), out_, in_);
    GW.noalias() += G.transpose() * X;
    for (int i = 0; i < g.n; ++i)
      for (int o = 0; o < out_; ++o) bias_.grad[o] += G(i, o);
    MatMap GI(gin.data.data(), gin.n, in_);
    GI.noalias() = G * W;
    return gin;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

 private:
  int in_, out_;
  Param weight_, bias_;
  Tensor x_;
};

// Differentiable bilinear resize to a fixed square side (half-pixel centers).
class ResizeBilinear : public Layer {
 public:
  explicit ResizeBilinear(int side) : side_(side) {}

  Tensor forward(const Tensor& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    if (x.h == side_ && x.w == side_) {
      identity_ = true;
      return x;
    }
    identity_ = false;
    Tensor y(x.n, x.c, side_, side_);
    const float sy = static_cast<float>(x.h) / side_;
    const float sx = static_cast<float>(x.w) / side_;
    taps_.clear();
    taps_.reserve(static_cast<size_t>(side_) * side_);
    for (int oy = 0; oy < side_; ++oy)
      for (int ox = 0; ox < side_; ++ox) {
        float fy = std::clamp((oy + 0.5f) * sy - 0.5f, 0.f,
                              static_cast<float>(x.h - 1));
        float fx = std::clamp((ox + 0.5f) * sx - 0.5f, 0.f,
                              static_cast<float>(x.w - 1));
        Tap t;
        t.y0 = static_cast<int>(fy);
        t.x0 = static_cast<int>(fx);
        t.y1 = std::min(t.y0 + 1, x.h - 1);
        t.x1 = std::min(t.x0 + 1, x.w - 1);
        t.wy = fy - t.y0;
        t.wx = fx - t.x0;
        taps_.push_back(t);
      }
    for (int i = 0; i < x.n; ++i)
      for (int ci = 0; ci < x.c; ++ci) {
        size_t k = 0;
        for (int oy = 0; oy < side_; ++oy)
          for (int ox = 0; ox < side_; ++ox, ++k) {
            const Tap& t = taps_[k];
            const float top = x.at(i, ci, t.y0, t.x0) * (1 - t.wx) +
                              x.at(i, ci, t.y0, t.x1) * t.wx;
            const float bot = x.at(i, ci, t.y1, t.x0) * (1 - t.wx) +
                              x.at(i, ci, t.y1, t.x1) * t.wx;
            y.at(i, ci, oy, ox) = top * (1 - t.wy) + bot * t.wy;
          }
      }
    return y;
  }

  Tensor backward(const Tensor& g) override {
    if (identity_) return g;
    const auto [n, c, h, w] = in_shape_;
    Tensor gin(n, c, h, w);
    for (int i = 0; i < n; ++i)
      for (int ci = 0; ci < c; ++ci) {
        size_t k = 0;
        for (int oy = 0; oy < side_; ++oy)
          for (int ox = 0; ox < side_; ++ox, ++k) {
            const Tap& t = taps_[k];
            const float gv = g.at(i, ci, oy, ox);
            gin.at(i, ci, t.y0, t.x0) += gv * (1 - t.wy) * (1 - t.wx);
            gin.at(i, ci, t.y0, t.x1) += gv * (1 - t.wy) * t.wx;
            gin.at(i, ci, t.y1, t.x0) += gv * t.wy * (1 - t.wx);
            gin.at(i, ci, t.y1, t.x1) += gv * t.wy * t.wx;
          }
      }
    return gin;
  }

 private:
  struct Tap {
    int y0, x0, y1, x1;
    float wy, wx;
  };
  int side_;
  bool identity_ = false;
  std::array<int, 4> in_shape_{};
  std::vector<Tap> taps_;
};

// Linear chain of layers.
class Sequential : public Layer {
 public:
  template <typename L, typename... Args>
  L* add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  Tensor forward(const Tensor& x, bool train) override {
    Tensor y = x;
    for (auto& l : layers_) y = l->forward(y, train);
    return y;
  }
  Tensor backward(const Tensor& g) override {
    Tensor gi = g;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      gi = (*it)->backward(gi);
    return gi;
  }
  std::vector<Param*> params() override {
    std::vector<Param*> out;
    for (auto& l : layers_)
      for (Param* p : l->params()) out.push_back(p);
    return out;
  }
  size_t depth() const { return layers_.size(); }
  Layer* layer(size_t i) { return layers_[i].get(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// conv - IN - ReLU - conv - IN with identity skip.
class ResidualBlock : public Layer {
 public:
  ResidualBlock(int channels, int dilation, std::mt19937_64& rng) {
    body_.add<Conv2d>(channels, channels, 3, 1, dilation, dilation, rng);
    body_.add<InstanceNorm>(channels);
    body_.add<ReLU>();
    body_.add<Conv2d>(channels, channels, 3, 1, 1, 1, rng);
    body_.add<InstanceNorm>(channels);
  }
  Tensor forward(const Tensor& x, bool train) override {
    Tensor y = body_.forward(x, train);
    for (size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
    return y;
  }
  Tensor backward(const Tensor& g) override {
    Tensor gin = body_.backward(g);
    for (size_t i = 0; i < gin.size(); ++i) gin.data[i] += g.data[i];
    return gin;
  }
  std::vector<Param*> params() override { return body_.params(); }

 private:
  Sequential body_;
};

}  // namespace outpaint::nn
