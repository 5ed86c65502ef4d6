#pragma once

#include <cmath>
#include <vector>

#include "outpaint/nn/tensor.hpp"

namespace outpaint::nn {

// Adaptive moment estimation over a fixed parameter set.
class Adam {
 public:
  Adam(std::vector<Param*> params, float lr, float beta1 = 0.9f,
       float beta2 = 0.999f, float eps = 1e-8f)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (Param* p : params_) {
      m_.emplace_back(p->value.size(), 0.f);
      v_.emplace_back(p->value.size(), 0.f);
    }
  }

  void step() {
    ++t_;
    const float bc1 = 1.f - std::pow(b1_, static_cast<float>(t_));
    const float bc2 = 1.f - std::pow(b2_, static_cast<float>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
      Param& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (size_t i = 0; i < p.value.size(); ++i) {
        const float g = p.grad[i];
        m[i] = b1_ * m[i] + (1.f - b1_) * g;
        v[i] = b2_ * v[i] + (1.f - b2_) * g * g;
        p.value[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
    }
  }

  void zero_grad() {
    for (Param* p : params_) p->zero_grad();
  }

  int64_t steps() const { return t_; }
  float lr() const { return lr_; }
  std::vector<std::vector<float>>& moment1() { return m_; }
  std::vector<std::vector<float>>& moment2() { return v_; }
  void set_steps(int64_t t) { t_ = t; }

 private:
  std::vector<Param*> params_;
  float lr_, b1_, b2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace outpaint::nn
