#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "outpaint/errors.hpp"
#include "outpaint/networks.hpp"
#include "outpaint/nn/tensor.hpp"

namespace outpaint {

enum class AdversarialMode { nonsaturating, hinge };
enum class AdversarialRole { generator, discriminator };

struct LossConfig {
  double lambda_sem = -1.0;  // < 0: auto-calibrate at stage start
  double lambda_l1 = 1.0;
  double lambda_adv = 0.1;
  double lambda_fm = 10.0;
  AdversarialMode adversarial_mode = AdversarialMode::nonsaturating;

  void validate() const {
    auto chk = [](double v) {
      if (!std::isfinite(v) || v < 0)
        throw ConfigError("LossConfig: weights must be finite and >= 0");
    };
    chk(lambda_l1);
    chk(lambda_adv);
    chk(lambda_fm);
    if (std::isfinite(lambda_sem) && lambda_sem >= 0) chk(lambda_sem);
  }
};

struct LossBreakdown {
  struct Term {
    std::string name;
    double weight = 0;
    double value = 0;  // unweighted
  };
  std::string stage;
  std::vector<Term> terms;
  double total = 0;

  void check_total() const {
    double s = 0;
    for (const auto& t : terms) s += t.weight * t.value;
    const double scale = std::max(1.0, std::abs(s));
    if (std::abs(s - total) > 1e-6 * scale)
      throw NumericsError("LossBreakdown: total does not match terms");
  }
};

// lambda * sum_i (e_gt_i - e_pred_i)^2, the squared-L2 embedding distance.
inline double semantic_embedding_loss(const EmbeddingVector& e_gt,
                                      const EmbeddingVector& e_pred,
                                      double lambda_sem) {
  if (e_gt.values.size() != 512 || e_pred.values.size() != 512)
    throw ShapeError("semantic_embedding_loss: embeddings must be length 512");
  double s = 0;
  for (size_t i = 0; i < 512; ++i) {
    const double d = static_cast<double>(e_gt.values[i]) - e_pred.values[i];
    s += d * d;
  }
  return lambda_sem * s;
}

// d(loss)/d(e_pred) = 2*lambda*(e_pred - e_gt)
inline std::vector<float> semantic_embedding_loss_grad(
    const EmbeddingVector& e_gt, const EmbeddingVector& e_pred,
    double lambda_sem) {
  std::vector<float> g(512);
  for (size_t i = 0; i < 512; ++i)
    g[i] = static_cast<float>(2.0 * lambda_sem *
                              (e_pred.values[i] - e_gt.values[i]));
  return g;
}

inline double l1_loss(const nn::Tensor& a, const nn::Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("l1_loss: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  return s / a.size();
}

inline nn::Tensor l1_loss_grad(const nn::Tensor& a, const nn::Tensor& b) {
  nn::Tensor g(a.n, a.c, a.h, a.w);
  const float inv = 1.f / a.size();
  for (size_t i = 0; i < a.size(); ++i) {
    const float d = a.data[i] - b.data[i];
    g.data[i] = d > 0 ? inv : (d < 0 ? -inv : 0.f);
  }
  return g;
}

inline double l1_loss(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw ShapeError("l1_loss: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  return s / a.size();
}

inline void check_finite(const nn::Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericsError(std::string(what) + ": not finite");
}

// Mean loss over the patch score map.
inline double adversarial_loss(const nn::Tensor& scores, bool target_real,
                               AdversarialMode mode, AdversarialRole role) {
  check_finite(scores, "adversarial_loss scores");
  double s = 0;
  if (mode == AdversarialMode::nonsaturating) {
    // BCE-with-logits; numerically stable softplus form.
    const double t = target_real ? 1.0 : 0.0;
    for (float x : scores.data) {
      const double sp = x > 0 ? x + std::log1p(std::exp(-x))
                              : std::log1p(std::exp(x));
      s += sp - t * x;
    }
  } else {
    if (role == AdversarialRole::generator) {
      for (float x : scores.data) s -= x;
    } else if (target_real) {
      for (float x : scores.data) s += std::max(0.0, 1.0 - x);
    } else {
      for (float x : scores.data) s += std::max(0.0, 1.0 + x);
    }
  }
  return s / scores.size();
}

inline nn::Tensor adversarial_loss_grad(const nn::Tensor& scores,
                                        bool target_real, AdversarialMode mode,
                                        AdversarialRole role) {
  nn::Tensor g(scores.n, scores.c, scores.h, scores.w);
  const float inv = 1.f / scores.size();
  if (mode == AdversarialMode::nonsaturating) {
    const float t = target_real ? 1.f : 0.f;
    for (size_t i = 0; i < scores.size(); ++i) {
      const float sig = 1.f / (1.f + std::exp(-scores.data[i]));
      g.data[i] = (sig - t) * inv;
    }
  } else {
    if (role == AdversarialRole::generator) {
      for (size_t i = 0; i < g.size(); ++i) g.data[i] = -inv;
    } else if (target_real) {
      for (size_t i = 0; i < g.size(); ++i)
        g.data[i] = scores.data[i] < 1.f ? -inv : 0.f;
    } else {
      for (size_t i = 0; i < g.size(); ++i)
        g.data[i] = scores.data[i] > -1.f ? inv : 0.f;
    }
  }
  return g;
}

// Mean over layers of mean absolute feature difference.
inline double feature_matching_loss(const std::vector<nn::Tensor>& real_feats,
                                    const std::vector<nn::Tensor>& fake_feats) {
  if (real_feats.size() != fake_feats.size() || real_feats.empty())
    throw ShapeError("feature_matching_loss: list length mismatch");
  double s = 0;
  for (size_t l = 0; l < real_feats.size(); ++l)
    s += l1_loss(real_feats[l], fake_feats[l]);
  return s / real_feats.size();
}

// Gradient w.r.t. the fake features only (real side is detached).
inline std::vector<nn::Tensor> feature_matching_loss_grad(
    const std::vector<nn::Tensor>& real_feats,
    const std::vector<nn::Tensor>& fake_feats) {
  std::vector<nn::Tensor> out;
  const float inv_layers = 1.f / real_feats.size();
  for (size_t l = 0; l < real_feats.size(); ++l) {
    nn::Tensor g = l1_loss_grad(fake_feats[l], real_feats[l]);
    for (float& v : g.data) v *= inv_layers;
    out.push_back(std::move(g));
  }
  return out;
}

// Edge stage has no pixel or semantic term: edge maps are not RGB images.
inline LossBreakdown edge_stage_loss(double adv, double fm,
                                     const LossConfig& cfg) {
  LossBreakdown b;
  b.stage = "edge";
  b.terms = {{"adv", cfg.lambda_adv, adv}, {"fm", cfg.lambda_fm, fm}};
  b.total = cfg.lambda_adv * adv + cfg.lambda_fm * fm;
  return b;
}

// Inpaint and joint stages share this composition of terms; sem_raw is the
// unweighted squared-L2 embedding distance computed on the composed output.
inline LossBreakdown inpaint_stage_loss(double l1, double adv, double fm,
                                        double sem_raw, double lambda_sem,
                                        const LossConfig& cfg,
                                        const std::string& stage = "inpaint") {
  LossBreakdown b;
  b.stage = stage;
  b.terms = {{"l1", cfg.lambda_l1, l1},
             {"adv", cfg.lambda_adv, adv},
             {"fm", cfg.lambda_fm, fm},
             {"sem", lambda_sem, sem_raw}};
  b.total = cfg.lambda_l1 * l1 + cfg.lambda_adv * adv + cfg.lambda_fm * fm +
            lambda_sem * sem_raw;
  return b;
}

}  // namespace outpaint
