#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "outpaint/canny.hpp"
#include "outpaint/dataset.hpp"
#include "outpaint/errors.hpp"
#include "outpaint/image.hpp"
#include "outpaint/losses.hpp"
#include "outpaint/networks.hpp"
#include "outpaint/nn/adam.hpp"

namespace outpaint {

struct StageConfig {
  std::string stage = "edge";  // edge | inpaint | joint
  int iterations = 300;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double d_to_g_lr_ratio = 0.1;
  uint64_t seed = 0;
  LossConfig loss_config;
  int checkpoint_every = 100;

  void validate() const {
    if (stage != "edge" && stage != "inpaint" && stage != "joint")
      throw ConfigError("StageConfig: unknown stage " + stage);
    if (iterations < 1 || batch_size < 1 || !(learning_rate > 0))
      throw ConfigError("StageConfig: invalid values");
    loss_config.validate();
  }
};

struct TrainReport {
  std::string stage;
  int iterations_completed = 0;
  std::vector<LossBreakdown> generator_curve;  // one entry per iteration
  std::vector<double> discriminator_curve;
  double wall_time_seconds = 0;
  std::string final_checkpoint;
  uint64_t seed = 0;
};

// Hooks into the training loop: logging, checkpoint sinks, resume state.
struct StageRuntime {
  int start_iteration = 0;
  std::map<std::string, std::vector<float>> opt_state_in;  // may be empty
  std::function<void(int iter, const LossBreakdown&, double d_loss)>
      on_iteration;
  std::function<void(int iter, ModelBundle&,
                     const std::map<std::string, std::vector<float>>&)>
      on_checkpoint;
  std::function<void(int iter, const std::vector<Sample>&,
                     const nn::Tensor& pred, const nn::Tensor& composed,
                     const std::vector<size_t>& batch_ids)>
      on_samples;
};

namespace detail_train {

inline void copy_plane(nn::Tensor& dst, int sample, int channel,
                       const std::vector<float>& src) {
  std::copy(src.begin(), src.end(),
            dst.sample(sample) + channel * dst.plane());
}

inline nn::Tensor masked(const nn::Tensor& t, const nn::Tensor& mask_t,
                         bool invert = false) {
  nn::Tensor out = t;
  for (int i = 0; i < t.n; ++i)
    for (int c = 0; c < t.c; ++c) {
      float* dst = out.sample(i) + c * out.plane();
      const float* m = mask_t.sample(i);
      for (size_t p = 0; p < t.plane(); ++p)
        dst[p] *= invert ? (1.f - m[p]) : m[p];
    }
  return out;
}

// X_o = gt (.) M + pred (.) (1-M), batched.
inline nn::Tensor compose_batch(const nn::Tensor& gt, const nn::Tensor& pred,
                                const nn::Tensor& mask_t) {
  nn::Tensor out = gt;
  for (int i = 0; i < gt.n; ++i)
    for (int c = 0; c < gt.c; ++c) {
      float* dst = out.sample(i) + c * out.plane();
      const float* p = pred.sample(i) + c * pred.plane();
      const float* m = mask_t.sample(i);
      for (size_t k = 0; k < gt.plane(); ++k)
        dst[k] = dst[k] * m[k] + p[k] * (1.f - m[k]);
    }
  return out;
}

inline nn::Tensor concat_channels(const std::vector<const nn::Tensor*>& parts) {
  int c_total = 0;
  for (auto* t : parts) c_total += t->c;
  const nn::Tensor& f = *parts.front();
  nn::Tensor out(f.n, c_total, f.h, f.w);
  for (int i = 0; i < f.n; ++i) {
    float* dst = out.sample(i);
    for (auto* t : parts) {
      std::copy(t->sample(i), t->sample(i) + t->sample_size(), dst);
      dst += t->sample_size();
    }
  }
  return out;
}

inline nn::Tensor slice_channels(const nn::Tensor& t, int from, int count) {
  nn::Tensor out(t.n, count, t.h, t.w);
  for (int i = 0; i < t.n; ++i)
    std::copy(t.sample(i) + from * t.plane(),
              t.sample(i) + (from + count) * t.plane(), out.sample(i));
  return out;
}

// Deterministic epoch order; replays prior epochs so a resumed run sees the
// same batch sequence as an uninterrupted one.
class BatchSampler {
 public:
  BatchSampler(size_t n, int batch, uint64_t seed)
      : n_(n), batch_(batch), rng_(seed) {
    order_.resize(n);
    for (size_t i = 0; i < n; ++i) order_[i] = i;
    reshuffle();
  }

  std::vector<size_t> next() {
    std::vector<size_t> out;
    for (int i = 0; i < batch_; ++i) {
      if (pos_ >= n_) {
        reshuffle();
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    for (size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[rng_() % i]);
  }
  size_t n_;
  int batch_;
  std::mt19937_64 rng_;
  std::vector<size_t> order_;
  size_t pos_ = 0;
};

}  // namespace detail_train

namespace detail {

inline std::map<std::string, std::vector<float>> adam_state(
    nn::Adam& g, nn::Adam& d) {
  std::map<std::string, std::vector<float>> out;
  auto dump = [&](const char* tag, nn::Adam& a) {
    out[std::string(tag) + "_t"] = {static_cast<float>(a.steps())};
    for (size_t i = 0; i < a.moment1().size(); ++i) {
      out[std::string(tag) + "_m" + std::to_string(i)] = a.moment1()[i];
      out[std::string(tag) + "_v" + std::to_string(i)] = a.moment2()[i];
    }
  };
  dump("g", g);
  dump("d", d);
  return out;
}

inline void restore_adam_state(
    const std::map<std::string, std::vector<float>>& state, nn::Adam& g,
    nn::Adam& d) {
  auto fill = [&](const char* tag, nn::Adam& a) {
    auto t = state.find(std::string(tag) + "_t");
    if (t == state.end()) return;
    a.set_steps(static_cast<int64_t>(t->second.at(0)));
    for (size_t i = 0; i < a.moment1().size(); ++i) {
      auto m = state.find(std::string(tag) + "_m" + std::to_string(i));
      auto v = state.find(std::string(tag) + "_v" + std::to_string(i));
      if (m != state.end() && m->second.size() == a.moment1()[i].size())
        a.moment1()[i] = m->second;
      if (v != state.end() && v->second.size() == a.moment2()[i].size())
        a.moment2()[i] = v->second;
    }
  };
  fill("g", g);
  fill("d", d);
}

}  // namespace detail

// One alternating-update training phase. The bundle is updated in place and
// its provenance advanced; the report carries the full loss curves.
inline TrainReport train_stage(const StageConfig& cfg,
                               const std::vector<Sample>& data,
                               ModelBundle& bundle,
                               StageRuntime* rt = nullptr) {
  using namespace detail_train;
  cfg.validate();
  if (data.empty()) throw IngestError("train_stage: empty dataset");

  const std::string& prov = bundle.provenance;
  if (cfg.stage == "joint" && prov == "fresh")
    throw ProvenanceError("joint stage requires a trained edge generator");

  Generator& gen = cfg.stage == "edge" ? *bundle.edge_gen : *bundle.inpaint_gen;
  PatchDiscriminator& disc =
      cfg.stage == "edge" ? *bundle.edge_disc : *bundle.image_disc;

  nn::Adam adam_g(gen.params(), static_cast<float>(cfg.learning_rate));
  nn::Adam adam_d(disc.params(), static_cast<float>(cfg.learning_rate *
                                                    cfg.d_to_g_lr_ratio));
  if (rt && !rt->opt_state_in.empty())
    detail::restore_adam_state(rt->opt_state_in, adam_g, adam_d);

  // All grad buffers that may accumulate during a step. Embedder weights are
  // frozen; their grad buffers are untouched scratch.
  std::vector<nn::Param*> all_params = gen.params();
  for (auto* p : disc.params()) all_params.push_back(p);

  const int H = data.front().image.height;
  const int W = data.front().image.width;
  const int B = cfg.batch_size;
  const size_t P = static_cast<size_t>(H) * W;

  BatchSampler sampler(data.size(), B, cfg.seed);
  const int skip = rt ? rt->start_iteration : 0;
  for (int it = 0; it < skip; ++it) sampler.next();

  const AdversarialMode mode = cfg.loss_config.adversarial_mode;
  double lambda_sem = cfg.loss_config.lambda_sem;
  if (rt) {
    auto it = rt->opt_state_in.find("lambda_sem");
    if (it != rt->opt_state_in.end() && !it->second.empty())
      lambda_sem = it->second[0];
  }

  TrainReport report;
  report.stage = cfg.stage;
  report.seed = cfg.seed;
  const auto t0 = std::chrono::steady_clock::now();

  const int start = rt ? rt->start_iteration : 0;
  for (int iter = start; iter < cfg.iterations; ++iter) {
    const std::vector<size_t> ids = sampler.next();

    // Assemble batch tensors.
    nn::Tensor mask_t(B, 1, H, W), gray(B, 1, H, W), edges(B, 1, H, W),
        rgb(B, 3, H, W);
    for (int i = 0; i < B; ++i) {
      const Sample& s = data[ids[i]];
      copy_plane(mask_t, i, 0, s.mask.data);
      copy_plane(gray, i, 0, s.gray.data);
      copy_plane(edges, i, 0, s.edges.data);
      std::copy(s.image.data.begin(), s.image.data.end(), rgb.sample(i));
    }

    LossBreakdown breakdown;
    double d_loss_value = 0;
    nn::Tensor pred, composed;

    if (cfg.stage == "edge") {
      nn::Tensor m_gray = masked(gray, mask_t);
      nn::Tensor m_edges = masked(edges, mask_t);
      nn::Tensor x = concat_channels({&m_gray, &m_edges, &mask_t});

      pred = gen.forward(x, true);
      composed = compose_batch(edges, pred, mask_t);  // soft, differentiable

      nn::Tensor real_in = concat_channels({&gray, &edges});
      nn::Tensor fake_in = concat_channels({&gray, &composed});

      // Discriminator update on (real, composed-fake), fake detached.
      // Backward immediately after each forward so cached activations match.
      auto real_out = disc.forward(real_in, true);
      const double d_real = adversarial_loss(real_out.scores, true, mode,
                                             AdversarialRole::discriminator);
      disc.backward(adversarial_loss_grad(real_out.scores, true, mode,
                                          AdversarialRole::discriminator));
      auto fake_out = disc.forward(fake_in, true);
      const double d_fake = adversarial_loss(fake_out.scores, false, mode,
                                             AdversarialRole::discriminator);
      disc.backward(adversarial_loss_grad(fake_out.scores, false, mode,
                                          AdversarialRole::discriminator));
      d_loss_value = 0.5 * (d_real + d_fake);
      for (auto* p : disc.params())
        for (float& g : p->grad) g *= 0.5f;
      adam_d.step();
      for (auto* p : all_params) p->zero_grad();

      // Generator update through the updated discriminator.
      auto real_ref = disc.forward(real_in, false);
      auto fake_ref = disc.forward(fake_in, false);
      const double g_adv = adversarial_loss(fake_ref.scores, true, mode,
                                            AdversarialRole::generator);
      const double g_fm =
          feature_matching_loss(real_ref.features, fake_ref.features);
      breakdown = edge_stage_loss(g_adv, g_fm, cfg.loss_config);

      nn::Tensor gscore = adversarial_loss_grad(fake_ref.scores, true, mode,
                                                AdversarialRole::generator);
      for (float& v : gscore.data)
        v *= static_cast<float>(cfg.loss_config.lambda_adv);
      auto gfeats =
          feature_matching_loss_grad(real_ref.features, fake_ref.features);
      for (auto& gf : gfeats)
        for (float& v : gf.data)
          v *= static_cast<float>(cfg.loss_config.lambda_fm);
      nn::Tensor g_fake_in = disc.backward(gscore, gfeats);
      nn::Tensor g_composed = slice_channels(g_fake_in, 1, 1);
      nn::Tensor g_pred = masked(g_composed, mask_t, /*invert=*/true);
      gen.backward(g_pred);
      adam_g.step();
      for (auto* p : all_params) p->zero_grad();
    } else {
      // inpaint: ground-truth edge prior; joint: predicted-edge prior from
      // the frozen edge generator.
      nn::Tensor prior = edges;
      if (cfg.stage == "joint") {
        nn::Tensor m_gray = masked(gray, mask_t);
        nn::Tensor m_edges = masked(edges, mask_t);
        nn::Tensor ex = concat_channels({&m_gray, &m_edges, &mask_t});
        nn::Tensor epred = bundle.edge_gen->forward(ex, false);
        // Hard threshold to match inference-time conditioning.
        prior = nn::Tensor(B, 1, H, W);
        for (int i = 0; i < B; ++i)
          for (size_t p = 0; p < P; ++p) {
            const float m = mask_t.sample(i)[p];
            const float hard = epred.sample(i)[p] >= 0.5f ? 1.f : 0.f;
            prior.sample(i)[p] = edges.sample(i)[p] * m + hard * (1.f - m);
          }
      }

      nn::Tensor m_rgb = masked(rgb, mask_t);
      nn::Tensor x = concat_channels({&m_rgb, &prior, &mask_t});
      pred = gen.forward(x, true);
      composed = compose_batch(rgb, pred, mask_t);

      // Discriminator update: real ground truth vs composed fake.
      auto real_out = disc.forward(rgb, true);
      const double d_real = adversarial_loss(real_out.scores, true, mode,
                                             AdversarialRole::discriminator);
      disc.backward(adversarial_loss_grad(real_out.scores, true, mode,
                                          AdversarialRole::discriminator));
      auto fake_out = disc.forward(composed, true);
      const double d_fake = adversarial_loss(fake_out.scores, false, mode,
                                             AdversarialRole::discriminator);
      disc.backward(adversarial_loss_grad(fake_out.scores, false, mode,
                                          AdversarialRole::discriminator));
      d_loss_value = 0.5 * (d_real + d_fake);
      for (auto* p : disc.params())
        for (float& g : p->grad) g *= 0.5f;
      adam_d.step();
      for (auto* p : all_params) p->zero_grad();

      // Generator update.
      auto real_ref = disc.forward(rgb, false);
      auto fake_ref = disc.forward(composed, false);
      const double g_adv = adversarial_loss(fake_ref.scores, true, mode,
                                            AdversarialRole::generator);
      const double g_fm =
          feature_matching_loss(real_ref.features, fake_ref.features);
      const double g_l1 = l1_loss(pred, rgb);

      // Semantic embedding on the composed output vs ground truth.
      double sem_raw = 0;
      nn::Tensor g_composed_sem(B, 3, H, W);
      const bool sem_active = lambda_sem != 0.0;
      if (sem_active) {
        nn::Tensor e_gt = bundle.embedder->forward(rgb);
        nn::Tensor e_o = bundle.embedder->forward(composed);
        nn::Tensor g_e(B, 512, 1, 1);
        for (int i = 0; i < B; ++i) {
          double s = 0;
          for (int k = 0; k < 512; ++k) {
            const double d = static_cast<double>(e_gt.sample(i)[k]) -
                             e_o.sample(i)[k];
            s += d * d;
          }
          sem_raw += s;
        }
        sem_raw /= B;
        if (lambda_sem < 0) {
          // One-time calibration: bring the initial semantic term to the
          // same order of magnitude as the initial L1 term.
          lambda_sem = sem_raw > 1e-12 ? g_l1 / sem_raw : 1.0;
        }
        for (int i = 0; i < B; ++i)
          for (int k = 0; k < 512; ++k)
            g_e.sample(i)[k] =
                static_cast<float>(2.0 * lambda_sem / B *
                                   (e_o.sample(i)[k] - e_gt.sample(i)[k]));
        // Embedder caches hold the composed-input activations (last forward).
        g_composed_sem = bundle.embedder->backward_to_input(g_e);
      }

      breakdown = inpaint_stage_loss(g_l1, g_adv, g_fm, sem_raw, lambda_sem,
                                     cfg.loss_config, cfg.stage);

      nn::Tensor gscore = adversarial_loss_grad(fake_ref.scores, true, mode,
                                                AdversarialRole::generator);
      for (float& v : gscore.data)
        v *= static_cast<float>(cfg.loss_config.lambda_adv);
      auto gfeats =
          feature_matching_loss_grad(real_ref.features, fake_ref.features);
      for (auto& gf : gfeats)
        for (float& v : gf.data)
          v *= static_cast<float>(cfg.loss_config.lambda_fm);
      nn::Tensor g_composed = disc.backward(gscore, gfeats);
      if (sem_active)
        for (size_t k = 0; k < g_composed.size(); ++k)
          g_composed.data[k] += g_composed_sem.data[k];

      // d/d(pred): L1 acts on pred directly, the composed path via (1-M).
      nn::Tensor g_pred = l1_loss_grad(pred, rgb);
      for (float& v : g_pred.data)
        v *= static_cast<float>(cfg.loss_config.lambda_l1);
      nn::Tensor g_comp_masked = masked(g_composed, mask_t, /*invert=*/true);
      for (size_t k = 0; k < g_pred.size(); ++k)
        g_pred.data[k] += g_comp_masked.data[k];
      gen.backward(g_pred);
      adam_g.step();
      for (auto* p : all_params) p->zero_grad();
    }

    if (!std::isfinite(breakdown.total) || !std::isfinite(d_loss_value))
      throw NumericsError("non-finite loss at iteration " +
                          std::to_string(iter) + " of stage " + cfg.stage);
    breakdown.check_total();
    report.generator_curve.push_back(breakdown);
    report.discriminator_curve.push_back(d_loss_value);
    report.iterations_completed = iter + 1;

    if (rt && rt->on_iteration) rt->on_iteration(iter, breakdown, d_loss_value);
    const bool boundary = (iter + 1) % cfg.checkpoint_every == 0 ||
                          iter + 1 == cfg.iterations;
    if (boundary) {
      if (rt && rt->on_samples) rt->on_samples(iter, data, pred, composed, ids);
      if (rt && rt->on_checkpoint) {
        auto state = detail::adam_state(adam_g, adam_d);
        state["lambda_sem"] = {static_cast<float>(lambda_sem)};
        bundle.provenance = cfg.stage;
        rt->on_checkpoint(iter, bundle, state);
      }
    }
  }

  bundle.provenance = cfg.stage;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

struct CannyParams {
  float sigma = 2.f;
  float low = 0.1f;
  float high = 0.2f;
};

// Full inference: gray + Canny on the known region, edge inference, edge
// composition, edge-conditioned inpainting, image composition. The known
// region of the output equals the input bit-exactly.
inline ImageTensor outpaint(const ImageTensor& img, const BinaryMask& mask,
                            ModelBundle& bundle,
                            const CannyParams& canny = {}) {
  if (img.height != mask.height || img.width != mask.width)
    throw ShapeError("outpaint: image/mask shape mismatch");
  if (bundle.provenance == "fresh" || bundle.provenance == "edge")
    throw ProvenanceError("outpaint requires an inpaint- or joint-trained "
                          "bundle (provenance: " + bundle.provenance + ")");
  if (bundle.provenance == "inpaint")
    std::cerr << "warning: outpainting with an inpaint-stage bundle; joint "
                 "provenance is the intended inference configuration\n";

  const int H = img.height, W = img.width;
  ImageTensor gray = to_grayscale(img);
  ImageTensor m_gray = apply_mask(gray, mask);
  EdgeMap known_edges = canny_edges(m_gray, canny.sigma, canny.low, canny.high);
  for (size_t i = 0; i < known_edges.data.size(); ++i)
    known_edges.data[i] *= mask.data[i];

  nn::Tensor x(1, 3, H, W);
  std::copy(m_gray.data.begin(), m_gray.data.end(), x.sample(0));
  std::copy(known_edges.data.begin(), known_edges.data.end(),
            x.sample(0) + x.plane());
  std::copy(mask.data.begin(), mask.data.end(), x.sample(0) + 2 * x.plane());
  nn::Tensor epred = bundle.edge_gen->forward(x, false);

  ImageTensor epred_img(H, W, 1);
  epred_img.data = epred.data;
  EdgeMap prior = compose_edges(known_edges, epred_img, mask);

  ImageTensor m_img = apply_mask(img, mask);
  nn::Tensor xi(1, 5, H, W);
  std::copy(m_img.data.begin(), m_img.data.end(), xi.sample(0));
  std::copy(prior.data.begin(), prior.data.end(), xi.sample(0) + 3 * xi.plane());
  std::copy(mask.data.begin(), mask.data.end(), xi.sample(0) + 4 * xi.plane());
  nn::Tensor ipred = bundle.inpaint_gen->forward(xi, false);

  ImageTensor pred(H, W, 3);
  pred.data = ipred.data;
  return compose(img, pred, mask);
}

}  // namespace outpaint
