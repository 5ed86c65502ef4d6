#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "outpaint/errors.hpp"
#include "outpaint/image.hpp"
#include "outpaint/nn/layers.hpp"

namespace outpaint {

struct GeneratorConfig {
  int base_channels = 32;
  int residual_blocks = 4;
  int dilation = 2;
  int input_channels = 3;
  int output_channels = 1;

  void validate() const {
    if (base_channels < 8 || residual_blocks < 1 || dilation < 1)
      throw ConfigError("GeneratorConfig: invalid values");
  }
};

struct DiscriminatorConfig {
  int layers = 4;
  int base_channels = 32;
  bool spectral_norm = true;
  int input_channels = 3;

  void validate() const {
    if (layers < 3) throw ConfigError("DiscriminatorConfig: layers must be >= 3");
  }
};

struct EmbedderConfig {
  std::vector<int> conv_stage_channels{64, 128, 256, 512};
  int input_side = 64;
  static constexpr int embedding_dim = 512;
};

struct EmbeddingVector {
  std::vector<float> values;  // length 512

  void validate() const {
    if (values.size() != EmbedderConfig::embedding_dim)
      throw ShapeError("EmbeddingVector: length must be 512");
    for (float v : values)
      if (!std::isfinite(v)) throw NumericsError("EmbeddingVector: not finite");
  }
};

namespace detail {

// Named flat arrays for checkpointing: params plus spectral-norm state.
using NamedArrays = std::vector<std::pair<std::string, std::vector<float>*>>;

inline void collect_layer(nn::Layer* l, const std::string& prefix,
                          NamedArrays& out) {
  if (auto* c = dynamic_cast<nn::Conv2d*>(l)) {
    out.emplace_back(prefix + "/weight", &c->weight().value);
    out.emplace_back(prefix + "/bias", &c->bias().value);
    if (c->spectral()) {
      out.emplace_back(prefix + "/sn_u", &c->sn_u());
      out.emplace_back(prefix + "/sn_v", &c->sn_v());
    }
  } else if (auto* in = dynamic_cast<nn::InstanceNorm*>(l)) {
    out.emplace_back(prefix + "/gamma", &in->gamma().value);
    out.emplace_back(prefix + "/beta", &in->beta().value);
  } else if (auto* seq = dynamic_cast<nn::Sequential*>(l)) {
    for (size_t i = 0; i < seq->depth(); ++i)
      collect_layer(seq->layer(i), prefix + "/" + std::to_string(i), out);
  } else {
    // Parameterless layers contribute nothing; Linear handled via params().
    for (size_t i = 0; i < l->params().size(); ++i)
      out.emplace_back(prefix + "/p" + std::to_string(i),
                       &l->params()[i]->value);
  }
}

}  // namespace detail

// Encoder (2 stride-2 downsamples), dilated residual trunk, mirrored decoder,
// sigmoid head. Used for both the edge and the inpaint generator.
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(init_seed);
    const int b = cfg.base_channels;
    net_.add<nn::Conv2d>(cfg.input_channels, b, 7, 1, 3, 1, rng);
    net_.add<nn::InstanceNorm>(b);
    net_.add<nn::ReLU>();
    net_.add<nn::Conv2d>(b, 2 * b, 4, 2, 1, 1, rng);
    net_.add<nn::InstanceNorm>(2 * b);
    net_.add<nn::ReLU>();
    net_.add<nn::Conv2d>(2 * b, 4 * b, 4, 2, 1, 1, rng);
    net_.add<nn::InstanceNorm>(4 * b);
    net_.add<nn::ReLU>();
    for (int i = 0; i < cfg.residual_blocks; ++i)
      net_.add<nn::ResidualBlock>(4 * b, cfg.dilation, rng);
    net_.add<nn::UpsampleNearest2x>();
    net_.add<nn::Conv2d>(4 * b, 2 * b, 3, 1, 1, 1, rng);
    net_.add<nn::InstanceNorm>(2 * b);
    net_.add<nn::ReLU>();
    net_.add<nn::UpsampleNearest2x>();
    net_.add<nn::Conv2d>(2 * b, b, 3, 1, 1, 1, rng);
    net_.add<nn::InstanceNorm>(b);
    net_.add<nn::ReLU>();
    net_.add<nn::Conv2d>(b, cfg.output_channels, 7, 1, 3, 1, rng);
    net_.add<nn::Sigmoid>();
  }

  nn::Tensor forward(const nn::Tensor& x, bool train) {
    if (x.c != cfg_.input_channels)
      throw ShapeError("Generator: wrong input channel count");
    if (x.h % 4 != 0 || x.w % 4 != 0)
      throw ShapeError("Generator: spatial size must be divisible by 4");
    return net_.forward(x, train);
  }
  nn::Tensor backward(const nn::Tensor& g) { return net_.backward(g); }
  std::vector<nn::Param*> params() { return net_.params(); }
  detail::NamedArrays named_arrays(const std::string& prefix) {
    detail::NamedArrays out;
    detail::collect_layer(&net_, prefix, out);
    return out;
  }
  const GeneratorConfig& config() const { return cfg_; }

  // Receptive-field radius at the input, from kernel/stride/dilation walk.
  int receptive_field() const {
    int rf = 1;
    int jump = 1;
    auto conv = [&](int k, int s, int d) {
      rf += d * (k - 1) * jump;
      jump *= s;
    };
    conv(7, 1, 1);
    conv(4, 2, 1);
    conv(4, 2, 1);
    for (int i = 0; i < cfg_.residual_blocks; ++i) {
      conv(3, 1, cfg_.dilation);
      conv(3, 1, 1);
    }
    jump /= 2;
    conv(3, 1, 1);
    jump /= 2;
    conv(3, 1, 1);
    conv(7, 1, 1);
    return rf;
  }

 private:
  GeneratorConfig cfg_;
  nn::Sequential net_;
};

// Patch discriminator: stride-2 spectral-norm convs with LeakyReLU, then a
// stride-1 scoring conv. Exposes the layers-1 intermediate activations.
class PatchDiscriminator {
 public:
  struct Output {
    nn::Tensor scores;                  // patch logit map
    std::vector<nn::Tensor> features;   // length layers-1
  };

  PatchDiscriminator(const DiscriminatorConfig& cfg, uint64_t init_seed)
      : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(init_seed);
    int in_c = cfg.input_channels;
    for (int i = 0; i < cfg.layers - 1; ++i) {
      const int out_c = cfg.base_channels * std::min(8, 1 << i);
      convs_.push_back(std::make_unique<nn::Conv2d>(in_c, out_c, 4, 2, 1, 1,
                                                    rng, cfg.spectral_norm));
      acts_.push_back(std::make_unique<nn::LeakyReLU>(0.2f));
      in_c = out_c;
    }
    score_conv_ = std::make_unique<nn::Conv2d>(in_c, 1, 4, 1, 1, 1, rng,
                                               cfg.spectral_norm);
  }

  Output forward(const nn::Tensor& x, bool train) {
    if (x.c != cfg_.input_channels)
      throw ShapeError("PatchDiscriminator: wrong input channel count");
    Output out;
    nn::Tensor y = x;
    for (size_t i = 0; i < convs_.size(); ++i) {
      y = convs_[i]->forward(y, train);
      y = acts_[i]->forward(y, train);
      out.features.push_back(y);
    }
    out.scores = score_conv_->forward(y, train);
    return out;
  }

  // g_features may be empty (no feature-matching term) or match forward's
  // features list; gradients are injected at the matching depth.
  nn::Tensor backward(const nn::Tensor& g_scores,
                      const std::vector<nn::Tensor>& g_features = {}) {
    nn::Tensor g = score_conv_->backward(g_scores);
    for (size_t i = convs_.size(); i-- > 0;) {
      if (!g_features.empty()) {
        const nn::Tensor& gf = g_features[i];
        if (!gf.same_shape(g)) throw ShapeError("feature grad shape mismatch");
        for (size_t k = 0; k < g.size(); ++k) g.data[k] += gf.data[k];
      }
      g = acts_[i]->backward(g);
      g = convs_[i]->backward(g);
    }
    return g;
  }

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> out;
    for (auto& c : convs_)
      for (auto* p : c->params()) out.push_back(p);
    for (auto* p : score_conv_->params()) out.push_back(p);
    return out;
  }

  detail::NamedArrays named_arrays(const std::string& prefix) {
    detail::NamedArrays out;
    for (size_t i = 0; i < convs_.size(); ++i)
      detail::collect_layer(convs_[i].get(),
                            prefix + "/conv" + std::to_string(i), out);
    detail::collect_layer(score_conv_.get(), prefix + "/score", out);
    return out;
  }

  std::vector<nn::Conv2d*> conv_layers() {
    std::vector<nn::Conv2d*> out;
    for (auto& c : convs_) out.push_back(c.get());
    out.push_back(score_conv_.get());
    return out;
  }

  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<nn::LeakyReLU>> acts_;
  std::unique_ptr<nn::Conv2d> score_conv_;
};

// Truncated-classifier embedding extractor: conv stages with max pooling,
// then one 3x3 conv to 512 channels, global average pool and one
// fully-connected 512->512 head. Weights are fixed at construction and
// never trained; the embedding is a stable measurement, not a learner.
class SemanticEmbedder {
 public:
  // Fixed init seed: embeddings must not depend on the run seed.
  static constexpr uint64_t kInitSeed = 0x5ead5eedULL;

  explicit SemanticEmbedder(const EmbedderConfig& cfg) : cfg_(cfg) {
    std::mt19937_64 rng(kInitSeed);
    net_.add<nn::ResizeBilinear>(cfg.input_side);
    int in_c = 3;
    for (int out_c : cfg.conv_stage_channels) {
      net_.add<nn::Conv2d>(in_c, out_c, 3, 1, 1, 1, rng);
      net_.add<nn::ReLU>();
      net_.add<nn::MaxPool2x2>();
      in_c = out_c;
    }
    net_.add<nn::Conv2d>(in_c, 512, 3, 1, 1, 1, rng);
    net_.add<nn::ReLU>();
    net_.add<nn::GlobalAvgPool>();
    net_.add<nn::Linear>(512, 512, rng);
  }

  // N x 512 x 1 x 1 output.
  nn::Tensor forward(const nn::Tensor& x) {
    if (x.c != 3) throw ShapeError("SemanticEmbedder: expects 3 channels");
    return net_.forward(x, false);
  }

  // Input gradient only; embedder weights stay frozen (their grad buffers
  // are scratch and never stepped).
  nn::Tensor backward_to_input(const nn::Tensor& g) {
    return net_.backward(g);
  }

  EmbeddingVector embed(const ImageTensor& img) {
    nn::Tensor x(1, 3, img.height, img.width);
    x.data = img.data;
    nn::Tensor e = forward(x);
    EmbeddingVector out;
    out.values = e.data;
    out.validate();
    return out;
  }

  detail::NamedArrays named_arrays(const std::string& prefix) {
    detail::NamedArrays out;
    detail::collect_layer(&net_, prefix, out);
    return out;
  }

  const EmbedderConfig& config() const { return cfg_; }

 private:
  EmbedderConfig cfg_;
  nn::Sequential net_;
};

struct NetworkConfigs {
  GeneratorConfig edge_generator;
  GeneratorConfig inpaint_generator;
  DiscriminatorConfig edge_discriminator;
  DiscriminatorConfig image_discriminator;
  EmbedderConfig embedder;

  NetworkConfigs() {
    edge_generator.input_channels = 3;   // masked gray + masked edges + mask
    edge_generator.output_channels = 1;
    inpaint_generator.input_channels = 5;  // masked rgb + edge prior + mask
    inpaint_generator.output_channels = 3;
    edge_discriminator.input_channels = 2;  // gray + edge stack
    image_discriminator.input_channels = 3;
  }
};

// All four learnable networks plus the frozen embedder and a provenance tag.
struct ModelBundle {
  NetworkConfigs configs;
  std::string provenance = "fresh";  // fresh | edge | inpaint | joint
  std::unique_ptr<Generator> edge_gen;
  std::unique_ptr<Generator> inpaint_gen;
  std::unique_ptr<PatchDiscriminator> edge_disc;
  std::unique_ptr<PatchDiscriminator> image_disc;
  std::unique_ptr<SemanticEmbedder> embedder;

  static ModelBundle create(const NetworkConfigs& cfgs, uint64_t seed) {
    ModelBundle b;
    b.configs = cfgs;
    b.edge_gen = std::make_unique<Generator>(cfgs.edge_generator, seed ^ 0x01);
    b.inpaint_gen =
        std::make_unique<Generator>(cfgs.inpaint_generator, seed ^ 0x02);
    b.edge_disc = std::make_unique<PatchDiscriminator>(cfgs.edge_discriminator,
                                                       seed ^ 0x03);
    b.image_disc = std::make_unique<PatchDiscriminator>(
        cfgs.image_discriminator, seed ^ 0x04);
    b.embedder = std::make_unique<SemanticEmbedder>(cfgs.embedder);
    return b;
  }

  detail::NamedArrays named_arrays() {
    detail::NamedArrays out;
    auto append = [&](detail::NamedArrays v) {
      out.insert(out.end(), v.begin(), v.end());
    };
    append(edge_gen->named_arrays("edge_gen"));
    append(inpaint_gen->named_arrays("inpaint_gen"));
    append(edge_disc->named_arrays("edge_disc"));
    append(image_disc->named_arrays("image_disc"));
    append(embedder->named_arrays("embedder"));
    return out;
  }
};

}  // namespace outpaint
