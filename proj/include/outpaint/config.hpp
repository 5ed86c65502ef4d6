#pragma once

#include <array>
#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "outpaint/checkpoint.hpp"
#include "outpaint/errors.hpp"
#include "outpaint/losses.hpp"
#include "outpaint/training.hpp"

namespace outpaint {

inline void to_json(nlohmann::json& j, const LossConfig& c) {
  j = {{"lambda_sem", c.lambda_sem},
       {"lambda_l1", c.lambda_l1},
       {"lambda_adv", c.lambda_adv},
       {"lambda_fm", c.lambda_fm},
       {"adversarial_mode",
        c.adversarial_mode == AdversarialMode::hinge ? "hinge"
                                                     : "nonsaturating"}};
}
inline void from_json(const nlohmann::json& j, LossConfig& c) {
  c.lambda_sem = j.value("lambda_sem", c.lambda_sem);
  c.lambda_l1 = j.value("lambda_l1", c.lambda_l1);
  c.lambda_adv = j.value("lambda_adv", c.lambda_adv);
  c.lambda_fm = j.value("lambda_fm", c.lambda_fm);
  const std::string mode = j.value("adversarial_mode", "nonsaturating");
  if (mode == "hinge")
    c.adversarial_mode = AdversarialMode::hinge;
  else if (mode == "nonsaturating")
    c.adversarial_mode = AdversarialMode::nonsaturating;
  else
    throw ConfigError("unknown adversarial_mode " + mode);
}

inline void to_json(nlohmann::json& j, const StageConfig& c) {
  j = {{"stage", c.stage},
       {"iterations", c.iterations},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"d_to_g_lr_ratio", c.d_to_g_lr_ratio},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"loss", c.loss_config}};
}
inline void from_json(const nlohmann::json& j, StageConfig& c) {
  c.stage = j.value("stage", c.stage);
  c.iterations = j.value("iterations", c.iterations);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.d_to_g_lr_ratio = j.value("d_to_g_lr_ratio", c.d_to_g_lr_ratio);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  if (j.contains("loss")) j.at("loss").get_to(c.loss_config);
}

inline void to_json(nlohmann::json& j, const CannyParams& c) {
  j = {{"sigma", c.sigma}, {"low", c.low}, {"high", c.high}};
}
inline void from_json(const nlohmann::json& j, CannyParams& c) {
  c.sigma = j.value("sigma", c.sigma);
  c.low = j.value("low", c.low);
  c.high = j.value("high", c.high);
}

// Whole-run declarative configuration. Environment variables override only
// paths and device: OUTPAINT_DATASET_ROOT, OUTPAINT_OUTPUT_ROOT,
// OUTPAINT_DEVICE.
struct RunConfig {
  std::string dataset_root;
  std::string output_root = "out";
  std::string device = "cpu";
  int image_side = 128;
  double mask_ratio = 0.25;
  uint64_t seed = 0;
  std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
  CannyParams canny;
  LossConfig loss;
  NetworkConfigs networks;
  StageConfig edge_stage, inpaint_stage, joint_stage;

  RunConfig() {
    edge_stage.stage = "edge";
    inpaint_stage.stage = "inpaint";
    joint_stage.stage = "joint";
  }

  void validate() const {
    if (!(mask_ratio > 0 && mask_ratio < 1))
      throw ConfigError("mask_ratio must lie in (0,1)");
    if (image_side < 8 || image_side % 4 != 0)
      throw ConfigError("image_side must be >= 8 and divisible by 4");
    if (device != "cpu")
      throw ConfigError("only device=cpu is supported in this build");
  }

  StageConfig stage(const std::string& name) const {
    StageConfig c = name == "edge"      ? edge_stage
                    : name == "inpaint" ? inpaint_stage
                                        : joint_stage;
    c.stage = name;
    if (c.seed == 0) c.seed = seed + (name == "edge" ? 1 : name == "inpaint" ? 2 : 3);
    return c;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"dataset_root", c.dataset_root},
       {"output_root", c.output_root},
       {"device", c.device},
       {"image_side", c.image_side},
       {"mask_ratio", c.mask_ratio},
       {"seed", c.seed},
       {"split_fractions", c.split_fractions},
       {"canny", c.canny},
       {"loss", c.loss},
       {"networks", c.networks},
       {"stages",
        {{"edge", c.edge_stage},
         {"inpaint", c.inpaint_stage},
         {"joint", c.joint_stage}}}};
}
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c.dataset_root = j.value("dataset_root", c.dataset_root);
  c.output_root = j.value("output_root", c.output_root);
  c.device = j.value("device", c.device);
  c.image_side = j.value("image_side", c.image_side);
  c.mask_ratio = j.value("mask_ratio", c.mask_ratio);
  c.seed = j.value("seed", c.seed);
  if (j.contains("split_fractions"))
    j.at("split_fractions").get_to(c.split_fractions);
  if (j.contains("canny")) j.at("canny").get_to(c.canny);
  if (j.contains("loss")) j.at("loss").get_to(c.loss);
  if (j.contains("networks")) j.at("networks").get_to(c.networks);
  if (j.contains("stages")) {
    const auto& s = j.at("stages");
    if (s.contains("edge")) s.at("edge").get_to(c.edge_stage);
    if (s.contains("inpaint")) s.at("inpaint").get_to(c.inpaint_stage);
    if (s.contains("joint")) s.at("joint").get_to(c.joint_stage);
  }
  // Shared loss block is the default for every stage unless overridden.
  for (StageConfig* s : {&c.edge_stage, &c.inpaint_stage, &c.joint_stage})
    if (!j.contains("stages") || !j.at("stages").contains(s->stage) ||
        !j.at("stages").at(s->stage).contains("loss"))
      s->loss_config = c.loss;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg = j.get<RunConfig>();
  if (const char* v = std::getenv("OUTPAINT_DATASET_ROOT")) cfg.dataset_root = v;
  if (const char* v = std::getenv("OUTPAINT_OUTPUT_ROOT")) cfg.output_root = v;
  if (const char* v = std::getenv("OUTPAINT_DEVICE")) cfg.device = v;
  cfg.validate();
  return cfg;
}

}  // namespace outpaint
