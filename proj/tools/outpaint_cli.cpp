// Command-line surface: prepare / train / outpaint / evaluate.
//
// Exit codes: 0 success, 1 unexpected error, 2 IngestError, 3 ShapeError,
// 4 ConfigError, 5 MaskError, 6 NumericsError, 7 CheckpointError,
// 8 ProvenanceError.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "outpaint/checkpoint.hpp"
#include "outpaint/config.hpp"
#include "outpaint/dataset.hpp"
#include "outpaint/metrics.hpp"
#include "outpaint/training.hpp"

namespace fs = std::filesystem;
using namespace outpaint;
using nlohmann::json;

namespace {

std::vector<Sample> load_split(const RunConfig& cfg, const std::string& name) {
  const fs::path dir = fs::path(cfg.output_root) / "data" / name;
  auto records = read_manifest(dir / "manifest.jsonl");
  std::vector<Sample> out;
  for (const auto& r : records) out.push_back(load_sample(dir, r));
  return out;
}

void write_grid(const std::string& path, const std::vector<Sample>& data,
                const std::vector<size_t>& ids, const nn::Tensor& pred,
                const nn::Tensor& composed) {
  const int H = data.front().image.height, W = data.front().image.width;
  const int rows = static_cast<int>(ids.size());
  ImageTensor grid(rows * H, 4 * W, 3);
  auto put = [&](int row, int col, const ImageTensor& img) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          grid.at(c, row * H + y, col * W + x) =
              img.channels == 3 ? img.at(c, y, x) : img.at(0, y, x);
  };
  for (int i = 0; i < rows; ++i) {
    const Sample& s = data[ids[i]];
    put(i, 0, apply_mask(s.image, s.mask));
    ImageTensor p(H, W, pred.c);
    std::copy(pred.sample(i), pred.sample(i) + pred.sample_size(),
              p.data.begin());
    put(i, 1, p);
    ImageTensor comp(H, W, composed.c);
    std::copy(composed.sample(i), composed.sample(i) + composed.sample_size(),
              comp.data.begin());
    put(i, 2, comp);
    put(i, 3, s.image);
  }
  save_png(path, grid);
}

// Per-stage driver with checkpointing, JSONL logging and resume support.
void run_stage(const RunConfig& cfg, const std::string& stage,
               ModelBundle& bundle, const std::vector<Sample>& train_data) {
  const fs::path ckpt_dir = fs::path(cfg.output_root) / "checkpoints";
  const fs::path log_dir = fs::path(cfg.output_root) / "logs";
  const fs::path sample_dir = fs::path(cfg.output_root) / "samples";
  fs::create_directories(ckpt_dir);
  fs::create_directories(log_dir);
  fs::create_directories(sample_dir);

  StageConfig scfg = cfg.stage(stage);
  const fs::path ckpt_path = ckpt_dir / (stage + ".ckpt");
  const fs::path state_path = ckpt_dir / (stage + ".state");

  StageRuntime rt;
  if (fs::exists(state_path) && fs::exists(ckpt_path)) {
    archive::Loaded st = archive::load(state_path.string());
    const int done = st.meta.value("iteration", -1) + 1;
    if (done >= scfg.iterations) {
      std::cout << "stage " << stage << ": already complete, skipping\n";
      bundle = load_checkpoint(ckpt_path.string());
      return;
    }
    if (done > 0) {
      std::cout << "stage " << stage << ": resuming at iteration " << done
                << "\n";
      bundle = load_checkpoint(ckpt_path.string());
      rt.start_iteration = done;
      rt.opt_state_in = std::move(st.arrays);
    }
  }

  std::ofstream log(log_dir / (stage + ".jsonl"),
                    rt.start_iteration > 0 ? std::ios::app : std::ios::trunc);

  long abort_after = -1;
  if (const char* v = std::getenv("OUTPAINT_ABORT_AFTER_ITERS"))
    abort_after = std::atol(v);
  long iter_count = 0;

  rt.on_iteration = [&](int iter, const LossBreakdown& b, double d_loss) {
    json terms;
    for (const auto& t : b.terms)
      terms[t.name] = {{"value", t.value}, {"weight", t.weight}};
    log << json{{"iteration", iter},
                {"stage", b.stage},
                {"terms", terms},
                {"total", b.total},
                {"d_loss", d_loss}}
               .dump()
        << "\n";
    log.flush();
    if (abort_after >= 0 && ++iter_count >= abort_after) {
      std::cerr << "aborting after " << iter_count << " iterations (test hook)\n";
      std::_Exit(99);
    }
  };
  rt.on_checkpoint = [&](int iter, ModelBundle& b,
                         const std::map<std::string, std::vector<float>>& st) {
    save_checkpoint(b, ckpt_path.string());
    std::vector<std::pair<std::string, const std::vector<float>*>> arrays;
    for (const auto& [k, v] : st) arrays.emplace_back(k, &v);
    archive::save(state_path.string(), json{{"iteration", iter},
                                            {"stage", stage}},
                  arrays);
  };
  rt.on_samples = [&](int iter, const std::vector<Sample>& data,
                      const nn::Tensor& pred, const nn::Tensor& composed,
                      const std::vector<size_t>& ids) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_iter%05d.png", stage.c_str(),
                  iter + 1);
    write_grid((sample_dir / name).string(), data, ids, pred, composed);
  };

  TrainReport report = train_stage(scfg, train_data, bundle, &rt);
  report.final_checkpoint = ckpt_path.string();
  std::cout << "stage " << stage << ": " << report.iterations_completed
            << " iterations in " << report.wall_time_seconds << "s, checkpoint "
            << report.final_checkpoint << "\n";
}

int cmd_prepare(const RunConfig& cfg) {
  PrepareConfig p;
  p.dataset_root = cfg.dataset_root;
  p.output_root = (fs::path(cfg.output_root) / "data").string();
  p.image_side = cfg.image_side;
  p.mask_ratio = cfg.mask_ratio;
  p.seed = cfg.seed;
  p.fractions = cfg.split_fractions;
  p.canny_sigma = cfg.canny.sigma;
  p.canny_low = cfg.canny.low;
  p.canny_high = cfg.canny.high;
  prepare_dataset(p);
  std::cout << "prepared dataset under " << p.output_root << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& stage) {
  const fs::path ckpt_dir = fs::path(cfg.output_root) / "checkpoints";
  // Preconditions before any compute.
  if (stage == "joint" && !fs::exists(ckpt_dir / "edge.ckpt"))
    throw ProvenanceError("joint stage requires an edge checkpoint");
  if (stage == "inpaint" && !fs::exists(ckpt_dir / "edge.ckpt") &&
      fs::exists(ckpt_dir / "inpaint.state"))
    ;  // resuming inpaint alone is fine

  auto train_data = load_split(cfg, "train");
  if (train_data.empty()) throw IngestError("train split is empty");

  ModelBundle bundle = ModelBundle::create(cfg.networks, cfg.seed);
  auto load_if = [&](const std::string& name) {
    const fs::path p = ckpt_dir / (name + ".ckpt");
    if (fs::exists(p)) bundle = load_checkpoint(p.string());
  };

  if (stage == "all") {
    run_stage(cfg, "edge", bundle, train_data);
    run_stage(cfg, "inpaint", bundle, train_data);
    run_stage(cfg, "joint", bundle, train_data);
  } else {
    // Start from the most advanced prerequisite checkpoint.
    if (stage == "edge") {
      // fresh or resume
    } else if (stage == "inpaint") {
      load_if("edge");
    } else {
      load_if("edge");
      load_if("inpaint");
    }
    run_stage(cfg, stage, bundle, train_data);
  }
  return 0;
}

int cmd_outpaint(const RunConfig& cfg, const std::string& input_path,
                 const std::string& checkpoint_path, double mask_ratio) {
  ModelBundle bundle = load_checkpoint(checkpoint_path);
  ImageTensor img = load_image(input_path, cfg.image_side);
  BinaryMask mask = make_right_mask(img.height, img.width, mask_ratio);
  CannyParams canny = cfg.canny;
  ImageTensor out = outpaint::outpaint(img, mask, bundle, canny);

  const fs::path out_dir = fs::path(cfg.output_root) / "outpaint";
  fs::create_directories(out_dir);
  const std::string stem = fs::path(input_path).stem().string();
  const fs::path out_path = out_dir / (stem + "_outpainted.png");
  save_png(out_path.string(), out);

  // Side-by-side strip: masked input | output | input.
  ImageTensor masked = apply_mask(img, mask);
  ImageTensor strip(img.height, img.width * 3, 3);
  auto put = [&](int col, const ImageTensor& src) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          strip.at(c, y, col * img.width + x) = src.at(c, y, x);
  };
  put(0, masked);
  put(1, out);
  put(2, img);
  const fs::path strip_path = out_dir / (stem + "_strip.png");
  save_png(strip_path.string(), strip);
  std::cout << "wrote " << out_path.string() << " and " << strip_path.string()
            << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& ckpt_a,
                 const std::string& ckpt_b, double mask_ratio) {
  auto test_data = load_split(cfg, "test");
  if (test_data.empty()) throw IngestError("test split is empty");

  const fs::path report_dir = fs::path(cfg.output_root) / "reports";
  fs::create_directories(report_dir);

  auto eval_one = [&](const std::string& path) {
    ModelBundle bundle = load_checkpoint(path);
    const std::string tag = fs::path(path).stem().string();
    MetricsReport r =
        evaluate_dataset(bundle, test_data, mask_ratio, tag, cfg.canny);
    r.save((report_dir / (tag + "_metrics.json")).string());
    return r;
  };

  MetricsReport ra = eval_one(ckpt_a);
  std::cout << "model " << ra.model_tag << ": PSNR " << ra.mean_psnr
            << " SSIM " << ra.mean_ssim << " MAE " << ra.mean_mae << "\n";
  if (!ckpt_b.empty()) {
    // Comparable runs only: the network config snapshots must agree.
    const json ja = archive::load(ckpt_a).meta.at("configs");
    const json jb = archive::load(ckpt_b).meta.at("configs");
    if (ja != jb)
      throw ConfigError("checkpoints have mismatched config snapshots");
    MetricsReport rb = eval_one(ckpt_b);
    const std::string table = ablation_table(ra, rb);
    std::cout << table;
    std::ofstream txt(report_dir / "ablation.txt");
    txt << table;
    std::ofstream js(report_dir / "ablation.json");
    js << ablation_table_json(ra, rb).dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-guided image outpainting pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed_override;
  std::optional<std::string> device_override;
  app.add_option("--config", config_path, "Run configuration file (JSON)")
      ->required();
  app.add_option("--seed", seed_override, "Override the config seed");
  app.add_option("--device", device_override, "Compute device (cpu)");

  auto* prepare = app.add_subcommand("prepare", "Build the preprocessed dataset");

  auto* train = app.add_subcommand("train", "Run training stages");
  std::string stage = "all";
  train->add_option("--stage", stage, "edge | inpaint | joint | all")
      ->check(CLI::IsMember({"edge", "inpaint", "joint", "all"}));

  auto* paint = app.add_subcommand("outpaint", "Outpaint a single image");
  std::string input_path, checkpoint_path;
  std::optional<double> ratio_override;
  paint->add_option("--input", input_path, "Input image")->required();
  paint->add_option("--checkpoint", checkpoint_path, "Model checkpoint")
      ->required();
  paint->add_option("--mask-ratio", ratio_override, "Right-region mask ratio");

  auto* eval = app.add_subcommand("evaluate", "Score checkpoints on the test set");
  std::string ckpt_a, ckpt_b;
  eval->add_option("--checkpoint", ckpt_a, "Checkpoint to evaluate")->required();
  eval->add_option("--checkpoint-b", ckpt_b,
                   "Second checkpoint; emits the ablation table");
  eval->add_option("--mask-ratio", ratio_override, "Right-region mask ratio");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (device_override) cfg.device = *device_override;
    cfg.validate();
    const double ratio = ratio_override.value_or(cfg.mask_ratio);

    if (prepare->parsed()) return cmd_prepare(cfg);
    if (train->parsed()) return cmd_train(cfg, stage);
    if (paint->parsed())
      return cmd_outpaint(cfg, input_path, checkpoint_path, ratio);
    if (eval->parsed()) return cmd_evaluate(cfg, ckpt_a, ckpt_b, ratio);
  } catch (const IngestError& e) {
    std::cerr << "ingest error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 4;
  } catch (const MaskError& e) {
    std::cerr << "mask error: " << e.what() << "\n";
    return 5;
  } catch (const NumericsError& e) {
    std::cerr << "numerics error: " << e.what() << "\n";
    return 6;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 7;
  } catch (const ProvenanceError& e) {
    std::cerr << "provenance error: " << e.what() << "\n";
    return 8;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
