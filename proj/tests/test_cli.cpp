#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "outpaint/config.hpp"

using namespace outpaint;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
  const char* p = std::getenv("OUTPAINT_CLI");
  if (!p) throw std::runtime_error("OUTPAINT_CLI not set");
  return p;
}

std::string synth_path() {
  const char* p = std::getenv("SYNTH_TOOL");
  if (!p) throw std::runtime_error("SYNTH_TOOL not set");
  return p;
}

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// One shared workspace: a tiny synthetic corpus plus a smoke config sized
// so a full three-stage run finishes in seconds.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "outpaint_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_ / "corpus");
    ASSERT_EQ(0, run(synth_path() + " --out " + (root_ / "corpus").string() +
                     " --count 12 --side 32 --seed 5"));
  }

  static std::string write_config(const std::string& name,
                                  const std::string& output_root,
                                  int iterations = 4) {
    RunConfig cfg;
    cfg.dataset_root = (root_ / "corpus").string();
    cfg.output_root = output_root;
    cfg.image_side = 32;
    cfg.seed = 11;
    cfg.networks.edge_generator.base_channels = 8;
    cfg.networks.edge_generator.residual_blocks = 1;
    cfg.networks.inpaint_generator.base_channels = 8;
    cfg.networks.inpaint_generator.residual_blocks = 1;
    cfg.networks.edge_discriminator.base_channels = 8;
    cfg.networks.edge_discriminator.layers = 3;
    cfg.networks.image_discriminator.base_channels = 8;
    cfg.networks.image_discriminator.layers = 3;
    cfg.networks.embedder.conv_stage_channels = {8, 16};
    cfg.networks.embedder.input_side = 32;
    for (StageConfig* s :
         {&cfg.edge_stage, &cfg.inpaint_stage, &cfg.joint_stage}) {
      s->iterations = iterations;
      s->batch_size = 2;
      s->checkpoint_every = 2;
    }
    const fs::path path = root_ / name;
    std::ofstream(path) << json(cfg).dump(2) << "\n";
    return path.string();
  }

  static fs::path root_;
};

fs::path CliTest::root_;

}  // namespace

TEST_F(CliTest, MissingConfigExitsWithConfigError) {
  EXPECT_EQ(4, run(cli_path() + " --config " +
                   (root_ / "does_not_exist.json").string() + " prepare"));
}

TEST_F(CliTest, InvalidConfigValueRejected) {
  const fs::path bad = root_ / "bad.json";
  std::ofstream(bad) << R"({"dataset_root": "x", "mask_ratio": 1.5})";
  EXPECT_EQ(4, run(cli_path() + " --config " + bad.string() + " prepare"));
}

TEST_F(CliTest, PrepareIsIdempotent) {
  const std::string cfg_a =
      write_config("prep_a.json", (root_ / "out_prep_a").string());
  const std::string cfg_b =
      write_config("prep_b.json", (root_ / "out_prep_b").string());
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_a + " prepare"));
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_b + " prepare"));
  for (const char* split : {"train", "val", "test"}) {
    const fs::path ma = root_ / "out_prep_a" / "data" / split / "manifest.jsonl";
    const fs::path mb = root_ / "out_prep_b" / "data" / split / "manifest.jsonl";
    ASSERT_TRUE(fs::exists(ma)) << ma;
    EXPECT_EQ(read_file(ma), read_file(mb)) << split;
  }
  // Re-running over an existing output is also stable.
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_a + " prepare"));
  EXPECT_EQ(read_file(root_ / "out_prep_a" / "data" / "train" / "manifest.jsonl"),
            read_file(root_ / "out_prep_b" / "data" / "train" / "manifest.jsonl"));
}

TEST_F(CliTest, PrepareSkipsUnreadableImages) {
  fs::create_directories(root_ / "corpus_bad");
  ASSERT_EQ(0, run(synth_path() + " --out " + (root_ / "corpus_bad").string() +
                   " --count 6 --side 32 --seed 6"));
  std::ofstream(root_ / "corpus_bad" / "broken.png") << "this is not a png";
  RunConfig cfg;
  const std::string cfg_path =
      write_config("prep_bad.json", (root_ / "out_prep_bad").string());
  // Point the prepared config at the corpus with the broken file.
  json j = json::parse(read_file(root_ / "prep_bad.json"));
  j["dataset_root"] = (root_ / "corpus_bad").string();
  std::ofstream(root_ / "prep_bad.json") << j.dump(2);
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_path + " prepare"));
  int records = 0;
  for (const char* split : {"train", "val", "test"}) {
    std::ifstream in(root_ / "out_prep_bad" / "data" / split /
                     "manifest.jsonl");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) {
        EXPECT_EQ(line.find("broken"), std::string::npos);
        ++records;
      }
  }
  EXPECT_EQ(records, 6);  // all readable images kept, broken one skipped
}

TEST_F(CliTest, JointWithoutEdgeCheckpointIsProvenanceError) {
  const std::string cfg =
      write_config("joint_first.json", (root_ / "out_joint_first").string());
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg + " prepare"));
  EXPECT_EQ(8, run(cli_path() + " --config " + cfg + " train --stage joint"));
}

TEST_F(CliTest, FullPipelineTrainOutpaintEvaluate) {
  const std::string cfg =
      write_config("full.json", (root_ / "out_full").string());
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg + " prepare"));
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg + " train --stage all"));
  for (const char* s : {"edge", "inpaint", "joint"}) {
    EXPECT_TRUE(fs::exists(root_ / "out_full" / "checkpoints" /
                           (std::string(s) + ".ckpt")));
    EXPECT_TRUE(fs::exists(root_ / "out_full" / "logs" /
                           (std::string(s) + ".jsonl")));
  }

  // Outpaint one corpus image with the joint checkpoint.
  const std::string input = (root_ / "corpus" / "synth_0000.png").string();
  const std::string joint =
      (root_ / "out_full" / "checkpoints" / "joint.ckpt").string();
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg + " outpaint --input " +
                   input + " --checkpoint " + joint));
  EXPECT_TRUE(fs::exists(root_ / "out_full" / "outpaint" /
                         "synth_0000_outpainted.png"));
  EXPECT_TRUE(
      fs::exists(root_ / "out_full" / "outpaint" / "synth_0000_strip.png"));

  // Evaluate joint vs inpaint: metrics reports plus the ablation table.
  const std::string inpaint =
      (root_ / "out_full" / "checkpoints" / "inpaint.ckpt").string();
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg + " evaluate --checkpoint " +
                   joint + " --checkpoint-b " + inpaint));
  EXPECT_TRUE(
      fs::exists(root_ / "out_full" / "reports" / "joint_metrics.json"));
  EXPECT_TRUE(
      fs::exists(root_ / "out_full" / "reports" / "inpaint_metrics.json"));
  EXPECT_TRUE(fs::exists(root_ / "out_full" / "reports" / "ablation.txt"));
  const json report =
      json::parse(read_file(root_ / "out_full" / "reports" / "joint_metrics.json"));
  EXPECT_GT(report["count"].get<int>(), 0);
  EXPECT_TRUE(report["aggregate"].contains("psnr"));
}

TEST_F(CliTest, OutpaintWithFreshBundleFailsProvenance) {
  const std::string cfg =
      write_config("fresh_out.json", (root_ / "out_fresh").string());
  // A checkpoint that exists but was never trained past the edge stage.
  const std::string edge =
      (root_ / "out_full" / "checkpoints" / "edge.ckpt").string();
  if (!fs::exists(edge)) GTEST_SKIP() << "pipeline test did not run first";
  const std::string input = (root_ / "corpus" / "synth_0001.png").string();
  EXPECT_EQ(8, run(cli_path() + " --config " + cfg + " outpaint --input " +
                   input + " --checkpoint " + edge));
}

TEST_F(CliTest, EvaluateRejectsMismatchedConfigSnapshots) {
  const std::string joint =
      (root_ / "out_full" / "checkpoints" / "joint.ckpt").string();
  if (!fs::exists(joint)) GTEST_SKIP() << "pipeline test did not run first";
  // Train a second run with different network shapes.
  const std::string cfg2 =
      write_config("other.json", (root_ / "out_other").string(), 2);
  json j = json::parse(read_file(root_ / "other.json"));
  j["networks"]["inpaint_generator"]["base_channels"] = 12;
  std::ofstream(root_ / "other.json") << j.dump(2);
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg2 + " prepare"));
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg2 + " train --stage all"));
  const std::string other_joint =
      (root_ / "out_other" / "checkpoints" / "joint.ckpt").string();
  // Evaluate against the mismatched checkpoint: config snapshots differ.
  const std::string cfg =
      (root_ / "full.json").string();
  EXPECT_EQ(4, run(cli_path() + " --config " + cfg + " evaluate --checkpoint " +
                   joint + " --checkpoint-b " + other_joint));
}

TEST_F(CliTest, EvaluateMissingCheckpointIsCheckpointError) {
  const std::string cfg = (root_ / "full.json").string();
  if (!fs::exists(root_ / "out_full" / "data")) GTEST_SKIP();
  EXPECT_EQ(7, run(cli_path() + " --config " + cfg + " evaluate --checkpoint " +
                   (root_ / "nope.ckpt").string()));
}

// Kill the process mid-stage via the abort hook, restart, and require the
// final checkpoint to match an uninterrupted run bit for bit.
TEST_F(CliTest, KillAndRestartResumesDeterministically) {
  const std::string cfg_a =
      write_config("resume_a.json", (root_ / "out_resume_a").string());
  const std::string cfg_b =
      write_config("resume_b.json", (root_ / "out_resume_b").string());
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_a + " prepare"));
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_b + " prepare"));

  // Uninterrupted reference run.
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_a + " train --stage edge"));

  // Killed run: abort inside iteration 3 (state saved at iteration 2).
  ASSERT_EQ(99, run("OUTPAINT_ABORT_AFTER_ITERS=3 " + cli_path() +
                    " --config " + cfg_b + " train --stage edge"));
  ASSERT_TRUE(fs::exists(root_ / "out_resume_b" / "checkpoints" / "edge.state"));
  // Restart without the hook; it resumes and completes.
  ASSERT_EQ(0, run(cli_path() + " --config " + cfg_b + " train --stage edge"));

  const std::string a =
      read_file(root_ / "out_resume_a" / "checkpoints" / "edge.ckpt");
  const std::string b =
      read_file(root_ / "out_resume_b" / "checkpoints" / "edge.ckpt");
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);

  // A third invocation reports completion without retraining.
  EXPECT_EQ(0, run(cli_path() + " --config " + cfg_b + " train --stage edge"));
  EXPECT_EQ(read_file(root_ / "out_resume_b" / "checkpoints" / "edge.ckpt"), b);
}
