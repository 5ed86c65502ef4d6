#include <gtest/gtest.h>

#include <opencv2/imgproc.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "outpaint/canny.hpp"
#include "outpaint/dataset.hpp"
#include "outpaint/image.hpp"
#include "outpaint/image_io.hpp"
#include "outpaint/synth.hpp"

using namespace outpaint;
namespace fs = std::filesystem;

namespace {

ImageTensor random_image(int h, int w, int c, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> uf(0.f, 1.f);
  ImageTensor img(h, w, c);
  for (float& v : img.data) v = uf(rng);
  return img;
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("outpaint_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(LoadImage, ResizesSquareInput) {
  auto dir = temp_dir("load1");
  ImageTensor src = synth_landscape(512, 1, 0);
  save_png((dir / "img.png").string(), src);
  ImageTensor out = load_image((dir / "img.png").string(), 256);
  EXPECT_EQ(out.height, 256);
  EXPECT_EQ(out.width, 256);
  EXPECT_EQ(out.channels, 3);
  for (float v : out.data) {
    ASSERT_GE(v, 0.f);
    ASSERT_LE(v, 1.f);
  }
}

// Oracle: OpenCV center crop + bilinear resize, per-pixel within 2/255.
TEST(LoadImage, MatchesReferenceCropResize) {
  auto dir = temp_dir("load2");
  ImageTensor wide(200, 300, 3);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<float> uf(0.f, 1.f);
  for (float& v : wide.data) v = uf(rng);
  save_png((dir / "wide.png").string(), wide);

  ImageTensor out = load_image((dir / "wide.png").string(), 128);
  EXPECT_EQ(out.height, 128);
  EXPECT_EQ(out.width, 128);

  cv::Mat bgr = cv::imread((dir / "wide.png").string(), cv::IMREAD_COLOR);
  cv::Mat crop = bgr(cv::Rect(50, 0, 200, 200)).clone();
  cv::Mat ref;
  cv::resize(crop, ref, cv::Size(128, 128), 0, 0, cv::INTER_LINEAR);
  double max_err = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const cv::Vec3b px = ref.at<cv::Vec3b>(y, x);
      max_err = std::max(max_err, std::abs(out.at(0, y, x) - px[2] / 255.0));
      max_err = std::max(max_err, std::abs(out.at(1, y, x) - px[1] / 255.0));
      max_err = std::max(max_err, std::abs(out.at(2, y, x) - px[0] / 255.0));
    }
  EXPECT_LE(max_err, 2.0 / 255.0);
}

TEST(LoadImage, CorruptFileThrows) {
  auto dir = temp_dir("load3");
  std::ofstream((dir / "bad.png")) << "not a png";
  EXPECT_THROW(load_image((dir / "bad.png").string(), 64), IngestError);
  EXPECT_THROW(load_image((dir / "missing.png").string(), 64), IngestError);
}

TEST(ToGrayscale, KnownValues) {
  ImageTensor white(4, 4, 3, 1.f);
  ImageTensor g = to_grayscale(white);
  for (float v : g.data) EXPECT_FLOAT_EQ(v, 1.f);

  ImageTensor red(4, 4, 3, 0.f);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) red.at(0, y, x) = 1.f;
  g = to_grayscale(red);
  for (float v : g.data) EXPECT_FLOAT_EQ(v, 0.299f);
}

TEST(ToGrayscale, MatchesPerPixelOracle) {
  ImageTensor img = random_image(16, 16, 3, 7);
  ImageTensor g = to_grayscale(img);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const float expect = 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) +
                           0.114f * img.at(2, y, x);
      EXPECT_NEAR(g.at(0, y, x), expect, 1e-7f);
    }
}

TEST(ToGrayscale, WrongChannelsThrows) {
  ImageTensor g(4, 4, 1);
  EXPECT_THROW(to_grayscale(g), ShapeError);
}

TEST(Canny, ConstantImageHasNoEdges) {
  ImageTensor flat(32, 32, 1, 0.5f);
  EdgeMap e = canny_edges(flat, 1.f, 0.1f, 0.2f);
  for (float v : e.data) EXPECT_EQ(v, 0.f);
}

// Gradient maxima of a vertical step sit on the step; detected edge pixels
// must stay within a 3-column band around it.
TEST(Canny, VerticalStepConfinedBand) {
  ImageTensor step(32, 32, 1, 0.f);
  for (int y = 0; y < 32; ++y)
    for (int x = 16; x < 32; ++x) step.at(0, y, x) = 1.f;
  EdgeMap e = canny_edges(step, 1.f, 0.1f, 0.2f);
  int edge_pixels = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (e.at(y, x) == 1.f) {
        ++edge_pixels;
        EXPECT_GE(x, 14);
        EXPECT_LE(x, 17);
      }
  EXPECT_GT(edge_pixels, 0);
}

TEST(Canny, Deterministic) {
  ImageTensor img = random_image(24, 24, 1, 5);
  EdgeMap a = canny_edges(img, 2.f, 0.1f, 0.2f);
  EdgeMap b = canny_edges(img, 2.f, 0.1f, 0.2f);
  EXPECT_EQ(a.data, b.data);
}

TEST(Canny, InvalidThresholdsThrow) {
  ImageTensor img(16, 16, 1, 0.f);
  EXPECT_THROW(canny_edges(img, 1.f, 0.3f, 0.2f), ConfigError);
  EXPECT_THROW(canny_edges(img, 0.f, 0.1f, 0.2f), ConfigError);
  EXPECT_THROW(canny_edges(img, 1.f, 0.1f, 1.5f), ConfigError);
}

// Canny operates on gradients; adding a constant offset to a mid-range
// image must not change the output.
TEST(Canny, InvariantToConstantOffset) {
  ImageTensor img = synth_landscape(48, 3, 2);
  ImageTensor gray = to_grayscale(img);
  for (float& v : gray.data) v = 0.2f + 0.5f * v;  // keep headroom
  EdgeMap base = canny_edges(gray, 2.f, 0.1f, 0.2f);
  for (float offset : {0.05f, 0.1f, 0.19f}) {
    ImageTensor shifted = gray;
    for (float& v : shifted.data) v += offset;
    EdgeMap e = canny_edges(shifted, 2.f, 0.1f, 0.2f);
    EXPECT_EQ(e.data, base.data) << "offset " << offset;
  }
}

TEST(RightMask, HandComputedExample) {
  BinaryMask m = make_right_mask(4, 8, 0.25);  // floor(2) zero columns
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) EXPECT_EQ(m.at(y, x), 1.f);
    for (int x = 6; x < 8; ++x) EXPECT_EQ(m.at(y, x), 0.f);
  }
}

TEST(RightMask, FloorToZeroGivesAllOnes) {
  BinaryMask m = make_right_mask(4, 8, 0.1);
  for (float v : m.data) EXPECT_EQ(v, 1.f);
}

TEST(RightMask, PaperQuarterOn256) {
  BinaryMask m = make_right_mask(256, 256, 0.25);
  int zero_cols = 0;
  for (int x = 0; x < 256; ++x)
    if (m.at(0, x) == 0.f) ++zero_cols;
  EXPECT_EQ(zero_cols, 64);
}

TEST(RightMask, ZeroColumnCountSweep) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const int w = 8 + static_cast<int>(rng() % 300);
    const double ratio = 0.01 + 0.98 * (rng() % 1000) / 1000.0;
    BinaryMask m = make_right_mask(4, w, ratio);
    int zero_cols = 0;
    for (int x = 0; x < w; ++x)
      if (m.at(0, x) == 0.f) ++zero_cols;
    EXPECT_EQ(zero_cols, static_cast<int>(std::floor(ratio * w)));
    // Columns are uniform.
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < w; ++x) EXPECT_EQ(m.at(y, x), m.at(0, x));
  }
  EXPECT_THROW(make_right_mask(4, 8, 0.0), ConfigError);
  EXPECT_THROW(make_right_mask(4, 8, 0.0 - 1e-9), ConfigError);
  EXPECT_THROW(make_right_mask(4, 8, 1.0), ConfigError);
}

TEST(ApplyMask, IdentityAndAnnihilation) {
  ImageTensor img = random_image(8, 8, 3, 3);
  BinaryMask ones(8, 8, 1.f), zeros(8, 8, 0.f);
  EXPECT_EQ(apply_mask(img, ones).data, img.data);
  for (float v : apply_mask(img, zeros).data) EXPECT_EQ(v, 0.f);
}

TEST(ApplyMask, RightQuarterPreservesKnownBitExactly) {
  ImageTensor img = random_image(8, 8, 3, 4);
  BinaryMask m = make_right_mask(8, 8, 0.25);
  ImageTensor out = apply_mask(img, m);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        if (x < 6)
          EXPECT_EQ(out.at(c, y, x), img.at(c, y, x));
        else
          EXPECT_EQ(out.at(c, y, x), 0.f);
      }
}

TEST(ApplyMask, ShapeMismatchThrows) {
  ImageTensor img(8, 8, 3);
  BinaryMask m(8, 9);
  EXPECT_THROW(apply_mask(img, m), ShapeError);
}

TEST(SplitDataset, DeterministicSizes) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("id" + std::to_string(i));
  DatasetSplit a = split_dataset(ids, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(a.train.size(), 8u);
  EXPECT_EQ(a.val.size(), 1u);
  EXPECT_EQ(a.test.size(), 1u);
  DatasetSplit b = split_dataset(ids, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
}

TEST(SplitDataset, DifferentSeedSameSizes) {
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("id" + std::to_string(i));
  DatasetSplit a = split_dataset(ids, {0.8, 0.1, 0.1}, 1);
  DatasetSplit b = split_dataset(ids, {0.8, 0.1, 0.1}, 2);
  EXPECT_EQ(a.train.size(), b.train.size());
  EXPECT_NE(a.train, b.train);  // overwhelmingly likely under any seed pair
}

// Largest-remainder: 3 ids at (0.34,0.33,0.33) -> 1/1/1 by hand.
TEST(SplitDataset, LargestRemainderRounding) {
  std::vector<std::string> ids{"a", "b", "c"};
  DatasetSplit s = split_dataset(ids, {0.34, 0.33, 0.33}, 0);
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(SplitDataset, EmptyAndBadFractions) {
  EXPECT_THROW(split_dataset({}, {0.8, 0.1, 0.1}, 0), IngestError);
  EXPECT_THROW(split_dataset({"a"}, {0.9, 0.2, 0.1}, 0), ConfigError);
}

TEST(SplitDataset, DisjointnessAndCoverageRandomized) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 1000; ++t) {
    const size_t n = 1 + rng() % 60;
    std::vector<std::string> ids;
    for (size_t i = 0; i < n; ++i) ids.push_back("x" + std::to_string(i));
    double f1 = 0.1 + 0.8 * (rng() % 1000) / 1000.0;
    double f2 = (1.0 - f1) * (0.1 + 0.8 * (rng() % 1000) / 1000.0);
    double f3 = 1.0 - f1 - f2;
    DatasetSplit s = split_dataset(ids, {f1, f2, f3}, rng());
    std::set<std::string> all;
    for (const auto& v : {s.train, s.val, s.test})
      for (const auto& id : v) {
        ASSERT_TRUE(all.insert(id).second) << "duplicate " << id;
      }
    EXPECT_EQ(all.size(), n);
  }
}

TEST(Manifest, RoundTrip) {
  auto dir = temp_dir("manifest");
  std::vector<ManifestRecord> recs(2);
  recs[0] = {"a", "a_image.png", "a_gray.png", "a_edges.png", "a_mask.png",
             0.25, 7};
  recs[1] = {"b", "b_image.png", "b_gray.png", "b_edges.png", "b_mask.png",
             0.25, 7};
  write_manifest(dir / "manifest.jsonl", recs);
  auto loaded = read_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].id, "a");
  EXPECT_EQ(loaded[1].mask_path, "b_mask.png");
  EXPECT_EQ(loaded[1].seed, 7u);
}

TEST(PrepareDataset, ProducesSplitsAndSkipsUnreadable) {
  auto src = temp_dir("prep_src");
  auto out = temp_dir("prep_out");
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%02d.png", i);
    save_png((src / name).string(), synth_landscape(64, 3, i));
  }
  std::ofstream(src / "broken.png") << "junk";

  PrepareConfig cfg;
  cfg.dataset_root = src.string();
  cfg.output_root = out.string();
  cfg.image_side = 32;
  cfg.seed = 5;
  prepare_dataset(cfg);

  auto train = read_manifest(out / "train" / "manifest.jsonl");
  auto val = read_manifest(out / "val" / "manifest.jsonl");
  auto test = read_manifest(out / "test" / "manifest.jsonl");
  EXPECT_EQ(train.size() + val.size() + test.size(), 10u);
  EXPECT_EQ(train.size(), 8u);

  // Every produced sample: masked image equals image on mask=1, bit-exactly.
  for (const auto& r : train) {
    Sample s = load_sample(out / "train", r);
    ImageTensor masked = apply_mask(s.image, s.mask);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s.image.height; ++y)
        for (int x = 0; x < s.image.width; ++x)
          if (s.mask.at(y, x) == 1.f)
            ASSERT_EQ(masked.at(c, y, x), s.image.at(c, y, x));
  }
}

TEST(PrepareDataset, EmptyCorpusThrows) {
  auto src = temp_dir("prep_empty");
  auto out = temp_dir("prep_empty_out");
  PrepareConfig cfg;
  cfg.dataset_root = src.string();
  cfg.output_root = out.string();
  EXPECT_THROW(prepare_dataset(cfg), IngestError);
}
