#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "outpaint/canny.hpp"
#include "outpaint/errors.hpp"
#include "outpaint/image.hpp"
#include "outpaint/image_io.hpp"

namespace outpaint {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Sample {
  ImageTensor image;  // 3ch
  ImageTensor gray;   // 1ch
  EdgeMap edges;
  BinaryMask mask;
  std::string id;
};

struct DatasetSplit {
  std::vector<std::string> train, val, test;
  uint64_t seed = 0;
};

// Deterministic Fisher-Yates; std::shuffle is not pinned across stdlibs.
inline void seeded_shuffle(std::vector<std::string>& ids, uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng() % i]);
}

// Largest-remainder apportionment of n over the three fractions.
inline std::array<size_t, 3> split_sizes(size_t n,
                                         const std::array<double, 3>& frac) {
  std::array<size_t, 3> sz{};
  std::array<double, 3> rem{};
  size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = frac[i] * n;
    sz[i] = static_cast<size_t>(std::floor(exact));
    rem[i] = exact - sz[i];
    assigned += sz[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rem[a] > rem[b]; });
  for (size_t k = 0; assigned < n; ++k, ++assigned) sz[order[k % 3]]++;
  return sz;
}

inline DatasetSplit split_dataset(std::vector<std::string> ids,
                                  const std::array<double, 3>& fractions,
                                  uint64_t seed) {
  if (ids.empty()) throw IngestError("split_dataset: empty corpus");
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || fractions[0] <= 0 || fractions[1] <= 0 ||
      fractions[2] <= 0)
    throw ConfigError("split_dataset: fractions must be positive and sum to 1");
  seeded_shuffle(ids, seed);
  const auto sz = split_sizes(ids.size(), fractions);
  DatasetSplit out;
  out.seed = seed;
  out.train.assign(ids.begin(), ids.begin() + sz[0]);
  out.val.assign(ids.begin() + sz[0], ids.begin() + sz[0] + sz[1]);
  out.test.assign(ids.begin() + sz[0] + sz[1], ids.end());
  return out;
}

// One JSONL record per sample in a split manifest.
struct ManifestRecord {
  std::string id;
  std::string image_path, gray_path, edge_path, mask_path;  // relative
  double mask_ratio = 0.25;
  uint64_t seed = 0;
};

inline void write_manifest(const fs::path& path,
                           const std::vector<ManifestRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write manifest " + path.string());
  for (const auto& r : records) {
    json j{{"id", r.id},        {"image", r.image_path}, {"gray", r.gray_path},
           {"edges", r.edge_path}, {"mask", r.mask_path},
           {"mask_ratio", r.mask_ratio}, {"seed", r.seed}};
    out << j.dump() << "\n";
  }
}

inline std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot read manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ManifestRecord r;
    r.id = j.at("id");
    r.image_path = j.at("image");
    r.gray_path = j.at("gray");
    r.edge_path = j.at("edges");
    r.mask_path = j.at("mask");
    r.mask_ratio = j.at("mask_ratio");
    r.seed = j.at("seed");
    out.push_back(std::move(r));
  }
  return out;
}

inline Sample load_sample(const fs::path& split_dir, const ManifestRecord& r) {
  Sample s;
  s.id = r.id;
  s.image = load_png_raw((split_dir / r.image_path).string());
  s.gray = load_png_gray((split_dir / r.gray_path).string());
  s.edges = load_png_binary((split_dir / r.edge_path).string());
  s.mask = load_png_binary((split_dir / r.mask_path).string());
  return s;
}

struct PrepareConfig {
  std::string dataset_root;
  std::string output_root;
  int image_side = 128;
  double mask_ratio = 0.25;
  uint64_t seed = 0;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  float canny_sigma = 2.f;
  float canny_low = 0.1f;
  float canny_high = 0.2f;
};

// Ingests every decodable image under dataset_root, writes per-split
// directories with image/gray/edge/mask PNGs plus a JSONL manifest.
// Unreadable files are skipped with a warning. Deterministic per config.
inline void prepare_dataset(const PrepareConfig& cfg) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(cfg.dataset_root)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw IngestError("prepare_dataset: no images under " + cfg.dataset_root);

  std::vector<std::string> ids;
  std::vector<size_t> ok_index;
  for (size_t i = 0; i < files.size(); ++i) {
    // Probe decodability up front so the split is over usable files only.
    cv::Mat probe = cv::imread(files[i], cv::IMREAD_COLOR);
    if (probe.empty() || std::min(probe.rows, probe.cols) < 8) {
      std::cerr << "warning: skipping unreadable image " << files[i] << "\n";
      continue;
    }
    ids.push_back(fs::path(files[i]).stem().string() + "_" +
                  std::to_string(i));
    ok_index.push_back(i);
  }
  if (ids.empty()) throw IngestError("prepare_dataset: no decodable images");

  DatasetSplit split = split_dataset(ids, cfg.fractions, cfg.seed);

  std::unordered_map<std::string, std::string> id_to_file;
  for (size_t k = 0; k < ids.size(); ++k) id_to_file[ids[k]] = files[ok_index[k]];

  const BinaryMask mask =
      make_right_mask(cfg.image_side, cfg.image_side, cfg.mask_ratio);

  auto emit_split = [&](const std::string& name,
                        const std::vector<std::string>& members) {
    const fs::path dir = fs::path(cfg.output_root) / name;
    fs::create_directories(dir);
    std::vector<ManifestRecord> records;
    for (const auto& id : members) {
      ImageTensor img = load_image(id_to_file.at(id), cfg.image_side);
      ImageTensor gray = to_grayscale(img);
      EdgeMap edges =
          canny_edges(gray, cfg.canny_sigma, cfg.canny_low, cfg.canny_high);
      ManifestRecord r;
      r.id = id;
      r.image_path = id + "_image.png";
      r.gray_path = id + "_gray.png";
      r.edge_path = id + "_edges.png";
      r.mask_path = id + "_mask.png";
      r.mask_ratio = cfg.mask_ratio;
      r.seed = cfg.seed;
      save_png((dir / r.image_path).string(), img);
      save_png((dir / r.gray_path).string(), gray);
      save_png((dir / r.edge_path).string(), edges);
      save_png((dir / r.mask_path).string(), mask);
      records.push_back(std::move(r));
    }
    write_manifest(dir / "manifest.jsonl", records);
  };
  emit_split("train", split.train);
  emit_split("val", split.val);
  emit_split("test", split.test);
}

}  // namespace outpaint
