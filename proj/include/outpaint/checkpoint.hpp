#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "outpaint/errors.hpp"
#include "outpaint/networks.hpp"

namespace outpaint {

// Weight archive: magic, little-endian u64 JSON-header length, JSON header
// (provenance, config snapshot, array directory), then raw float32 payloads
// in directory order. Keys are canonical layer paths, e.g.
// "edge_gen/0/weight" or "image_disc/conv1/sn_u".
namespace archive {

constexpr char kMagic[8] = {'O', 'P', 'C', 'K', 'P', 'T', '1', '\n'};

inline void save(const std::string& path, const nlohmann::json& meta_in,
                 const std::vector<std::pair<std::string,
                                             const std::vector<float>*>>& arrays) {
  nlohmann::json meta = meta_in;
  meta["arrays"] = nlohmann::json::array();
  for (const auto& [name, vec] : arrays)
    meta["arrays"].push_back({{"name", name}, {"size", vec->size()}});
  const std::string header = meta.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint64_t hlen = header.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header.data(), static_cast<std::streamsize>(hlen));
  for (const auto& [name, vec] : arrays)
    out.write(reinterpret_cast<const char*>(vec->data()),
              static_cast<std::streamsize>(vec->size() * sizeof(float)));
  if (!out) throw CheckpointError("short write to " + path);
}

struct Loaded {
  nlohmann::json meta;
  std::map<std::string, std::vector<float>> arrays;
};

inline Loaded load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("bad magic in " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1ull << 30)) throw CheckpointError("bad header in " + path);
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw CheckpointError("truncated header in " + path);

  Loaded out;
  try {
    out.meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("corrupt header in " + path);
  }
  for (const auto& entry : out.meta.at("arrays")) {
    const std::string name = entry.at("name");
    const size_t size = entry.at("size");
    std::vector<float> v(size);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(size * sizeof(float)));
    if (!in) throw CheckpointError("truncated payload in " + path);
    out.arrays.emplace(name, std::move(v));
  }
  return out;
}

}  // namespace archive

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"base_channels", c.base_channels},
       {"residual_blocks", c.residual_blocks},
       {"dilation", c.dilation},
       {"input_channels", c.input_channels},
       {"output_channels", c.output_channels}};
}
inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  j.at("base_channels").get_to(c.base_channels);
  j.at("residual_blocks").get_to(c.residual_blocks);
  j.at("dilation").get_to(c.dilation);
  j.at("input_channels").get_to(c.input_channels);
  j.at("output_channels").get_to(c.output_channels);
}
inline void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = {{"layers", c.layers},
       {"base_channels", c.base_channels},
       {"spectral_norm", c.spectral_norm},
       {"input_channels", c.input_channels}};
}
inline void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  j.at("layers").get_to(c.layers);
  j.at("base_channels").get_to(c.base_channels);
  j.at("spectral_norm").get_to(c.spectral_norm);
  j.at("input_channels").get_to(c.input_channels);
}
inline void to_json(nlohmann::json& j, const EmbedderConfig& c) {
  j = {{"conv_stage_channels", c.conv_stage_channels},
       {"input_side", c.input_side}};
}
inline void from_json(const nlohmann::json& j, EmbedderConfig& c) {
  j.at("conv_stage_channels").get_to(c.conv_stage_channels);
  j.at("input_side").get_to(c.input_side);
}
inline void to_json(nlohmann::json& j, const NetworkConfigs& c) {
  j = {{"edge_generator", c.edge_generator},
       {"inpaint_generator", c.inpaint_generator},
       {"edge_discriminator", c.edge_discriminator},
       {"image_discriminator", c.image_discriminator},
       {"embedder", c.embedder}};
}
inline void from_json(const nlohmann::json& j, NetworkConfigs& c) {
  j.at("edge_generator").get_to(c.edge_generator);
  j.at("inpaint_generator").get_to(c.inpaint_generator);
  j.at("edge_discriminator").get_to(c.edge_discriminator);
  j.at("image_discriminator").get_to(c.image_discriminator);
  j.at("embedder").get_to(c.embedder);
}

inline void save_checkpoint(ModelBundle& bundle, const std::string& path) {
  nlohmann::json meta;
  meta["provenance"] = bundle.provenance;
  meta["configs"] = bundle.configs;
  std::vector<std::pair<std::string, const std::vector<float>*>> arrays;
  for (auto& [name, vec] : bundle.named_arrays()) arrays.emplace_back(name, vec);
  archive::save(path, meta, arrays);
}

inline ModelBundle load_checkpoint(const std::string& path) {
  archive::Loaded loaded = archive::load(path);
  NetworkConfigs cfgs;
  try {
    loaded.meta.at("configs").get_to(cfgs);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("missing config snapshot in " + path);
  }
  ModelBundle bundle = ModelBundle::create(cfgs, /*seed=*/0);
  bundle.provenance = loaded.meta.value("provenance", "fresh");
  for (auto& [name, vec] : bundle.named_arrays()) {
    auto it = loaded.arrays.find(name);
    if (it == loaded.arrays.end())
      throw CheckpointError("missing array " + name + " in " + path);
    if (it->second.size() != vec->size())
      throw CheckpointError("shape mismatch for " + name + " in " + path);
    *vec = it->second;
  }
  return bundle;
}

}  // namespace outpaint
