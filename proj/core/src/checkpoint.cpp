#include "jigcm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "jigcm/errors.hpp"

namespace jigcm {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointVersion = "e2v1";

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const fs::path& dir) {
  const ModelConfig& cfg = params.config;
  const auto manifest = parameter_manifest(cfg);
  if (params.values.size() != manifest.back().offset + manifest.back().size)
    throw UsageError("parameter vector does not match its configuration");

  fs::create_directories(dir);
  json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["piece_size"] = cfg.piece_size;
  meta["channels_in"] = cfg.channels_in;
  meta["conv_channels"] = cfg.conv_channels;
  meta["embedding_dim"] = cfg.embedding_dim;
  meta["groups"] = cfg.groups;
  meta["twin_mode"] = cfg.twin_mode;
  meta["pair_input"] = cfg.pair_input;
  json tensors = json::array();
  for (const TensorSpec& t : manifest) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
  meta["parameter_manifest"] = tensors;
  {
    std::ofstream out(dir / "meta.json");
    if (!out) throw DataError("cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
  }

  std::ofstream bin(dir / "weights.bin", std::ios::binary);
  if (!bin) throw DataError("cannot write " + (dir / "weights.bin").string());
  for (float v : params.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = to_little(bits);
    bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

ModelParams load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw DataError("missing checkpoint meta.json in " + dir.string());
  ModelParams params;
  std::vector<std::pair<std::string, std::vector<int>>> stored;
  try {
    json meta;
    in >> meta;
    const auto version = meta.at("format_version").get<std::string>();
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint format_version '" + version + "'");
    ModelConfig& cfg = params.config;
    cfg.piece_size = meta.at("piece_size").get<int>();
    cfg.channels_in = meta.at("channels_in").get<int>();
    cfg.conv_channels = meta.at("conv_channels").get<std::array<int, 4>>();
    cfg.embedding_dim = meta.at("embedding_dim").get<int>();
    cfg.groups = meta.at("groups").get<int>();
    cfg.twin_mode = meta.at("twin_mode").get<bool>();
    cfg.pair_input = meta.value("pair_input", false);
    for (const auto& t : meta.at("parameter_manifest"))
      stored.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>());
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint meta.json: " + std::string(e.what()));
  }
  try {
    params.config.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint config invalid: ") + e.what());
  }

  const auto manifest = parameter_manifest(params.config);
  if (manifest.size() != stored.size()) throw DataError("checkpoint manifest length mismatch");
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (manifest[i].name != stored[i].first || manifest[i].shape != stored[i].second)
      throw DataError("checkpoint manifest entry '" + stored[i].first + "' does not match config");

  const std::size_t count = manifest.back().offset + manifest.back().size;
  std::ifstream bin(dir / "weights.bin", std::ios::binary | std::ios::ate);
  if (!bin) throw DataError("missing weights.bin in " + dir.string());
  if (static_cast<std::size_t>(bin.tellg()) != count * sizeof(float))
    throw DataError("weights.bin size does not match the manifest");
  bin.seekg(0);
  params.values.resize(count);
  for (float& v : params.values) {
    std::uint32_t bits;
    bin.read(reinterpret_cast<char*>(&bits), sizeof bits);
    bits = to_little(bits);
    std::memcpy(&v, &bits, sizeof v);
  }
  if (!bin) throw DataError("truncated weights.bin");
  return params;
}

}  // namespace jigcm
