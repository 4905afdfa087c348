#include "jigcm/embed_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "jigcm/errors.hpp"

namespace jigcm {

void ModelConfig::validate() const {
  if (piece_size <= 0 || piece_size % 4 != 0)
    throw UsageError("piece_size must be a positive multiple of 4");
  if (channels_in <= 0) throw UsageError("channels_in must be positive");
  for (int c : conv_channels)
    if (c <= 0) throw UsageError("conv channel counts must be positive");
  if (embedding_dim <= 0 || groups <= 0) throw UsageError("embedding_dim and groups must be positive");
  if (embedding_dim % groups != 0) throw UsageError("groups must divide embedding_dim");
  if (conv_channels[3] % groups != 0) throw UsageError("groups must divide the last conv width");
  if (pair_input && twin_mode) throw UsageError("pair_input and twin_mode are exclusive");
}

ModelConfig reference_config(int groups) {
  ModelConfig cfg;
  cfg.groups = groups;
  return cfg;
}

ModelConfig e2e_config(const ModelConfig& cfg) {
  ModelConfig e = cfg;
  e.pair_input = true;
  e.twin_mode = false;
  e.embedding_dim = 1;
  e.groups = 1;
  return e;
}

std::vector<TensorSpec> parameter_manifest(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<TensorSpec> specs;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    specs.push_back({std::move(name), std::move(shape), offset, n});
    offset += n;
  };
  const int gin = (cfg.output_channels() / cfg.groups) * cfg.output_height() * cfg.output_width();
  const int gout = cfg.embedding_dim / cfg.groups;
  const int nets = cfg.twin_mode ? 2 : 1;
  for (int net = 0; net < nets; ++net) {
    const std::string prefix = net == 0 ? "" : "left.";
    int in = cfg.channels_in;
    for (int i = 0; i < 4; ++i) {
      const int out = cfg.conv_channels[i];
      add(prefix + "conv" + std::to_string(i + 1) + ".weight", {out, 3, 3, in});
      add(prefix + "conv" + std::to_string(i + 1) + ".bias", {out});
      in = out;
    }
    for (int g = 0; g < cfg.groups; ++g) {
      add(prefix + "fc." + std::to_string(g) + ".weight", {gout, gin});
      add(prefix + "fc." + std::to_string(g) + ".bias", {gout});
    }
  }
  return specs;
}

std::int64_t count_network_params(const ModelConfig& cfg) {
  cfg.validate();
  std::int64_t total = 0;
  std::int64_t in = cfg.channels_in;
  for (int out : cfg.conv_channels) {
    total += static_cast<std::int64_t>(out) * in * 9 + out;
    in = out;
  }
  const std::int64_t flat = static_cast<std::int64_t>(cfg.output_channels()) *
                            cfg.output_height() * cfg.output_width();
  total += flat * cfg.embedding_dim / cfg.groups + cfg.embedding_dim;
  return total;
}

std::int64_t count_params(const ModelConfig& cfg) {
  return count_network_params(cfg) * (cfg.twin_mode ? 2 : 1);
}

std::int64_t count_forward_macs(const ModelConfig& cfg) {
  cfg.validate();
  std::int64_t h = cfg.input_height();
  std::int64_t w = cfg.input_width();
  std::int64_t in = cfg.channels_in;
  std::int64_t macs = 0;
  for (int i = 0; i < 4; ++i) {
    if (i == 2 || i == 3) {
      h /= 2;
      w /= 2;
    }
    const std::int64_t out = cfg.conv_channels[i];
    macs += h * w * out * in * 9;
    in = out;
  }
  macs += in * h * w * cfg.embedding_dim / cfg.groups;
  return macs;
}

MacCounts count_macs(const ModelConfig& cfg) {
  MacCounts m;
  m.per_embedding = count_forward_macs(cfg);
  if (cfg.pair_input) {
    m.per_pair = m.per_embedding;
    m.per_pair_e2e = m.per_embedding;
  } else {
    m.per_pair = 2 * m.per_embedding;
    m.per_pair_e2e = count_forward_macs(e2e_config(cfg));
  }
  return m;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  const auto specs = parameter_manifest(cfg);
  ModelParams p;
  p.config = cfg;
  p.values.assign(specs.empty() ? 0 : specs.back().offset + specs.back().size, 0.0f);
  std::mt19937_64 rng(seed);
  for (const TensorSpec& t : specs) {
    if (t.shape.size() == 1) continue;  // bias
    const int fan_in = t.shape.size() == 4 ? t.shape[1] * t.shape[2] * t.shape[3] : t.shape[1];
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (std::size_t k = 0; k < t.size; ++k) p.values[t.offset + k] = dist(rng);
  }
  return p;
}

Piece right_role_input(const Piece& p, int rotation) { return rotate(p, rotation); }
Piece left_role_input(const Piece& p, int rotation) { return hflip(rotate(p, rotation)); }

EdgeEmbedder::EdgeEmbedder(ModelParams params, int chunk_size)
    : params_(std::move(params)), chunk_size_(std::max(1, chunk_size)) {
  params_.config.validate();
  if (static_cast<std::int64_t>(params_.values.size()) != count_params(params_.config))
    throw DataError("parameter vector size does not match the configuration");
}

namespace {

void check_piece(const ModelConfig& cfg, const Piece& p) {
  if (p.size != cfg.piece_size || p.channels != cfg.channels_in)
    throw DataError("piece shape " + std::to_string(p.size) + "x" + std::to_string(p.size) + "x" +
                    std::to_string(p.channels) + " does not match the model");
}

}  // namespace

std::vector<Embedding> EdgeEmbedder::run(std::span<const Piece* const> batch, Role role) const {
  const ModelConfig& cfg = params_.config;
  if (cfg.pair_input) throw UsageError("pair network needs score_pairs");
  const float* net = role == Role::kLeft ? params_.left_network() : params_.right_network();
  std::vector<Embedding> out;
  out.reserve(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += chunk_size_) {
    const std::size_t n = std::min<std::size_t>(chunk_size_, batch.size() - start);
    const auto chunk = batch.subspan(start, n);
    for (const Piece* p : chunk) check_piece(cfg, *p);
    const nn::Matrix<float> x = nn::pack<float>(chunk);
    const nn::Matrix<float> z = nn::forward<float>(cfg, net, x, static_cast<int>(n));
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(z.col(static_cast<Eigen::Index>(i)));
    passes_ += n;
  }
  return out;
}

EdgeEmbeddingSet EdgeEmbedder::embed_edges(const Piece& p) const {
  return embed_all(std::span<const Piece>(&p, 1)).front();
}

std::vector<EdgeEmbeddingSet> EdgeEmbedder::embed_all(std::span<const Piece> pieces) const {
  const bool twin = params_.config.twin_mode;
  std::vector<EdgeEmbeddingSet> result(pieces.size());
  constexpr std::size_t kBlock = 64;
  for (std::size_t start = 0; start < pieces.size(); start += kBlock) {
    const std::size_t m = std::min(kBlock, pieces.size() - start);
    std::vector<Piece> right_in, left_in;
    right_in.reserve(4 * m);
    left_in.reserve(4 * m);
    for (std::size_t i = 0; i < m; ++i)
      for (int r = 0; r < 4; ++r) {
        right_in.push_back(right_role_input(pieces[start + i], r));
        left_in.push_back(twin ? rotate(pieces[start + i], r) : hflip(right_in.back()));
      }
    std::vector<const Piece*> rp, lp;
    for (std::size_t k = 0; k < right_in.size(); ++k) {
      rp.push_back(&right_in[k]);
      lp.push_back(&left_in[k]);
    }
    const auto zr = run(rp, Role::kRight);
    const auto zl = run(lp, Role::kLeft);
    for (std::size_t i = 0; i < m; ++i)
      for (int r = 0; r < 4; ++r) {
        result[start + i].right_role[r] = zr[i * 4 + r];
        result[start + i].left_role[r] = zl[i * 4 + r];
      }
  }
  return result;
}

std::vector<float> EdgeEmbedder::score_pairs(std::span<const Piece* const> left,
                                             std::span<const Piece* const> right) const {
  const ModelConfig& cfg = params_.config;
  if (!cfg.pair_input) throw UsageError("score_pairs needs a pair-input model");
  if (left.size() != right.size()) throw UsageError("pair halves differ in length");
  std::vector<float> out;
  out.reserve(left.size());
  for (std::size_t start = 0; start < left.size(); start += chunk_size_) {
    const std::size_t n = std::min<std::size_t>(chunk_size_, left.size() - start);
    for (std::size_t i = 0; i < n; ++i) {
      check_piece(cfg, *left[start + i]);
      check_piece(cfg, *right[start + i]);
    }
    const nn::Matrix<float> x = nn::pack_pairs<float>(left.subspan(start, n), right.subspan(start, n));
    const nn::Matrix<float> z = nn::forward<float>(cfg, params_.right_network(), x, static_cast<int>(n));
    for (std::size_t i = 0; i < n; ++i) out.push_back(z(0, static_cast<Eigen::Index>(i)));
    passes_ += n;
  }
  return out;
}

std::vector<Embedding> forward(const ModelParams& params, std::span<const Piece> batch) {
  EdgeEmbedder e(params);
  std::vector<const Piece*> ptrs;
  for (const Piece& p : batch) ptrs.push_back(&p);
  return e.run(ptrs, Role::kRight);
}

std::vector<Embedding> forward_pairs(const ModelParams& params, std::span<const Piece> left,
                                     std::span<const Piece> right) {
  EdgeEmbedder e(params);
  std::vector<const Piece*> lp, rp;
  for (const Piece& p : left) lp.push_back(&p);
  for (const Piece& p : right) rp.push_back(&p);
  std::vector<Embedding> out;
  for (float v : e.score_pairs(lp, rp)) out.push_back(Embedding::Constant(1, v));
  return out;
}

}  // namespace jigcm
