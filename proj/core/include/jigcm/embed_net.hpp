#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jigcm/image.hpp"
#include "jigcm/model_config.hpp"
#include "jigcm/nn.hpp"

namespace jigcm {

// All weights of the network(s) in parameter_manifest order.
template <typename T>
struct ModelParamsT {
  ModelConfig config;
  std::vector<T> values;

  // Start of the right (shared) or left network block.
  const T* right_network() const { return values.data(); }
  const T* left_network() const {
    return config.twin_mode ? values.data() + count_network_params(config) : values.data();
  }

  template <typename U>
  ModelParamsT<U> cast() const {
    return {config, std::vector<U>(values.begin(), values.end())};
  }

  bool operator==(const ModelParamsT&) const = default;
};

using ModelParams = ModelParamsT<float>;

// He fan-in uniform weights, zero biases; deterministic per seed.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

using Embedding = Eigen::VectorXf;

// Batch forward pass through the right (shared) network. For pair_input
// configs use forward_pairs.
std::vector<Embedding> forward(const ModelParams& params, std::span<const Piece> batch);

// Pair network outputs for (left[i], right[i]).
std::vector<Embedding> forward_pairs(const ModelParams& params, std::span<const Piece> left,
                                     std::span<const Piece> right);

// Eight edge embeddings of one piece: for each ccw rotation r, the piece as
// the right member of a pair (sees its left edge) and as the left member
// (sees its right edge, computed on the horizontally flipped input).
struct EdgeEmbeddingSet {
  std::array<Embedding, 4> right_role;
  std::array<Embedding, 4> left_role;
};

enum class Role { kLeft, kRight };

// Stateful wrapper that counts network forward passes (one per sample).
class EdgeEmbedder {
 public:
  explicit EdgeEmbedder(ModelParams params, int chunk_size = 32);

  const ModelConfig& config() const { return params_.config; }
  const ModelParams& params() const { return params_; }

  // Role selects the network in twin mode; without twin mode both roles
  // share the same weights and the caller supplies flipped inputs.
  std::vector<Embedding> run(std::span<const Piece* const> batch, Role role = Role::kRight) const;

  // 8 forward passes.
  EdgeEmbeddingSet embed_edges(const Piece& p) const;

  // 8N forward passes, batched.
  std::vector<EdgeEmbeddingSet> embed_all(std::span<const Piece> pieces) const;

  // Pair-network scores, one pass per pair.
  std::vector<float> score_pairs(std::span<const Piece* const> left,
                                 std::span<const Piece* const> right) const;

  std::uint64_t forward_passes() const { return passes_.load(); }
  void reset_counter() { passes_ = 0; }

 private:
  ModelParams params_;
  int chunk_size_;
  mutable std::atomic<std::uint64_t> passes_{0};
};

// Inputs whose right-network embedding gives the right/left role of `p` at
// rotation r (no twin mode): rot(p, r) and hflip(rot(p, r)).
Piece right_role_input(const Piece& p, int rotation);
Piece left_role_input(const Piece& p, int rotation);

}  // namespace jigcm
