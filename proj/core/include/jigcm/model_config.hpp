#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace jigcm {

// Architecture of the edge embedding network: four 3x3 same-padded conv
// layers with ReLU, 2x2 max pooling after the second and third, then a
// grouped linear projection with no activation.
struct ModelConfig {
  int piece_size = 28;
  int channels_in = 3;
  std::array<int, 4> conv_channels{64, 128, 256, 512};
  int embedding_dim = 320;
  int groups = 8;
  bool twin_mode = false;   // separate left/right networks
  bool pair_input = false;  // pair network: S x 2S input (left | right), scalar-style head

  int input_height() const { return piece_size; }
  int input_width() const { return pair_input ? 2 * piece_size : piece_size; }
  int output_height() const { return piece_size / 4; }
  int output_width() const { return input_width() / 4; }
  int output_channels() const { return conv_channels[3]; }

  // Throws UsageError when G does not divide d and C_o, S is not a multiple
  // of 4, or a size is non-positive.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// The reference-scale configuration (S = 28, d = 320) with the given group count.
ModelConfig reference_config(int groups = 16);

// Pair-input configuration on the same backbone: S x 2S input, one output.
ModelConfig e2e_config(const ModelConfig& cfg);

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;  // into the flat parameter vector
  std::size_t size = 0;
};

// Ordered tensors of the flat parameter vector. Conv weights are
// [out, kh, kw, in], projection weights [d/G, (C_o/G) * S_o_h * S_o_w].
// In twin mode the left network follows the right one with a "left." prefix.
std::vector<TensorSpec> parameter_manifest(const ModelConfig& cfg);

// Parameters of one network (ignores twin_mode).
std::int64_t count_network_params(const ModelConfig& cfg);

// Total parameters, twin networks included.
std::int64_t count_params(const ModelConfig& cfg);

// Multiply-accumulate counts. One MAC is one multiply plus one add; bias
// additions and pooling comparisons are not counted.
struct MacCounts {
  std::int64_t per_embedding = 0;  // one forward pass
  std::int64_t per_pair = 0;       // two embeddings
  std::int64_t per_pair_e2e = 0;   // pair network on the same backbone

  // 8N forward passes per puzzle.
  double puzzle_embedding(std::int64_t n) const { return 8.0 * n * per_embedding; }
  // 16N^2 pair evaluations per puzzle.
  double puzzle_e2e(std::int64_t n) const { return 16.0 * n * n * per_pair_e2e; }
};

std::int64_t count_forward_macs(const ModelConfig& cfg);
MacCounts count_macs(const ModelConfig& cfg);

}  // namespace jigcm
