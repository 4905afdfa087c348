#pragma once

// Batched forward/backward kernels for the embedding network. Activations are
// column-major [channels, batch * H * W] matrices, so each column holds every
// channel of one pixel and a packed sample is its HWC buffer.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jigcm/image.hpp"
#include "jigcm/model_config.hpp"

namespace jigcm::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// Offsets of each tensor of one network inside its flat parameter block.
struct NetworkLayout {
  std::array<std::size_t, 4> conv_weight{};
  std::array<std::size_t, 4> conv_bias{};
  std::vector<std::size_t> fc_weight;
  std::vector<std::size_t> fc_bias;
  std::size_t size = 0;
};

NetworkLayout network_layout(const ModelConfig& cfg);

// Activations recorded by forward() for backward().
template <typename T>
struct Trace {
  int batch = 0;
  Matrix<T> input;
  std::array<Matrix<T>, 4> conv;    // post-ReLU
  std::array<Matrix<T>, 2> pooled;  // after conv2, conv3
  std::array<std::vector<int>, 2> argmax;
};

// Packs pieces (or left|right pairs) into the input matrix layout.
template <typename T>
Matrix<T> pack(std::span<const Piece* const> pieces);
template <typename T>
Matrix<T> pack_pairs(std::span<const Piece* const> left, std::span<const Piece* const> right);

// Returns [embedding_dim, batch]. `params` points at one network's block.
template <typename T>
Matrix<T> forward(const ModelConfig& cfg, const T* params, const Matrix<T>& input, int batch,
                  Trace<T>* trace = nullptr);

// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
template <typename T>
void backward(const ModelConfig& cfg, const T* params, const Trace<T>& trace,
              const Matrix<T>& grad_output, T* grad);

}  // namespace jigcm::nn
