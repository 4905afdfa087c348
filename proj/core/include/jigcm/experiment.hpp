#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jigcm/model_config.hpp"
#include "jigcm/puzzle_io.hpp"
#include "jigcm/trainer.hpp"

namespace jigcm {

// Cuts each image into a grid (optionally capped), erodes it, and assigns
// image ids in order.
Corpus make_corpus(std::span<const Image> images, int piece_size, int erosion,
                   std::optional<int> max_pieces = std::nullopt);

// A near-square rows x cols factorization of n with rows <= cols.
std::pair<int, int> grid_dims(int n);

// A Type-2 bundle of n pieces with uniform random pixels.
PuzzleBundle random_bundle(int n, int piece_size, ProblemType type, std::uint64_t seed);

struct BenchConfig {
  std::vector<int> sizes{100, 200, 400, 800, 1600, 3200};
  std::vector<std::string> backends{"edge2vec", "e2e_proxy"};
  int repeat = 3;
  bool analytic_only = false;
  std::uint64_t seed = 0;
  int workers = 1;
  ModelConfig embedding_model = reference_config(16);
  // Backbone actually timed for the pair network; the reference-scale one is far
  // beyond desk compute.
  ModelConfig pair_model = [] {
    ModelConfig m;
    m.piece_size = 8;
    m.conv_channels = {2, 2, 2, 2};
    m.embedding_dim = 1;
    m.groups = 1;
    m.pair_input = true;
    return m;
  }();
};

struct BenchRecord {
  std::string backend;
  int n = 0;
  std::optional<double> wall_secs;      // median over repeats
  std::optional<double> analytic_macs;  // reference-scale configuration
  std::optional<double> run_macs;       // configuration actually timed
  std::optional<std::int64_t> params;
  std::optional<std::uint64_t> passes;  // network forward passes per puzzle
};

std::string to_jsonl(const BenchRecord& r);

std::vector<BenchRecord> run_bench(const BenchConfig& cfg,
                                   const std::function<void(const BenchRecord&)>& on_record = {});

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// Slope of wall time vs N per backend over records with n >= min_n.
std::vector<std::pair<std::string, double>> fit_slopes(std::span<const BenchRecord> records,
                                                       int min_n = 0);

}  // namespace jigcm
