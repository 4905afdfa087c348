#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace jigcm::cli {

namespace fs = std::filesystem;

struct CutOptions {
  fs::path input;
  fs::path out;
  int piece_size = 28;
  int erosion = 0;
  std::string type = "type1";
  std::uint64_t seed = 0;
  int downscale = 1;
  std::optional<int> max_pieces;
};

struct TrainOptions {
  fs::path corpus;
  std::optional<fs::path> config;
  fs::path out;
  std::optional<fs::path> resume;
  std::optional<fs::path> validation;
  std::optional<fs::path> log;
  std::optional<int> epochs;
  std::optional<int> iterations;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<double> lambda;
  std::optional<double> margin;
  std::optional<double> intra;
  std::optional<bool> hbt;
  std::optional<std::uint64_t> seed;
  std::optional<int> erosion;
  std::optional<int> workers;
};

struct CmOptions {
  fs::path bundle;
  std::string backend = "ssd";
  std::optional<fs::path> checkpoint;
  std::string postprocess = "none";
  fs::path out;
  std::optional<fs::path> heatmap;
  int workers = 1;
};

struct SolveOptions {
  fs::path cm;
  fs::path bundle;
  fs::path out;
  std::string postprocess = "rescaled";
  std::optional<fs::path> render;
  int workers = 1;
};

struct BenchOptions {
  std::vector<int> sizes{100, 200, 400, 800, 1600, 3200};
  std::vector<std::string> backends{"edge2vec", "e2e_proxy"};
  int repeat = 3;
  bool analytic_only = false;
  std::optional<fs::path> out;
  std::uint64_t seed = 0;
  int min_n = 400;
  int workers = 1;
};

struct SynthOptionsCli {
  fs::path out;
  int count = 1;
  int height = 420;
  int width = 560;
  std::uint64_t seed = 0;
};

int run_cut(const CutOptions& o);
int run_train(const TrainOptions& o);
int run_cm(const CmOptions& o);
int run_solve(const SolveOptions& o);
int run_bench(const BenchOptions& o);
int run_synth(const SynthOptionsCli& o);

}  // namespace jigcm::cli
