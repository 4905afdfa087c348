#include <benchmark/benchmark.h>

#include "jigcm/classical_cm.hpp"
#include "jigcm/cm_engine.hpp"
#include "jigcm/embed_net.hpp"
#include "jigcm/experiment.hpp"

namespace {

using namespace jigcm;

void BM_ClassicalScore(benchmark::State& state) {
  const auto measure = static_cast<ClassicalMeasure>(state.range(0));
  const PuzzleBundle b = random_bundle(2, 28, ProblemType::kType1, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(classical_score(measure, b.pieces[0], b.pieces[1]));
}
BENCHMARK(BM_ClassicalScore)->DenseRange(0, 3)->ArgName("measure");

void BM_ClassicalCm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PuzzleBundle b = random_bundle(n, 28, ProblemType::kType2, 2);
  const auto backend = make_backend("mgc");
  for (auto _ : state) benchmark::DoNotOptimize(compute_cm(b, *backend));
  state.SetComplexityN(n);
}
BENCHMARK(BM_ClassicalCm)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond)->Complexity();

ModelConfig small_model() {
  ModelConfig c;
  c.conv_channels = {8, 16, 32, 64};
  c.embedding_dim = 160;
  c.groups = 8;
  return c;
}

void BM_EmbedEdges(benchmark::State& state) {
  const PuzzleBundle b = random_bundle(1, 28, ProblemType::kType2, 3);
  const EdgeEmbedder e(init_params(state.range(0) ? reference_config(16) : small_model(), 4));
  for (auto _ : state) benchmark::DoNotOptimize(e.embed_edges(b.pieces[0]));
}
BENCHMARK(BM_EmbedEdges)->Arg(0)->Arg(1)->ArgName("reference")->Unit(benchmark::kMillisecond);

void BM_EmbeddingCm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PuzzleBundle b = random_bundle(n, 28, ProblemType::kType2, 5);
  const auto backend = make_backend("edge2vec", init_params(small_model(), 6));
  for (auto _ : state) benchmark::DoNotOptimize(compute_cm(b, *backend));
  state.SetComplexityN(n);
}
BENCHMARK(BM_EmbeddingCm)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond)->Complexity();

}  // namespace
BENCHMARK_MAIN();
