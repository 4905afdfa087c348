#include "jigcm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "jigcm/cm_engine.hpp"
#include "jigcm/errors.hpp"

namespace jigcm {

Corpus make_corpus(std::span<const Image> images, int piece_size, int erosion,
                   std::optional<int> max_pieces) {
  Corpus corpus;
  for (std::size_t k = 0; k < images.size(); ++k) {
    PieceGrid grid = cut_puzzle(images[k], piece_size, max_pieces);
    if (erosion > 0) grid = erode_grid(grid, erosion);
    corpus.push_back({static_cast<std::uint32_t>(k), std::move(grid)});
  }
  return corpus;
}

std::pair<int, int> grid_dims(int n) {
  if (n < 1) throw UsageError("puzzle size must be positive");
  int rows = static_cast<int>(std::sqrt(static_cast<double>(n)));
  while (n % rows != 0) --rows;
  return {rows, n / rows};
}

PuzzleBundle random_bundle(int n, int piece_size, ProblemType type, std::uint64_t seed) {
  const auto [rows, cols] = grid_dims(n);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(0, 255);
  PieceGrid grid{rows, cols, {}};
  for (int k = 0; k < n; ++k) {
    Piece p(piece_size);
    for (float& v : p.data) v = static_cast<float>(level(rng)) / 255.0f;
    grid.pieces.push_back(std::move(p));
  }
  return scramble(grid, type, seed, "random");
}

std::string to_jsonl(const BenchRecord& r) {
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  const nlohmann::json j{{"backend", r.backend},
                         {"N", r.n},
                         {"wall_secs", opt(r.wall_secs)},
                         {"analytic_macs", opt(r.analytic_macs)},
                         {"run_macs", opt(r.run_macs)},
                         {"params", opt(r.params)},
                         {"passes", opt(r.passes)}};
  return j.dump();
}

std::vector<BenchRecord> run_bench(const BenchConfig& cfg,
                                   const std::function<void(const BenchRecord&)>& on_record) {
  if (cfg.repeat < 1) throw UsageError("repeat must be positive");
  const MacCounts reference = count_macs(cfg.embedding_model);
  const MacCounts pair = count_macs(cfg.pair_model);
  std::vector<BenchRecord> out;
  for (const std::string& name : cfg.backends) {
    const bool is_pair = name == "e2e_proxy";
    const bool is_embed = name == "edge2vec";
    std::optional<ModelParams> params;
    if (!cfg.analytic_only && (is_pair || is_embed))
      params = init_params(is_pair ? cfg.pair_model : cfg.embedding_model, cfg.seed);
    for (int n : cfg.sizes) {
      BenchRecord rec;
      rec.backend = name;
      rec.n = n;
      if (is_embed) {
        rec.analytic_macs = reference.puzzle_embedding(n);
        rec.run_macs = rec.analytic_macs;
        rec.params = count_params(cfg.embedding_model);
      } else if (is_pair) {
        rec.analytic_macs = reference.puzzle_e2e(n);
        rec.run_macs = pair.puzzle_e2e(n);
        rec.params = count_params(e2e_config(cfg.embedding_model));
      }
      // Analytic pass counts for a Type-2 puzzle; replaced by the measured
      // count when timing.
      if (is_embed) rec.passes = 8ull * n;
      if (is_pair) rec.passes = 16ull * n * (n - 1);
      if (!cfg.analytic_only) {
        const int size = is_pair ? cfg.pair_model.piece_size : cfg.embedding_model.piece_size;
        const PuzzleBundle bundle = random_bundle(n, size, ProblemType::kType2, cfg.seed + n);
        const auto backend = make_backend(name, params);
        std::vector<double> times;
        for (int k = 0; k < cfg.repeat; ++k) {
          const auto start = std::chrono::steady_clock::now();
          compute_cm(bundle, *backend, cfg.workers);
          times.push_back(
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
          if (k == 0 && (is_pair || is_embed)) rec.passes = backend->network_passes();
        }
        std::sort(times.begin(), times.end());
        rec.wall_secs = times[times.size() / 2];
      }
      if (on_record) on_record(rec);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("slope fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0 && y[k] > 0)) throw NumericalError("slope fit needs positive values");
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw NumericalError("slope fit needs distinct sizes");
  return sxy / sxx;
}

std::vector<std::pair<std::string, double>> fit_slopes(std::span<const BenchRecord> records,
                                                       int min_n) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> points;
  for (const auto& r : records) {
    if (r.n < min_n || !r.wall_secs) continue;
    if (!points.count(r.backend)) order.push_back(r.backend);
    points[r.backend].first.push_back(r.n);
    points[r.backend].second.push_back(*r.wall_secs);
  }
  std::vector<std::pair<std::string, double>> out;
  for (const auto& name : order) {
    const auto& [x, y] = points[name];
    if (x.size() >= 2) out.emplace_back(name, loglog_slope(x, y));
  }
  return out;
}

}  // namespace jigcm
