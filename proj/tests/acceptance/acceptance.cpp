// Acceptance suite: one [PASS]/[FAIL] line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jigcm/checkpoint.hpp"
#include "jigcm/classical_cm.hpp"
#include "jigcm/cm_engine.hpp"
#include "jigcm/errors.hpp"
#include "jigcm/experiment.hpp"
#include "jigcm/reconstructor.hpp"
#include "jigcm/synth.hpp"
#include "jigcm/trainer.hpp"
#include "test_support.hpp"

namespace jigcm {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1, 2

// Conv weights + biases, then the grouped projection, counted layer by layer.
std::int64_t closed_form_params(int s, int d, int g) {
  const int ch[5] = {3, 64, 128, 256, 512};
  std::int64_t total = 0;
  for (int k = 0; k < 4; ++k) total += 9LL * ch[k] * ch[k + 1] + ch[k + 1];
  const std::int64_t so = s / 4;
  return total + 512 * so * so * d / g + d;
}

double round_sig(double v, int digits) {
  const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(v))));
  return std::round(v * scale) / scale;
}

Outcome parameter_accounting() {
  const std::int64_t g1 = count_params(reference_config(1));
  const std::int64_t g16 = count_params(reference_config(16));
  const double ratio = static_cast<double>(g1) / static_cast<double>(g16);
  const bool ok = g1 == 9579456 && g16 == 2053056 && g1 == closed_form_params(28, 320, 1) &&
                  g16 == closed_form_params(28, 320, 16) && round_sig(g1 / 1e6, 2) == 9.6 &&
                  round_sig(g16 / 1e6, 2) == 2.1 && std::abs(ratio - 4.67) < 0.005;
  return {ok, fmt("G=1 %lld, G=16 %lld, ratio %.3f", static_cast<long long>(g1),
                  static_cast<long long>(g16), ratio)};
}

Outcome mac_accounting() {
  const MacCounts m = count_macs(reference_config(16));
  const double pair = m.per_pair / 1e9;
  const double emb = m.puzzle_embedding(1) / 1e9;
  const double e2e = m.puzzle_e2e(1) / 1e9;
  // Independent per-layer sum: H*W*Cin*Cout*9 per conv, Co*So^2*d/G for the projection.
  const std::int64_t oracle = 784LL * 9 * (3 * 64 + 64 * 128) + 196LL * 9 * 128 * 256 +
                              49LL * 9 * 256 * 512 + 512LL * 49 * 320 / 16;
  const bool ok = m.per_embedding == oracle && std::round(pair * 100) / 100 == 0.35 &&
                  round_sig(emb, 2) == 1.4 && round_sig(e2e, 2) == 5.6;
  return {ok, fmt("per pair %.4f GMACs, embedding %.4fN, e2e %.4fN^2", pair, emb, e2e)};
}

// ---------------------------------------------------------------- 3

Outcome scaling_law() {
  const ModelParams emb = init_params(testing::tiny_config(), 1);
  const ModelParams pair = init_params(BenchConfig{}.pair_model, 1);
  bool counts_ok = true;
  std::string counts;
  for (int n : {16, 64, 100}) {
    const auto eb = make_embedding_backend(emb);
    compute_cm(random_bundle(n, emb.config.piece_size, ProblemType::kType2, n), *eb);
    const auto pb = make_pair_backend(pair);
    compute_cm(random_bundle(n, pair.config.piece_size, ProblemType::kType2, n), *pb);
    counts_ok = counts_ok && eb->network_passes() == 8ull * n &&
                pb->network_passes() == 16ull * n * (n - 1);
    counts += fmt("N=%d %llu/%llu ", n, static_cast<unsigned long long>(eb->network_passes()),
                  static_cast<unsigned long long>(pb->network_passes()));
  }
  BenchConfig cfg;
  cfg.sizes = {400, 800};
  cfg.repeat = 1;
  const auto records = run_bench(cfg, [](const BenchRecord& r) {
    std::fprintf(stderr, "  bench %s N=%d %.2fs\n", r.backend.c_str(), r.n, *r.wall_secs);
  });
  double s_emb = 0, s_e2e = 0;
  for (const auto& [name, slope] : fit_slopes(records, 400))
    (name == "edge2vec" ? s_emb : s_e2e) = slope;
  const bool ok = counts_ok && s_emb < 1.4 && s_e2e > 1.7;
  return {ok, counts + fmt("slopes edge2vec %.2f, e2e_proxy %.2f", s_emb, s_e2e)};
}

// ---------------------------------------------------------------- 4

Outcome hbt_oracle() {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  int mismatches = 0, below = 0, collisions = 0, empty_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int batch = 2 + static_cast<int>(rng() % 15);
    const int d = 1 + static_cast<int>(rng() % 6);
    BatchEmbeddings z{Eigen::MatrixXd(d, batch), Eigen::MatrixXd(d, batch),
                      Eigen::MatrixXd(d, batch)};
    for (auto* m : {&z.anchor, &z.positive, &z.negative})
      for (int k = 0; k < m->size(); ++k) m->data()[k] = normal(rng);
    // A small id space forces collisions; a sample's own negative never
    // repeats its own positive edge.
    const std::uint64_t space = 2 + rng() % (2 * batch);
    EdgeIds ids;
    for (int b = 0; b < batch; ++b) {
      ids.positive.push_back(rng() % space);
      std::uint64_t n;
      do n = rng() % (space + 2);
      while (n == ids.positive[b]);
      ids.negative.push_back(n);
    }
    // Exhaustive search over the 2B-1 pool.
    std::vector<Candidate> expected(batch);
    for (int b = 0; b < batch; ++b) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < batch; ++c)
        for (bool from_pos : {true, false}) {
          if (from_pos && c == b) continue;
          if ((from_pos ? ids.positive[c] : ids.negative[c]) == ids.positive[b]) {
            ++collisions;
            continue;
          }
          const double dist =
              (z.anchor.col(b) - (from_pos ? z.positive : z.negative).col(c)).norm();
          if (dist < best) {
            best = dist;
            expected[b] = {c, from_pos};
          }
        }
    }
    const bool any_empty = std::any_of(expected.begin(), expected.end(),
                                       [](const Candidate& c) { return c.index < 0; });
    if (any_empty) {
      try {
        hbt_select(z, ids);
        ++mismatches;
      } catch (const DataError&) {
        ++empty_ok;
      }
      continue;
    }
    if (hbt_select(z, ids) != expected) ++mismatches;
    if (hbt_loss(z, ids, 1.0) < mean_triplet_loss(z, 1.0)) ++below;
  }
  return {mismatches == 0 && below == 0 && collisions > 0,
          fmt("1000 batches, %d selection mismatches, %d below plain loss, %d masked candidates",
              mismatches, below, collisions)};
}

// ---------------------------------------------------------------- 5

// Reduced network whose conv weights and biases are positive, so with
// non-negative inputs every ReLU is strictly active. The weights are large
// against the 1e-3 step, which keeps pooling argmax switches rare.
ModelParamsT<double> kink_free_params(const ModelConfig& cfg) {
  ModelParamsT<double> p = init_params(cfg, 5).cast<double>();
  const nn::NetworkLayout l = nn::network_layout(cfg);
  for (int layer = 0; layer < 4; ++layer) {
    for (std::size_t k = l.conv_weight[layer]; k < l.conv_bias[layer]; ++k)
      p.values[k] = 50.0 * std::abs(p.values[k]);
    const std::size_t end = layer < 3 ? l.conv_weight[layer + 1] : l.fc_weight[0];
    for (std::size_t k = l.conv_bias[layer]; k < end; ++k) p.values[k] = 0.05;
  }
  return p;
}

// Sparse impulse lattice with random amplitudes. Each 2x2 pooling window is
// dominated by the response to one impulse, so a small step cannot move a
// pooling argmax.
PieceGrid impulse_grid(int rows, int cols, int s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> amp(0.2f, 1.0f);
  PieceGrid g{rows, cols, {}};
  for (int k = 0; k < rows * cols; ++k) {
    Piece p(s);
    for (int y = 1; y < s; y += 4)
      for (int x = 1; x < s; x += 4)
        for (int c = 0; c < 3; ++c) p.at(y, x, c) = amp(rng);
    g.pieces.push_back(std::move(p));
  }
  return g;
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t params = 0;
  double loss = 0.0;
};

GradCheck check_gradient(ModelParamsT<double> params, const TripletBatch& batch,
                         const TrainConfig& cfg) {
  const BatchResult<double> r = evaluate_batch(params, batch, cfg);
  GradCheck out;
  out.params = params.values.size();
  out.loss = r.loss.total;
  const double h = 1e-3;
  // Parameters with an exactly zero gradient only see round-off, so the
  // relative error is floored at 1e-6 of the largest gradient component.
  double floor = 1e-12;
  for (double v : r.grad) floor = std::max(floor, 1e-6 * std::abs(v));
  for (std::size_t k = 0; k < params.values.size(); ++k) {
    const double saved = params.values[k];
    params.values[k] = saved + h;
    const double up = evaluate_batch(params, batch, cfg, false).loss.total;
    params.values[k] = saved - h;
    const double down = evaluate_batch(params, batch, cfg, false).loss.total;
    params.values[k] = saved;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(r.grad[k]), floor});
    out.max_rel = std::max(out.max_rel, std::abs(fd - r.grad[k]) / scale);
  }
  return out;
}

Outcome gradient_correctness() {
  TrainConfig cfg;
  cfg.model = testing::tiny_config();
  cfg.batch_size = 4;
  Corpus corpus;
  for (int k = 0; k < 2; ++k)
    corpus.push_back({static_cast<std::uint32_t>(k), impulse_grid(3, 3, 28, 50 + k)});
  std::mt19937_64 rng(6);
  const TripletBatch active = sample_triplets(corpus, cfg, rng);
  // Anchor input equal to the positive input: D(a,p) = 0 < D(a,n), so with
  // zero margin every hinge is inactive.
  TripletBatch inactive = active;
  for (auto& s : inactive) s.anchor = s.positive;

  const ModelParamsT<double> params = kink_free_params(cfg.model);
  if (count_params(cfg.model) > 50000) return {false, "reduced network too large"};

  // A margin above every anchor-candidate distance keeps every hinge active.
  double max_dist = 0.0;
  {
    EdgeEmbedder e(params.cast<float>());
    std::vector<const Piece*> a, c;
    for (const auto& s : active) {
      a.push_back(&s.anchor);
      c.push_back(&s.positive);
      c.push_back(&s.negative);
    }
    const auto za = e.run(a), zc = e.run(c);
    for (const auto& x : za)
      for (const auto& y : zc) max_dist = std::max(max_dist, static_cast<double>((x - y).norm()));
  }

  std::string detail;
  bool ok = true;
  for (double lambda : {0.0, 1.0})
    for (bool hinge_active : {true, false}) {
      TrainConfig c = cfg;
      c.lambda = lambda;
      c.margin = hinge_active ? max_dist + 1.0 : 0.0;
      const GradCheck g = check_gradient(params, hinge_active ? active : inactive, c);
      ok = ok && g.max_rel <= 1e-3;
      detail += fmt("[lambda=%g %s: max rel %.2e] ", lambda, hinge_active ? "active" : "inactive",
                    g.max_rel);
    }
  return {ok, detail + fmt("%lld params", static_cast<long long>(count_params(cfg.model)))};
}

// ---------------------------------------------------------------- 6

Outcome loss_values() {
  auto vec = [](std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<int>(v.size()));
    int k = 0;
    for (double x : v) out(k++) = x;
    return out;
  };
  auto reg_of = [](double value) {
    BatchEmbeddings z{Eigen::MatrixXd::Constant(4, 3, value), Eigen::MatrixXd::Constant(4, 3, value),
                      Eigen::MatrixXd::Constant(4, 3, value)};
    return l2_reg(z);
  };
  const double r0 = reg_of(0.0), r1 = reg_of(1.0), r3 = reg_of(std::sqrt(3.0));
  const double t0 = triplet_loss(vec({0, 0}), vec({0, 0}), vec({3, 4}), 1.0);
  const double t1 = triplet_loss(vec({0, 0}), vec({1, 0}), vec({0, 0.2}), 1.0);
  const double t2 = triplet_loss(vec({1, 2}), vec({3, 1}), vec({3, 1}), 0.7);
  const bool ok = std::abs(r0) <= 1e-12 && std::abs(r1 - 1.0) <= 1e-12 &&
                  std::abs(r3 - std::sqrt(3.0)) <= 1e-12 && std::abs(t0) <= 1e-12 &&
                  std::abs(t1 - 1.8) <= 1e-12 && std::abs(t2 - 0.7) <= 1e-12;
  return {ok, fmt("l2 {%.15g, %.15g, %.15g}, triplet {%.15g, %.15g, %.15g}", r0, r1, r3, t0, t1, t2)};
}

// ---------------------------------------------------------------- 7

// First finite argmin of a row in (j, rj) order.
int row_argmin(const CMTensor& t, int i, int ri) {
  int best = -1;
  float v = 0.0f;
  for (int j = 0; j < t.n; ++j)
    for (int rj = 0; rj < 4; ++rj) {
      if (!t.populated(i, ri, j, rj)) continue;
      const float s = t.at(i, ri, j, rj);
      if (best < 0 || s < v) {
        best = j * 4 + rj;
        v = s;
      }
    }
  return best;
}

Outcome postprocess_algebra() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  int bad_range = 0, bad_mirror = 0, bad_argmin = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 6);
    const ProblemType type = rng() % 2 ? ProblemType::kType2 : ProblemType::kType1;
    CMTensor t(n, type);
    for (int i = 0; i < n; ++i)
      for (int ri = 0; ri < 4; ++ri)
        for (int j = 0; j < n; ++j)
          for (int rj = 0; rj < 4; ++rj)
            if (t.populated(i, ri, j, rj)) t.at(i, ri, j, rj) = u(rng) * 5.0f;
    const CMTensor s = minmax_scale(t);
    const CMTensor sym = symmetrize(s);
    const CMTensor g = gallagher_rescale(t);
    for (int i = 0; i < n; ++i)
      for (int ri = 0; ri < 4; ++ri) {
        float lo = CMTensor::kSentinel, hi = -CMTensor::kSentinel;
        for (int j = 0; j < n; ++j)
          for (int rj = 0; rj < 4; ++rj) {
            if (!t.populated(i, ri, j, rj)) continue;
            lo = std::min(lo, s.at(i, ri, j, rj));
            hi = std::max(hi, s.at(i, ri, j, rj));
            if (sym.at(i, ri, j, rj) != sym.at(j, mod4(rj + 2), i, mod4(ri + 2))) ++bad_mirror;
          }
        if (lo != 0.0f || hi != 1.0f) ++bad_range;
        const int a = row_argmin(t, i, ri);
        if (row_argmin(s, i, ri) != a || row_argmin(g, i, ri) != a) ++bad_argmin;
      }
  }
  return {bad_range == 0 && bad_mirror == 0 && bad_argmin == 0,
          fmt("1000 tensors: %d rows off [0,1], %d mirror mismatches, %d argmin changes", bad_range,
              bad_mirror, bad_argmin)};
}

// ---------------------------------------------------------------- 8

Outcome flip_equivalence() {
  ModelConfig cfg;
  cfg.conv_channels = {4, 8, 8, 16};
  cfg.embedding_dim = 16;
  cfg.groups = 4;
  std::mt19937_64 rng(8);
  int mismatched = 0, flips_bad = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const ModelParams params = init_params(cfg, 100 + trial);
    std::vector<Piece> pieces;
    for (int k = 0; k < 5; ++k) pieces.push_back(testing::random_piece(28, rng));
    EdgeEmbedder e(params);
    const auto sets = e.embed_all(pieces);
    std::vector<Piece> pre_flipped;
    for (const Piece& p : pieces)
      for (int r = 0; r < 4; ++r) pre_flipped.push_back(hflip(rotate(p, r)));
    const auto direct = forward(params, pre_flipped);
    for (std::size_t k = 0; k < pieces.size(); ++k)
      for (int r = 0; r < 4; ++r)
        if (sets[k].left_role[r] != direct[k * 4 + r]) ++mismatched;
    for (const Piece& p : pieces)
      if (hflip(hflip(p)) != p || hflip(p) == p) ++flips_bad;
  }
  const PuzzleBundle b =
      scramble(testing::edge_matched_grid(8, 8, 9), ProblemType::kType1, 10, "edge_matched");
  const auto backend = make_embedding_backend(testing::identity_head_params());
  const double top1 = top1_accuracy(compute_cm(b, *backend), b);
  return {mismatched == 0 && flips_bad == 0 && top1 == 1.0,
          fmt("%d left-role mismatches, %d involution failures, identity-head Type-1 Top-1 %.4f",
              mismatched, flips_bad, top1)};
}

// ---------------------------------------------------------------- 9

Outcome metric_oracles() {
  const auto oracle = make_oracle_backend();
  double oracle_top1 = 1.0;
  for (ProblemType type : {ProblemType::kType1, ProblemType::kType2}) {
    const PuzzleBundle b = random_bundle(100, 4, type, 9);
    oracle_top1 = std::min(oracle_top1, top1_accuracy(compute_cm(b, *oracle), b));
  }

  // Uniform random tensors, Type-1, N = 100.
  const PuzzleBundle b = random_bundle(100, 4, ProblemType::kType1, 11);
  std::vector<double> values;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int seed = 0; seed < 1000; ++seed) {
    CMTensor t(100, ProblemType::kType1);
    for (int i = 0; i < 100; ++i)
      for (int r = 0; r < 4; ++r)
        for (int j = 0; j < 100; ++j)
          if (j != i) t.at(i, r, j, r) = u(rng);
    values.push_back(top1_accuracy(t, b));
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (values.size() - 1)) / std::sqrt(double(values.size()));
  const double chance = 1.0 / 99.0;
  const bool random_ok = std::abs(mean - chance) <= 3.0 * se;

  int solved = 0, grids = 0;
  std::string failures;
  for (ProblemType type : {ProblemType::kType1, ProblemType::kType2})
    for (int rows = 1; rows <= 10; ++rows)
      for (int cols = 1; cols <= 10; ++cols) {
        if (rows * cols < 2) continue;
        ++grids;
        const PuzzleBundle pb =
            scramble(testing::random_grid(rows, cols, 4, rows * 100 + cols), type, rows + 7 * cols);
        const Placement pl = greedy_solve(compute_cm(pb, *oracle), rows, cols);
        if (perfect_reconstruction(pl, pb))
          ++solved;
        else
          failures += fmt(" %dx%d/%s", rows, cols, to_string(type));
      }
  return {oracle_top1 == 1.0 && random_ok && solved == grids,
          fmt("oracle Top-1 %.3f; random Top-1 %.5f vs 1/99 = %.5f (SE %.5f); greedy perfect %d/%d",
              oracle_top1, mean, chance, se, solved, grids) +
              failures};
}

// ---------------------------------------------------------------- 10, 11

struct LearningSetup {
  Corpus corpus;
  PieceGrid validation;
  PuzzleBundle val_bundle;
  TrainConfig cfg;
};

LearningSetup learning_setup() {
  LearningSetup s;
  SynthOptions opt;  // 420 x 560
  std::vector<Image> train_images;
  for (int k = 0; k < 10; ++k) train_images.push_back(synth_image(opt, 1000 + k));
  s.corpus = make_corpus(train_images, 28, 1);
  const std::vector<Image> val_image{synth_image(opt, 2000)};
  s.validation = make_corpus(val_image, 28, 1, 100)[0].grid;
  s.val_bundle = scramble(s.validation, ProblemType::kType1, 2001, "validation");

  s.cfg.model.conv_channels = {8, 16, 32, 64};
  s.cfg.model.embedding_dim = 160;
  s.cfg.model.groups = 8;
  s.cfg.batch_size = 128;
  s.cfg.epochs = 30;
  s.cfg.iterations_per_epoch = 200;
  s.cfg.seed = 17;
  return s;
}

class LearningRuns {
 public:
  const LearningSetup& setup() {
    if (!setup_) setup_ = learning_setup();
    return *setup_;
  }

  const ModelParams& model(double lambda) {
    auto it = models_.find(lambda);
    if (it != models_.end()) return it->second;
    TrainConfig cfg = setup().cfg;
    cfg.lambda = lambda;
    const std::vector<PieceGrid> val{setup().validation};
    std::fprintf(stderr, "  training lambda=%g on %zu pieces\n", lambda, pieces());
    TrainResult r = train(setup().corpus, val, cfg, std::nullopt, [](const EpochRecord& rec) {
      std::fprintf(stderr, "  %s\n", to_jsonl(rec).c_str());
    });
    return models_.emplace(lambda, std::move(r.params)).first->second;
  }

 private:
  std::size_t pieces() const {
    std::size_t n = 0;
    for (const auto& img : setup_->corpus) n += img.grid.pieces.size();
    return n;
  }

  std::optional<LearningSetup> setup_;
  std::map<double, ModelParams> models_;
};

Outcome learning_signal(LearningRuns& runs) {
  const LearningSetup& s = runs.setup();
  const PuzzleBundle& b = s.val_bundle;
  const double chance = 1.0 / (b.num_pieces() - 1);
  const double init = embedding_top1(init_params(s.cfg.model, s.cfg.seed), b);
  const double trained = embedding_top1(runs.model(1.0), b);
  const double ssd = top1_accuracy(compute_cm(b, *make_classical_backend("ssd")), b);
  const bool ok = trained >= 3.0 * init && trained >= 10.0 * chance && ssd <= 2.0 * chance;
  return {ok, fmt("trained %.4f, random init %.4f, chance %.4f, SSD %.4f (N=%d)", trained, init,
                  chance, ssd, b.num_pieces())};
}

Outcome regularization_direction(LearningRuns& runs) {
  const PuzzleBundle& b = runs.setup().val_bundle;
  const std::vector<double> fractions{0.2};
  auto retention = [&](double lambda) {
    EdgeEmbedder e(runs.model(lambda));
    const auto sets = e.embed_all(b.pieces);
    return mask_and_remeasure(sets, b, fractions)[0];
  };
  const MaskingPoint with = retention(1.0), without = retention(0.0);
  return {with.retention >= without.retention,
          fmt("retention at 20%% masking: lambda=1 %.4f (Top-1 %.4f), lambda=0 %.4f (Top-1 %.4f)",
              with.retention, with.top1, without.retention, without.top1)};
}

// ---------------------------------------------------------------- 12

Outcome format_round_trips() {
  testing::TempDir dir("acceptance_formats");
  std::mt19937_64 rng(12);
  int failures = 0, trials = 0;
  for (int trial = 0; trial < 20; ++trial) {
    ++trials;
    const int rows = 1 + static_cast<int>(rng() % 4), cols = 2 + static_cast<int>(rng() % 4);
    const int s = 4 * (1 + static_cast<int>(rng() % 3));
    PieceGrid g{rows, cols, {}};
    for (int k = 0; k < rows * cols; ++k) g.pieces.push_back(testing::random_piece_8bit(s, rng));
    const ProblemType type = trial % 2 ? ProblemType::kType2 : ProblemType::kType1;
    PuzzleBundle b = scramble(g, type, rng(), fmt("trial_%d", trial));
    if (trial % 3 == 0) {
      b.erosion_width = 1;
      for (auto& p : b.pieces) p = erode_piece(p, 1);
    }
    const auto bdir = dir.path() / fmt("bundle_%d", trial);
    save_bundle(b, bdir);
    if (!(load_bundle(bdir) == b)) ++failures;

    CMTensor t(rows * cols, type);
    for (float& v : t.scores)
      if (rng() % 5) v = std::uniform_real_distribution<float>(-3.0f, 3.0f)(rng);
    save_cm(t, dir.path() / "t.cmt");
    const CMTensor back = load_cm(dir.path() / "t.cmt");
    if (back.n != t.n || back.type != t.type ||
        std::memcmp(back.scores.data(), t.scores.data(), t.scores.size() * sizeof(float)) != 0)
      ++failures;

    Placement pl(rows, cols);
    std::vector<int> order(rows * cols);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < rows * cols; ++k)
      if (rng() % 6) pl.cells[k] = Pose{order[k], static_cast<int>(rng() % 4)};
    save_placement(pl, dir.path() / "p.json");
    if (!(load_placement(dir.path() / "p.json") == pl)) ++failures;

    ModelConfig mc;
    mc.piece_size = s;
    mc.conv_channels = {2, 3, 4, 4};
    mc.embedding_dim = 4;
    mc.groups = 2;
    mc.twin_mode = trial % 4 == 1;
    mc.pair_input = trial % 4 == 2;
    ModelParams mp = init_params(mc, rng());
    for (float& v : mp.values) v = std::normal_distribution<float>(0.0f, 10.0f)(rng);
    save_checkpoint(mp, dir.path() / "ckpt");
    const ModelParams mback = load_checkpoint(dir.path() / "ckpt");
    if (!(mback.config == mp.config) ||
        std::memcmp(mback.values.data(), mp.values.data(), mp.values.size() * sizeof(float)) != 0)
      ++failures;
  }
  return {failures == 0, fmt("%d trials x 4 formats, %d mismatches", trials, failures)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_secs;  // 0: none
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace jigcm

int main(int argc, char** argv) {
  using namespace jigcm;
  CLI::App app{"jigcm acceptance suite"};
  std::vector<int> selected;
  app.add_option("--criteria", selected, "Criterion ids (default all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  LearningRuns runs;
  const std::vector<Criterion> criteria = {
      {1, "parameter accounting", 1, parameter_accounting},
      {2, "MAC accounting", 1, mac_accounting},
      {3, "scaling law", 600, scaling_law},
      {4, "HBT oracle equivalence", 60, hbt_oracle},
      {5, "gradient correctness", 300, gradient_correctness},
      {6, "loss unit values", 0, loss_values},
      {7, "post-processing algebra", 60, postprocess_algebra},
      {8, "flip equivalence", 60, flip_equivalence},
      {9, "metric oracles", 300, metric_oracles},
      {10, "desk-scale learning signal", 7200, [&] { return learning_signal(runs); }},
      {11, "regularization direction", 0, [&] { return regularization_direction(runs); }},
      {12, "format round-trips", 0, format_round_trips},
  };
  if (selected.empty())
    for (const auto& c : criteria) selected.push_back(c.id);

  int failed = 0;
  for (int id : selected) {
    const auto it = std::find_if(criteria.begin(), criteria.end(),
                                 [&](const Criterion& c) { return c.id == id; });
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass;
    if (it->limit_secs > 0 && secs > it->limit_secs) {
      pass = false;
      o.detail += fmt(" (over the %.0f s limit)", it->limit_secs);
    }
    if (!pass) ++failed;
    std::printf("[%s] criterion %d: %s - %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, it->name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
