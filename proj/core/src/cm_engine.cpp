#include "jigcm/cm_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "jigcm/classical_cm.hpp"
#include "jigcm/errors.hpp"
#include "jigcm/parallel.hpp"

namespace jigcm {
namespace {

std::vector<std::array<Piece, 4>> all_rotations(std::span<const Piece> pieces) {
  std::vector<std::array<Piece, 4>> rot(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i)
    for (int r = 0; r < 4; ++r) rot[i][r] = rotate(pieces[i], r);
  return rot;
}

class ClassicalBackend final : public CmBackend {
 public:
  explicit ClassicalBackend(std::string name)
      : name_(std::move(name)), measure_(classical_measure_from_name(name_)) {}

  std::string name() const override { return name_; }

  void fill(const PuzzleBundle& b, CMTensor& out, int workers) const override {
    const auto rot = all_rotations(b.pieces);
    parallel_for(out.n, workers, [&](int begin, int end) {
      for (int i = begin; i < end; ++i)
        for (int ri = 0; ri < 4; ++ri)
          for (int j = 0; j < out.n; ++j)
            for (int rj = 0; rj < 4; ++rj)
              if (out.populated(i, ri, j, rj))
                out.at(i, ri, j, rj) =
                    static_cast<float>(classical_score(measure_, rot[i][ri], rot[j][rj]));
    });
  }

 private:
  std::string name_;
  ClassicalMeasure measure_;
};

class EmbeddingBackend final : public CmBackend {
 public:
  explicit EmbeddingBackend(ModelParams params) : embedder_(std::move(params)) {
    if (embedder_.config().pair_input)
      throw UsageError("edge2vec backend needs an embedding checkpoint, got a pair network");
  }

  std::string name() const override { return "edge2vec"; }

  void fill(const PuzzleBundle& b, CMTensor& out, int workers) const override {
    if (b.piece_size != embedder_.config().piece_size)
      throw DataError("bundle piece size does not match the checkpoint");
    std::vector<EdgeEmbeddingSet> emb(b.pieces.size());
    parallel_for(static_cast<int>(b.pieces.size()), workers, [&](int begin, int end) {
      auto part = embedder_.embed_all(std::span<const Piece>(b.pieces).subspan(begin, end - begin));
      std::move(part.begin(), part.end(), emb.begin() + begin);
    });
    out = cm_from_embeddings(emb, out.type, workers);
  }

  std::uint64_t network_passes() const override { return embedder_.forward_passes(); }

 private:
  EdgeEmbedder embedder_;
};

class PairBackend final : public CmBackend {
 public:
  explicit PairBackend(ModelParams params) : embedder_(std::move(params)) {
    if (!embedder_.config().pair_input)
      throw UsageError("e2e_proxy backend needs a pair-input checkpoint");
  }

  std::string name() const override { return "e2e_proxy"; }

  void fill(const PuzzleBundle& b, CMTensor& out, int workers) const override {
    if (b.piece_size != embedder_.config().piece_size)
      throw DataError("bundle piece size does not match the checkpoint");
    const auto rot = all_rotations(b.pieces);
    parallel_for(out.n, workers, [&](int begin, int end) {
      std::vector<const Piece*> left, right;
      std::vector<std::size_t> slots;
      for (int i = begin; i < end; ++i)
        for (int ri = 0; ri < 4; ++ri) {
          left.clear();
          right.clear();
          slots.clear();
          for (int j = 0; j < out.n; ++j)
            for (int rj = 0; rj < 4; ++rj)
              if (out.populated(i, ri, j, rj)) {
                left.push_back(&rot[i][ri]);
                right.push_back(&rot[j][rj]);
                slots.push_back(out.index(i, ri, j, rj));
              }
          if (slots.empty()) continue;
          const auto scores = embedder_.score_pairs(left, right);
          for (std::size_t k = 0; k < slots.size(); ++k) out.scores[slots[k]] = scores[k];
        }
    });
  }

  std::uint64_t network_passes() const override { return embedder_.forward_passes(); }

 private:
  EdgeEmbedder embedder_;
};

class OracleBackend final : public CmBackend {
 public:
  std::string name() const override { return "oracle"; }

  void fill(const PuzzleBundle& b, CMTensor& out, int) const override {
    const std::vector<int> owner = cell_to_piece(b);
    for (int i = 0; i < out.n; ++i)
      for (int ri = 0; ri < 4; ++ri) {
        const auto truth = true_right_neighbor(b, owner, i, ri);
        for (int j = 0; j < out.n; ++j)
          for (int rj = 0; rj < 4; ++rj)
            if (out.populated(i, ri, j, rj))
              out.at(i, ri, j, rj) = (truth && truth->piece == j && truth->rotation == rj) ? 0.0f : 1.0f;
      }
  }
};

// Finite entries of one anchor row, in (j, rj) order.
template <typename Fn>
void for_row(const CMTensor& t, int i, int ri, Fn&& fn) {
  for (int j = 0; j < t.n; ++j)
    for (int rj = 0; rj < 4; ++rj) {
      const std::size_t k = t.index(i, ri, j, rj);
      if (std::isfinite(t.scores[k])) fn(j, rj, k);
    }
}

std::string row_name(int i, int ri) {
  return "row (" + std::to_string(i) + ", " + std::to_string(ri) + ")";
}

}  // namespace

std::unique_ptr<CmBackend> make_classical_backend(const std::string& name) {
  return std::make_unique<ClassicalBackend>(name);
}
std::unique_ptr<CmBackend> make_embedding_backend(ModelParams params) {
  return std::make_unique<EmbeddingBackend>(std::move(params));
}
std::unique_ptr<CmBackend> make_pair_backend(ModelParams params) {
  return std::make_unique<PairBackend>(std::move(params));
}
std::unique_ptr<CmBackend> make_oracle_backend() { return std::make_unique<OracleBackend>(); }

std::unique_ptr<CmBackend> make_backend(const std::string& name, std::optional<ModelParams> params) {
  if (name == "ssd" || name == "l1" || name == "pbc" || name == "mgc")
    return make_classical_backend(name);
  if (name == "oracle") return make_oracle_backend();
  if (name == "edge2vec" || name == "e2e_proxy") {
    if (!params) throw UsageError("backend '" + name + "' needs a checkpoint");
    return name == "edge2vec" ? make_embedding_backend(std::move(*params))
                              : make_pair_backend(std::move(*params));
  }
  throw UsageError("unknown backend '" + name + "'");
}

CMTensor compute_cm(const PuzzleBundle& bundle, const CmBackend& backend, int workers) {
  validate_bundle(bundle);
  CMTensor t(bundle.num_pieces(), bundle.problem_type);
  backend.fill(bundle, t, workers);
  return t;
}

CMTensor cm_from_embeddings(std::span<const EdgeEmbeddingSet> emb, ProblemType type, int workers) {
  CMTensor t(static_cast<int>(emb.size()), type);
  parallel_for(t.n, workers, [&](int begin, int end) {
    for (int i = begin; i < end; ++i)
      for (int ri = 0; ri < 4; ++ri) {
        const Embedding& a = emb[i].left_role[ri];
        for (int j = 0; j < t.n; ++j)
          for (int rj = 0; rj < 4; ++rj)
            if (t.populated(i, ri, j, rj))
              t.at(i, ri, j, rj) = std::sqrt((a - emb[j].right_role[rj]).squaredNorm());
      }
  });
  return t;
}

CMTensor minmax_scale(const CMTensor& t, std::vector<std::string>* warnings) {
  CMTensor out = t;
  for (int i = 0; i < t.n; ++i)
    for (int ri = 0; ri < 4; ++ri) {
      double lo = INFINITY, hi = -INFINITY;
      std::size_t count = 0;
      for_row(t, i, ri, [&](int, int, std::size_t k) {
        lo = std::min<double>(lo, t.scores[k]);
        hi = std::max<double>(hi, t.scores[k]);
        ++count;
      });
      if (count == 0) continue;
      if (hi > lo) {
        for_row(t, i, ri, [&](int, int, std::size_t k) {
          out.scores[k] = static_cast<float>((t.scores[k] - lo) / (hi - lo));
        });
      } else {
        for_row(t, i, ri, [&](int, int, std::size_t k) { out.scores[k] = 0.0f; });
        if (warnings) warnings->push_back(row_name(i, ri) + " is constant; scaled to 0");
      }
    }
  return out;
}

CMTensor symmetrize(const CMTensor& t) {
  CMTensor out = t;
  for (int i = 0; i < t.n; ++i)
    for (int ri = 0; ri < 4; ++ri)
      for (int j = 0; j < t.n; ++j)
        for (int rj = 0; rj < 4; ++rj) {
          const float a = t.at(i, ri, j, rj);
          if (!std::isfinite(a)) continue;
          const float b = t.at(j, mod4(rj + 2), i, mod4(ri + 2));
          out.at(i, ri, j, rj) = static_cast<float>((static_cast<double>(a) + b) / 2.0);
        }
  return out;
}

CMTensor gallagher_rescale(const CMTensor& t, std::vector<std::string>* warnings) {
  CMTensor out = t;
  std::vector<float> row;
  for (int i = 0; i < t.n; ++i)
    for (int ri = 0; ri < 4; ++ri) {
      row.clear();
      for_row(t, i, ri, [&](int, int, std::size_t k) { row.push_back(t.scores[k]); });
      if (row.empty()) continue;
      if (row.size() < 2) {
        if (warnings) warnings->push_back(row_name(i, ri) + " has a single candidate; left unscaled");
        continue;
      }
      std::partial_sort(row.begin(), row.begin() + 2, row.end());
      double second = row[1];
      if (second <= 0.0) {
        if (warnings) warnings->push_back(row_name(i, ri) + " has a non-positive runner-up; using 1e-12");
        second = 1e-12;
      }
      for_row(t, i, ri, [&](int, int, std::size_t k) {
        out.scores[k] = static_cast<float>(t.scores[k] / second);
      });
    }
  return out;
}

Postprocess postprocess_from_name(const std::string& name) {
  if (name == "none") return Postprocess::kNone;
  if (name == "scaled") return Postprocess::kScaled;
  if (name == "symmetric") return Postprocess::kSymmetric;
  if (name == "rescaled") return Postprocess::kRescaled;
  throw UsageError("unknown postprocess '" + name + "'");
}

CMTensor postprocess(const CMTensor& t, Postprocess stage, std::vector<std::string>* warnings) {
  if (stage == Postprocess::kNone) return t;
  CMTensor out = minmax_scale(t, warnings);
  if (stage == Postprocess::kScaled) return out;
  out = symmetrize(out);
  if (stage == Postprocess::kSymmetric) return out;
  return gallagher_rescale(out, warnings);
}

double top1_accuracy(const CMTensor& t, const PuzzleBundle& bundle) {
  if (t.n != bundle.num_pieces()) throw DataError("CM tensor and bundle disagree on N");
  const std::vector<int> owner = cell_to_piece(bundle);
  std::size_t hits = 0, total = 0;
  for (int i = 0; i < t.n; ++i)
    for (int ri = 0; ri < 4; ++ri) {
      const auto truth = true_right_neighbor(bundle, owner, i, ri);
      if (!truth) continue;
      ++total;
      float best = INFINITY;
      Pose arg;
      for (int j = 0; j < t.n; ++j)
        for (int rj = 0; rj < 4; ++rj) {
          if (!t.populated(i, ri, j, rj)) continue;
          const float v = t.at(i, ri, j, rj);
          if (arg.piece < 0 || v < best) {
            best = v;
            arg = {j, rj};
          }
        }
      if (arg == *truth) ++hits;
    }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<MaskingPoint> mask_and_remeasure(std::span<const EdgeEmbeddingSet> embeddings,
                                             const PuzzleBundle& bundle,
                                             std::span<const double> fractions) {
  for (double f : fractions)
    if (f < 0.0 || f > 0.5) throw UsageError("masking fraction must lie in [0, 0.5]");
  const double base = top1_accuracy(cm_from_embeddings(embeddings, bundle.problem_type), bundle);

  auto mask = [](Embedding& v, int k) {
    std::vector<int> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(v[a]) > std::abs(v[b]); });
    for (int m = 0; m < k; ++m) v[order[m]] = 0.0f;
  };

  std::vector<MaskingPoint> curve;
  for (double f : fractions) {
    std::vector<EdgeEmbeddingSet> masked(embeddings.begin(), embeddings.end());
    for (auto& set : masked)
      for (int r = 0; r < 4; ++r) {
        const int k = static_cast<int>(std::lround(f * set.right_role[r].size()));
        mask(set.right_role[r], k);
        mask(set.left_role[r], k);
      }
    MaskingPoint p;
    p.fraction = f;
    p.top1 = top1_accuracy(cm_from_embeddings(masked, bundle.problem_type), bundle);
    p.retention = base > 0.0 ? p.top1 / base : 1.0;
    curve.push_back(p);
  }
  return curve;
}

Image distance_map(const CMTensor& t, const PuzzleBundle& bundle) {
  if (t.n != bundle.num_pieces()) throw DataError("CM tensor and bundle disagree on N");
  const std::vector<int> owner = cell_to_piece(bundle);
  const int n = t.n;
  std::vector<double> v(static_cast<std::size_t>(n) * n, NAN);
  double lo = INFINITY, hi = -INFINITY;
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      const int i = owner[a];
      const int j = owner[c];
      const float s = t.at(i, mod4(-bundle.rotations[i]), j, mod4(-bundle.rotations[j]));
      if (!std::isfinite(s)) continue;
      const double x = -static_cast<double>(s);
      v[static_cast<std::size_t>(a) * n + c] = x;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  Image img(n, n, 1);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      const double x = v[static_cast<std::size_t>(a) * n + c];
      if (std::isnan(x)) continue;
      img.at(a, c, 0) = hi > lo ? static_cast<float>((x - lo) / (hi - lo)) : 0.5f;
    }
  return img;
}

void export_distance_map(const CMTensor& t, const PuzzleBundle& bundle,
                         const std::filesystem::path& path) {
  save_png(distance_map(t, bundle), path);
}

}  // namespace jigcm
