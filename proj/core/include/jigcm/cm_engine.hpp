#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jigcm/cm_tensor.hpp"
#include "jigcm/embed_net.hpp"
#include "jigcm/puzzle_io.hpp"

namespace jigcm {

// Produces dissimilarities for every populated pose of a bundle.
class CmBackend {
 public:
  virtual ~CmBackend() = default;
  virtual std::string name() const = 0;
  virtual void fill(const PuzzleBundle& bundle, CMTensor& out, int workers) const = 0;
  // Network forward passes performed so far (0 for non-network backends).
  virtual std::uint64_t network_passes() const { return 0; }
};

// "ssd", "l1", "pbc", "mgc".
std::unique_ptr<CmBackend> make_classical_backend(const std::string& name);

// Embedding distances; 8N forward passes per puzzle.
std::unique_ptr<CmBackend> make_embedding_backend(ModelParams params);

// Pair-input network ("e2e_proxy"); one forward pass per populated pose.
std::unique_ptr<CmBackend> make_pair_backend(ModelParams params);

// Ground-truth scores (0 for the true pose, 1 elsewhere). Test-only.
std::unique_ptr<CmBackend> make_oracle_backend();

// Dispatches on the backend name; network backends need `params`.
std::unique_ptr<CmBackend> make_backend(const std::string& name,
                                        std::optional<ModelParams> params = std::nullopt);

CMTensor compute_cm(const PuzzleBundle& bundle, const CmBackend& backend, int workers = 1);

// Euclidean distances between left-role(i, ri) and right-role(j, rj).
CMTensor cm_from_embeddings(std::span<const EdgeEmbeddingSet> embeddings, ProblemType type,
                            int workers = 1);

// Per anchor row (i, ri): (C - min) / (max - min). Constant rows become 0 and
// add a warning.
CMTensor minmax_scale(const CMTensor& t, std::vector<std::string>* warnings = nullptr);

// Averages each pose with its mirror (j at rj+180 deg, i at ri+180 deg on its right).
CMTensor symmetrize(const CMTensor& t);

// Per anchor row: C / second-smallest finite value.
CMTensor gallagher_rescale(const CMTensor& t, std::vector<std::string>* warnings = nullptr);

enum class Postprocess { kNone, kScaled, kSymmetric, kRescaled };
Postprocess postprocess_from_name(const std::string& name);

// Applies scale -> symmetrize -> rescale up to the requested stage.
CMTensor postprocess(const CMTensor& t, Postprocess stage,
                     std::vector<std::string>* warnings = nullptr);

// Fraction of edges with a ground-truth neighbor whose best candidate (first
// in (j, rj) order on ties) is that neighbor in the right pose.
double top1_accuracy(const CMTensor& t, const PuzzleBundle& bundle);

struct MaskingPoint {
  double fraction = 0.0;
  double top1 = 0.0;
  double retention = 0.0;  // top1 / unmasked top1
};

// Zeroes the round(f * d) largest-magnitude components of every embedding
// and re-measures Top-1. Fractions must lie in [0, 0.5].
std::vector<MaskingPoint> mask_and_remeasure(std::span<const EdgeEmbeddingSet> embeddings,
                                             const PuzzleBundle& bundle,
                                             std::span<const double> fractions);

// N x N grayscale map of -score for the true-orientation right pose, rows and
// columns in ground-truth order; brighter means more compatible.
Image distance_map(const CMTensor& t, const PuzzleBundle& bundle);
void export_distance_map(const CMTensor& t, const PuzzleBundle& bundle,
                         const std::filesystem::path& path);

}  // namespace jigcm
