#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jigcm/embed_net.hpp"
#include "jigcm/puzzle_io.hpp"

namespace jigcm {

struct TrainConfig {
  ModelConfig model;
  double margin = 1.0;  // gamma
  double lambda = 1.0;  // weight of the embedding L2 term
  int batch_size = 1024;
  double learning_rate = 1e-4;
  double decay_factor = 0.9;
  int patience = 5;  // non-improving epochs before decay
  int iterations_per_epoch = 5000;
  int epochs = 1;
  double intra_fraction = 0.5;
  bool hbt_enabled = true;
  std::uint64_t seed = 0;
  int workers = 1;

  // Throws UsageError on out-of-range fields.
  void validate() const;
};

// A cut training image. Pieces are in ground-truth order (already eroded if
// erosion is wanted).
struct CorpusImage {
  std::uint32_t image_id = 0;
  PieceGrid grid;
};

using Corpus = std::vector<CorpusImage>;

// Globally unique edge identity: a physical side of a piece in one image,
// tagged with the role it is seen in.
std::uint64_t edge_id(std::uint32_t image, int cell, int side, Role role);

struct TripletSample {
  Piece anchor;    // network input for the anchor (flipped unless twin mode)
  Piece positive;  // right-role input of the true right neighbor
  Piece negative;  // right-role input of another edge of the same image
  std::uint32_t image_id = 0;
  std::uint64_t anchor_edge_id = 0;
  std::uint64_t positive_edge_id = 0;
  std::uint64_t negative_edge_id = 0;
};

using TripletBatch = std::vector<TripletSample>;

// round(intra_fraction * B) samples from one random image, the rest one per
// distinct image (cycling through reshuffled images when B exceeds the
// corpus). Each anchor/positive pair is a true horizontal adjacency under a
// uniformly random whole-image rotation.
TripletBatch sample_triplets(const Corpus& corpus, const TrainConfig& cfg, std::mt19937_64& rng);

// Columns are samples: [d, B] each.
struct BatchEmbeddings {
  Eigen::MatrixXd anchor;
  Eigen::MatrixXd positive;
  Eigen::MatrixXd negative;

  int batch() const { return static_cast<int>(anchor.cols()); }
};

struct EdgeIds {
  std::vector<std::uint64_t> positive;
  std::vector<std::uint64_t> negative;
};

EdgeIds edge_ids(const TripletBatch& batch);

double triplet_loss(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& p,
                    const Eigen::Ref<const Eigen::VectorXd>& n, double margin);

// Mean plain triplet loss with each sample's own negative.
double mean_triplet_loss(const BatchEmbeddings& z, double margin);

// A selected candidate: a batch column of the positives or of the negatives.
struct Candidate {
  int index = -1;
  bool from_positives = false;
  bool operator==(const Candidate&) const = default;
};

// Hardest admissible negative per anchor, scanning candidates in batch order
// with the positive before the negative at each index. The pool excludes the
// anchor's own positive and every candidate whose edge id equals it. Throws
// DataError if a pool is empty.
std::vector<Candidate> hbt_select(const BatchEmbeddings& z, const EdgeIds& ids);

// Mean hinge loss against the selected negatives; with `hbt` false every
// anchor uses its own negative.
double hbt_loss(const BatchEmbeddings& z, const EdgeIds& ids, double margin, bool hbt = true);

// sqrt of the mean squared component over anchors, positives and the
// original negatives.
double l2_reg(const BatchEmbeddings& z);

struct LossTerms {
  double hbt = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

LossTerms total_loss(const BatchEmbeddings& z, const EdgeIds& ids, const TrainConfig& cfg);

// Loss terms and d(total)/d(embeddings), selection and hinge frozen.
struct EmbeddingGradient {
  LossTerms loss;
  BatchEmbeddings grad;
};

EmbeddingGradient loss_gradient(const BatchEmbeddings& z, const EdgeIds& ids,
                                const TrainConfig& cfg);

// Network forward + loss + backward over one batch. `grad` has one entry
// per parameter; empty when `with_grad` is false.
template <typename T>
struct BatchResult {
  LossTerms loss;
  std::vector<T> grad;
};

template <typename T>
BatchResult<T> evaluate_batch(const ModelParamsT<T>& params, const TripletBatch& batch,
                              const TrainConfig& cfg, bool with_grad = true);

class Adam {
 public:
  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<float>& params, const std::vector<float>& grad, double lr);
  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

// Multiplies the rate by `factor` after `patience` consecutive epochs without
// a strict decrease of the epoch-mean loss.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, double factor, int patience)
      : lr_(lr), factor_(factor), patience_(patience) {}
  double lr() const { return lr_; }
  // Returns true when the rate was decayed.
  bool update(double epoch_loss);

 private:
  double lr_, factor_;
  int patience_;
  int stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t iterations = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_top1_type1;
  std::optional<double> val_top1_type2;
  double wall_secs = 0.0;
};

std::string to_jsonl(const EpochRecord& r);

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
};

// Runs cfg.epochs epochs of Adam on total_loss, starting from
// `init` (or a fresh seeded initialization). Validation grids are scrambled
// once per problem type and scored after every epoch. Throws NumericalError
// on a non-finite loss.
TrainResult train(const Corpus& corpus, std::span<const PieceGrid> validation,
                  const TrainConfig& cfg, std::optional<ModelParams> init = std::nullopt,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Top-1 of a model on a bundle through the embedding CM.
double embedding_top1(const ModelParams& params, const PuzzleBundle& bundle, int workers = 1);

// Pair-network training with logistic loss on adjacent (label 1, score low)
// vs random (label 0) pairs, for the e2e_proxy baseline. Returns params.
ModelParams train_pair_proxy(const Corpus& corpus, const ModelConfig& model, int steps,
                             int batch_size, double lr, std::uint64_t seed);

}  // namespace jigcm
