#include "jigcm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "jigcm/cm_engine.hpp"
#include "jigcm/errors.hpp"
#include "jigcm/nn.hpp"

namespace jigcm {
namespace {

constexpr int kTrainChunk = 256;

// Unit offsets of the four board directions (right, down, left, up).
constexpr int kDy[4] = {0, 1, 0, -1};
constexpr int kDx[4] = {1, 0, -1, 0};

bool has_neighbor(const PieceGrid& g, int row, int col, int dir) {
  const int r = row + kDy[dir];
  const int c = col + kDx[dir];
  return r >= 0 && r < g.rows && c >= 0 && c < g.cols;
}

int adjacent_count(const PieceGrid& g, int dir) {
  return dir % 2 == 0 ? g.rows * (g.cols - 1) : (g.rows - 1) * g.cols;
}

void check_image(const CorpusImage& img) {
  const PieceGrid& g = img.grid;
  if (g.num_pieces() < 2 || static_cast<int>(g.pieces.size()) != g.num_pieces())
    throw DataError("corpus image " + std::to_string(img.image_id) + " has fewer than 2 pieces");
  if (adjacent_count(g, 0) + adjacent_count(g, 1) == 0)
    throw DataError("corpus image " + std::to_string(img.image_id) + " has no adjacent pair");
}

TripletSample draw_sample(const CorpusImage& img, bool twin, std::mt19937_64& rng) {
  const PieceGrid& g = img.grid;
  const int n = g.num_pieces();

  // Whole-image rotation r brings direction r of each piece to "right".
  std::vector<int> dirs;
  for (int d = 0; d < 4; ++d)
    if (adjacent_count(g, d) > 0) dirs.push_back(d);
  const int r = dirs[std::uniform_int_distribution<std::size_t>(0, dirs.size() - 1)(rng)];

  int row, col;
  do {
    row = std::uniform_int_distribution<int>(0, g.rows - 1)(rng);
    col = std::uniform_int_distribution<int>(0, g.cols - 1)(rng);
  } while (!has_neighbor(g, row, col, r));
  const int a = row * g.cols + col;
  const int b = (row + kDy[r]) * g.cols + (col + kDx[r]);

  // Negative: any right-role edge (k, r') with k != a and (k, r') != (b, r).
  const int options = 4 * (n - 1) - 1;
  int pick = std::uniform_int_distribution<int>(0, options - 1)(rng);
  int k = -1, rk = 0;
  for (int cell = 0; cell < n && k < 0; ++cell) {
    if (cell == a) continue;
    for (int q = 0; q < 4; ++q) {
      if (cell == b && q == r) continue;
      if (pick-- == 0) {
        k = cell;
        rk = q;
        break;
      }
    }
  }

  TripletSample s;
  const Piece anchor = rotate(g.pieces[a], r);
  s.anchor = twin ? anchor : hflip(anchor);
  s.positive = rotate(g.pieces[b], r);
  s.negative = rotate(g.pieces[k], rk);
  s.image_id = img.image_id;
  s.anchor_edge_id = edge_id(img.image_id, a, r, Role::kLeft);
  s.positive_edge_id = edge_id(img.image_id, b, mod4(r + 2), Role::kRight);
  s.negative_edge_id = edge_id(img.image_id, k, mod4(rk + 2), Role::kRight);
  return s;
}

// Gradient of D(x, y) w.r.t. x, zero at D = 0.
Eigen::VectorXd distance_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double d = (x - y).norm();
  if (d == 0.0) return Eigen::VectorXd::Zero(x.size());
  return (x - y) / d;
}

const Eigen::MatrixXd& pool(const BatchEmbeddings& z, const Candidate& c) {
  return c.from_positives ? z.positive : z.negative;
}

std::vector<Candidate> own_negatives(int batch) {
  std::vector<Candidate> sel(batch);
  for (int b = 0; b < batch; ++b) sel[b] = {b, false};
  return sel;
}

std::vector<const Piece*> role_inputs(const TripletBatch& batch, Piece TripletSample::*member) {
  std::vector<const Piece*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&(s.*member));
  return out;
}

// One network applied to one role of the batch, chunked so that reference-scale
// batches do not hold every activation at once.
template <typename T>
class RolePass {
 public:
  RolePass(const ModelConfig& cfg, const T* net, std::vector<const Piece*> inputs, bool keep)
      : cfg_(cfg), net_(net), inputs_(std::move(inputs)) {
    const int n = static_cast<int>(inputs_.size());
    keep_ = keep && n <= kTrainChunk;
    out_.resize(cfg.embedding_dim, n);
    for (int start = 0; start < n; start += kTrainChunk) {
      const int m = std::min(kTrainChunk, n - start);
      const auto chunk = std::span<const Piece* const>(inputs_).subspan(start, m);
      const nn::Matrix<T> x = nn::pack<T>(chunk);
      out_.middleCols(start, m) = nn::forward<T>(cfg, net, x, m, keep_ ? &trace_ : nullptr);
    }
  }

  const nn::Matrix<T>& output() const { return out_; }

  void backward(const nn::Matrix<T>& grad_out, T* grad) {
    const int n = static_cast<int>(inputs_.size());
    if (keep_) {
      nn::backward<T>(cfg_, net_, trace_, grad_out, grad);
      return;
    }
    for (int start = 0; start < n; start += kTrainChunk) {
      const int m = std::min(kTrainChunk, n - start);
      const auto chunk = std::span<const Piece* const>(inputs_).subspan(start, m);
      nn::Trace<T> trace;
      nn::forward<T>(cfg_, net_, nn::pack<T>(chunk), m, &trace);
      nn::backward<T>(cfg_, net_, trace, grad_out.middleCols(start, m), grad);
    }
  }

 private:
  const ModelConfig& cfg_;
  const T* net_;
  std::vector<const Piece*> inputs_;
  bool keep_ = false;
  nn::Matrix<T> out_;
  nn::Trace<T> trace_;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (model.pair_input) throw UsageError("triplet training needs an embedding model");
  if (!(margin >= 0.0)) throw UsageError("margin must be non-negative");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  if (batch_size < 1 || (hbt_enabled && batch_size < 2))
    throw UsageError("batch_size must be at least 2 with hbt enabled (1 otherwise)");
  if (!(learning_rate >= 0.0)) throw UsageError("learning_rate must be non-negative");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw UsageError("decay_factor must be in (0, 1]");
  if (patience < 1) throw UsageError("patience must be positive");
  if (iterations_per_epoch < 1) throw UsageError("iterations_per_epoch must be positive");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (!(intra_fraction >= 0.0 && intra_fraction <= 1.0))
    throw UsageError("intra_fraction must be in [0, 1]");
  if (workers < 1) throw UsageError("workers must be positive");
}

std::uint64_t edge_id(std::uint32_t image, int cell, int side, Role role) {
  return (static_cast<std::uint64_t>(image) << 32) | (static_cast<std::uint64_t>(cell) << 3) |
         (static_cast<std::uint64_t>(side) << 1) | (role == Role::kRight ? 1u : 0u);
}

TripletBatch sample_triplets(const Corpus& corpus, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (corpus.empty()) throw DataError("training corpus is empty");
  for (const auto& img : corpus) check_image(img);
  const int batch = cfg.batch_size;
  const int intra = static_cast<int>(std::llround(cfg.intra_fraction * batch));
  const bool twin = cfg.model.twin_mode;

  TripletBatch out;
  out.reserve(batch);
  std::uniform_int_distribution<std::size_t> pick_image(0, corpus.size() - 1);
  if (intra > 0) {
    const CorpusImage& img = corpus[pick_image(rng)];
    for (int k = 0; k < intra; ++k) out.push_back(draw_sample(img, twin, rng));
  }
  std::vector<std::size_t> order(corpus.size());
  std::size_t next = order.size();
  for (int k = intra; k < batch; ++k) {
    if (next == order.size()) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      next = 0;
    }
    out.push_back(draw_sample(corpus[order[next++]], twin, rng));
  }
  return out;
}

EdgeIds edge_ids(const TripletBatch& batch) {
  EdgeIds ids;
  for (const auto& s : batch) {
    ids.positive.push_back(s.positive_edge_id);
    ids.negative.push_back(s.negative_edge_id);
  }
  return ids;
}

double triplet_loss(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& p,
                    const Eigen::Ref<const Eigen::VectorXd>& n, double margin) {
  if (a.size() != p.size() || a.size() != n.size())
    throw UsageError("triplet embeddings differ in dimension");
  return std::max(0.0, (a - p).norm() - (a - n).norm() + margin);
}

double mean_triplet_loss(const BatchEmbeddings& z, double margin) {
  const int batch = z.batch();
  if (batch == 0) return 0.0;
  double sum = 0.0;
  for (int b = 0; b < batch; ++b)
    sum += triplet_loss(z.anchor.col(b), z.positive.col(b), z.negative.col(b), margin);
  return sum / batch;
}

std::vector<Candidate> hbt_select(const BatchEmbeddings& z, const EdgeIds& ids) {
  const int batch = z.batch();
  if (static_cast<int>(ids.positive.size()) != batch || static_cast<int>(ids.negative.size()) != batch)
    throw UsageError("edge ids do not match the batch size");
  std::vector<Candidate> sel(batch);
  for (int b = 0; b < batch; ++b) {
    const std::uint64_t own = ids.positive[b];
    double best = std::numeric_limits<double>::infinity();
    Candidate arg;
    auto consider = [&](int c, bool from_positives) {
      const std::uint64_t id = from_positives ? ids.positive[c] : ids.negative[c];
      if (id == own) return;
      const double d =
          (z.anchor.col(b) - (from_positives ? z.positive : z.negative).col(c)).norm();
      if (arg.index < 0 || d < best) {
        best = d;
        arg = {c, from_positives};
      }
    };
    for (int c = 0; c < batch; ++c) {
      if (c != b) consider(c, true);
      consider(c, false);
    }
    if (arg.index < 0)
      throw DataError("empty negative pool for anchor " + std::to_string(b) + " after masking");
    sel[b] = arg;
  }
  return sel;
}

double hbt_loss(const BatchEmbeddings& z, const EdgeIds& ids, double margin, bool hbt) {
  const int batch = z.batch();
  if (batch == 0) return 0.0;
  const auto sel = hbt ? hbt_select(z, ids) : own_negatives(batch);
  double sum = 0.0;
  for (int b = 0; b < batch; ++b)
    sum += triplet_loss(z.anchor.col(b), z.positive.col(b), pool(z, sel[b]).col(sel[b].index),
                        margin);
  return sum / batch;
}

double l2_reg(const BatchEmbeddings& z) {
  const double count = 3.0 * static_cast<double>(z.anchor.size());
  if (count == 0.0) return 0.0;
  const double sq =
      z.anchor.squaredNorm() + z.positive.squaredNorm() + z.negative.squaredNorm();
  return std::sqrt(sq / count);
}

LossTerms total_loss(const BatchEmbeddings& z, const EdgeIds& ids, const TrainConfig& cfg) {
  LossTerms t;
  t.hbt = hbt_loss(z, ids, cfg.margin, cfg.hbt_enabled);
  t.reg = l2_reg(z);
  t.total = t.hbt + cfg.lambda * t.reg;
  return t;
}

EmbeddingGradient loss_gradient(const BatchEmbeddings& z, const EdgeIds& ids,
                                const TrainConfig& cfg) {
  const int batch = z.batch();
  EmbeddingGradient g;
  g.grad.anchor = Eigen::MatrixXd::Zero(z.anchor.rows(), batch);
  g.grad.positive = Eigen::MatrixXd::Zero(z.positive.rows(), batch);
  g.grad.negative = Eigen::MatrixXd::Zero(z.negative.rows(), batch);
  if (batch == 0) return g;

  const auto sel = cfg.hbt_enabled ? hbt_select(z, ids) : own_negatives(batch);
  double hinge_sum = 0.0;
  for (int b = 0; b < batch; ++b) {
    const Eigen::VectorXd a = z.anchor.col(b);
    const Eigen::VectorXd p = z.positive.col(b);
    const Eigen::VectorXd n = pool(z, sel[b]).col(sel[b].index);
    const double h = (a - p).norm() - (a - n).norm() + cfg.margin;
    if (h <= 0.0) continue;
    hinge_sum += h;
    const Eigen::VectorXd gp = distance_grad(a, p) / batch;
    const Eigen::VectorXd gn = distance_grad(a, n) / batch;
    g.grad.anchor.col(b) += gp - gn;
    g.grad.positive.col(b) -= gp;
    Eigen::MatrixXd& target = sel[b].from_positives ? g.grad.positive : g.grad.negative;
    target.col(sel[b].index) += gn;
  }
  g.loss.hbt = hinge_sum / batch;
  g.loss.reg = l2_reg(z);
  g.loss.total = g.loss.hbt + cfg.lambda * g.loss.reg;

  if (cfg.lambda != 0.0 && g.loss.reg > 0.0) {
    const double scale = cfg.lambda / (3.0 * static_cast<double>(z.anchor.size()) * g.loss.reg);
    g.grad.anchor += scale * z.anchor;
    g.grad.positive += scale * z.positive;
    g.grad.negative += scale * z.negative;
  }
  return g;
}

template <typename T>
BatchResult<T> evaluate_batch(const ModelParamsT<T>& params, const TripletBatch& batch,
                              const TrainConfig& cfg, bool with_grad) {
  const ModelConfig& mc = params.config;
  if (mc.pair_input) throw UsageError("triplet training needs an embedding model");
  for (const auto& s : batch)
    for (const Piece* p : {&s.anchor, &s.positive, &s.negative})
      if (p->size != mc.piece_size || p->channels != mc.channels_in)
        throw DataError("training piece shape does not match the model");

  RolePass<T> anchors(mc, params.left_network(), role_inputs(batch, &TripletSample::anchor),
                      with_grad);
  RolePass<T> positives(mc, params.right_network(),
                        role_inputs(batch, &TripletSample::positive), with_grad);
  RolePass<T> negatives(mc, params.right_network(),
                        role_inputs(batch, &TripletSample::negative), with_grad);

  BatchEmbeddings z{anchors.output().template cast<double>(),
                    positives.output().template cast<double>(),
                    negatives.output().template cast<double>()};
  const EdgeIds ids = edge_ids(batch);

  BatchResult<T> result;
  if (!with_grad) {
    result.loss = total_loss(z, ids, cfg);
    return result;
  }
  const EmbeddingGradient eg = loss_gradient(z, ids, cfg);
  result.loss = eg.loss;
  result.grad.assign(params.values.size(), T(0));
  const std::size_t left_offset = params.left_network() - params.right_network();
  anchors.backward(eg.grad.anchor.template cast<T>(), result.grad.data() + left_offset);
  positives.backward(eg.grad.positive.template cast<T>(), result.grad.data());
  negatives.backward(eg.grad.negative.template cast<T>(), result.grad.data());
  return result;
}

template BatchResult<float> evaluate_batch(const ModelParamsT<float>&, const TripletBatch&,
                                           const TrainConfig&, bool);
template BatchResult<double> evaluate_batch(const ModelParamsT<double>&, const TripletBatch&,
                                            const TrainConfig&, bool);

Adam::Adam(std::size_t size, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::vector<float>& params, const std::vector<float>& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw UsageError("optimizer state does not match the parameter count");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grad[k];
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g * g;
    const double update = lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    params[k] = static_cast<float>(params[k] - update);
  }
}

bool PlateauSchedule::update(double epoch_loss) {
  if (epoch_loss < best_) {
    best_ = epoch_loss;
    stale_ = 0;
    return false;
  }
  if (++stale_ < patience_) return false;
  lr_ *= factor_;
  stale_ = 0;
  return true;
}

std::string to_jsonl(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["iterations"] = r.iterations;
  j["mean_loss"] = r.mean_loss;
  j["lr"] = r.lr;
  j["val_top1_type1"] = r.val_top1_type1 ? nlohmann::json(*r.val_top1_type1) : nlohmann::json();
  j["val_top1_type2"] = r.val_top1_type2 ? nlohmann::json(*r.val_top1_type2) : nlohmann::json();
  j["wall_secs"] = r.wall_secs;
  return j.dump();
}

double embedding_top1(const ModelParams& params, const PuzzleBundle& bundle, int workers) {
  const auto backend = make_embedding_backend(params);
  return top1_accuracy(compute_cm(bundle, *backend, workers), bundle);
}

TrainResult train(const Corpus& corpus, std::span<const PieceGrid> validation,
                  const TrainConfig& config, std::optional<ModelParams> init,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  TrainConfig cfg = config;
  if (init) cfg.model = init->config;
  cfg.validate();
  if (corpus.empty()) throw DataError("training corpus is empty");

  TrainResult result;
  result.params = init ? std::move(*init) : init_params(cfg.model, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x7472616e73ull);

  std::vector<PuzzleBundle> val1, val2;
  for (std::size_t k = 0; k < validation.size(); ++k) {
    val1.push_back(scramble(validation[k], ProblemType::kType1, cfg.seed + k));
    val2.push_back(scramble(validation[k], ProblemType::kType2, cfg.seed + k));
  }
  auto mean_top1 = [&](const std::vector<PuzzleBundle>& bundles) -> std::optional<double> {
    if (bundles.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& b : bundles) sum += embedding_top1(result.params, b, cfg.workers);
    return sum / static_cast<double>(bundles.size());
  };

  Adam adam(result.params.values.size());
  PlateauSchedule schedule(cfg.learning_rate, cfg.decay_factor, cfg.patience);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = schedule.lr();
    double sum = 0.0;
    for (int it = 0; it < cfg.iterations_per_epoch; ++it) {
      const TripletBatch batch = sample_triplets(corpus, cfg, rng);
      const BatchResult<float> br = evaluate_batch(result.params, batch, cfg);
      if (!std::isfinite(br.loss.total))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                             std::to_string(it));
      sum += br.loss.total;
      adam.step(result.params.values, br.grad, lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.iterations = adam.steps();
    rec.mean_loss = sum / cfg.iterations_per_epoch;
    rec.lr = lr;
    schedule.update(rec.mean_loss);
    rec.val_top1_type1 = mean_top1(val1);
    rec.val_top1_type2 = mean_top1(val2);
    rec.wall_secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

ModelParams train_pair_proxy(const Corpus& corpus, const ModelConfig& model, int steps,
                             int batch_size, double lr, std::uint64_t seed) {
  model.validate();
  if (!model.pair_input || model.embedding_dim != 1)
    throw UsageError("pair proxy training needs a pair-input model with one output");
  if (corpus.empty()) throw DataError("training corpus is empty");
  if (batch_size < 2) throw UsageError("batch_size must be at least 2");
  for (const auto& img : corpus) check_image(img);

  ModelParams params = init_params(model, seed);
  std::mt19937_64 rng(seed ^ 0x70616972ull);
  std::uniform_int_distribution<std::size_t> pick_image(0, corpus.size() - 1);
  Adam adam(params.values.size());
  for (int step = 0; step < steps; ++step) {
    // Each triplet yields one adjacent and one non-adjacent pair.
    std::vector<Piece> left, right;
    std::vector<double> label;
    for (int k = 0; k < batch_size / 2; ++k) {
      TripletSample s = draw_sample(corpus[pick_image(rng)], true, rng);
      left.push_back(s.anchor);
      right.push_back(std::move(s.positive));
      label.push_back(1.0);
      left.push_back(std::move(s.anchor));
      right.push_back(std::move(s.negative));
      label.push_back(0.0);
    }
    std::vector<const Piece*> lp, rp;
    for (std::size_t k = 0; k < left.size(); ++k) {
      lp.push_back(&left[k]);
      rp.push_back(&right[k]);
    }
    const int n = static_cast<int>(lp.size());
    nn::Trace<float> trace;
    const nn::Matrix<float> out = nn::forward<float>(model, params.values.data(),
                                                     nn::pack_pairs<float>(lp, rp), n, &trace);
    nn::Matrix<float> grad_out(1, n);
    for (int k = 0; k < n; ++k) {
      const double s = out(0, k);
      if (!std::isfinite(s)) throw NumericalError("non-finite pair score during proxy training");
      // Score is a dissimilarity: adjacent pairs minimize softplus(s).
      grad_out(0, k) = static_cast<float>((label[k] > 0.5 ? sigmoid(s) : -sigmoid(-s)) / n);
    }
    std::vector<float> grad(params.values.size(), 0.0f);
    nn::backward<float>(model, params.values.data(), trace, grad_out, grad.data());
    adam.step(params.values, grad, lr);
  }
  return params;
}

}  // namespace jigcm
