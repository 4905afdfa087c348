#include "jigcm/classical_cm.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "jigcm/errors.hpp"

namespace jigcm {
namespace {

constexpr double kPbcP = 0.3;
constexpr double kPbcQ = 1.0 / 16.0;

void check_pair(const Piece& left, const Piece& right, int min_size) {
  if (left.size != right.size || left.channels != right.channels)
    throw UsageError("classical CM needs pieces of equal size and channel count");
  if (left.size < min_size) throw UsageError("piece too small for this measure");
}

// One direction of MGC. `inner` / `edge` are the second-to-boundary and
// boundary columns of the reference piece, `across` is the other piece's
// boundary column. All arrays are S x C row-major.
double mgc_direction(const std::vector<double>& inner, const std::vector<double>& edge,
                     const std::vector<double>& across, int rows, int channels) {
  // Gallagher's stabilizers keep the covariance invertible.
  static const double kDummy[9][3] = {{0, 0, 0},  {1, 1, 1},  {-1, -1, -1}, {0, 0, 1}, {0, 1, 0},
                                      {1, 0, 0},  {-1, 0, 0}, {0, -1, 0},   {0, 0, -1}};
  constexpr double kDelta = 1.0 / 255.0;
  const int count = rows + 9;

  Eigen::MatrixXd g(count, channels);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < channels; ++c)
      g(r, c) = edge[r * channels + c] - inner[r * channels + c];
  for (int k = 0; k < 9; ++k)
    for (int c = 0; c < channels; ++c) g(rows + k, c) = kDummy[k][c % 3] * kDelta;

  // The mean uses the real gradients only; the dummies just condition the covariance.
  const Eigen::RowVectorXd mu = g.topRows(rows).colwise().mean();
  const Eigen::MatrixXd centered = g.rowwise() - g.colwise().mean();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(count - 1);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
    throw NumericalError("MGC covariance is singular");

  double total = 0.0;
  Eigen::VectorXd h(channels);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < channels; ++c)
      h(c) = across[r * channels + c] - edge[r * channels + c] - mu(c);
    total += h.dot(ldlt.solve(h));
  }
  return total;
}

}  // namespace

EdgeColumns extract_edge_columns(const Piece& left, const Piece& right) {
  check_pair(left, right, 2);
  const int s = left.size;
  const int ch = left.channels;
  EdgeColumns e;
  for (auto* v : {&e.last_col, &e.second_last_col, &e.first_col, &e.second_col})
    v->resize(static_cast<std::size_t>(s) * ch);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < ch; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * ch + c;
      e.last_col[k] = left.at(r, s - 1, c);
      e.second_last_col[k] = left.at(r, s - 2, c);
      e.first_col[k] = right.at(r, 0, c);
      e.second_col[k] = right.at(r, 1, c);
    }
  return e;
}

double ssd(const Piece& left, const Piece& right) {
  check_pair(left, right, 1);
  const int s = left.size;
  double total = 0.0;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < left.channels; ++c) {
      const double d = static_cast<double>(left.at(r, s - 1, c)) - right.at(r, 0, c);
      total += d * d;
    }
  return total;
}

double l1_cm(const Piece& left, const Piece& right) {
  check_pair(left, right, 1);
  const int s = left.size;
  double total = 0.0;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < left.channels; ++c)
      total += std::abs(static_cast<double>(left.at(r, s - 1, c)) - right.at(r, 0, c));
  return total;
}

double pbc(const Piece& left, const Piece& right) {
  const EdgeColumns e = extract_edge_columns(left, right);
  double lr = 0.0;
  double rl = 0.0;
  for (std::size_t k = 0; k < e.last_col.size(); ++k) {
    const double pred_right = 2.0 * e.last_col[k] - e.second_last_col[k];
    const double pred_left = 2.0 * e.first_col[k] - e.second_col[k];
    lr += std::pow(std::abs(pred_right - e.first_col[k]), kPbcP);
    rl += std::pow(std::abs(pred_left - e.last_col[k]), kPbcP);
  }
  return std::pow(lr, kPbcQ / kPbcP) + std::pow(rl, kPbcQ / kPbcP);
}

double mgc(const Piece& left, const Piece& right) {
  const EdgeColumns e = extract_edge_columns(left, right);
  const int rows = left.size;
  const int ch = left.channels;
  return mgc_direction(e.second_last_col, e.last_col, e.first_col, rows, ch) +
         mgc_direction(e.second_col, e.first_col, e.last_col, rows, ch);
}

ClassicalMeasure classical_measure_from_name(const std::string& name) {
  if (name == "ssd") return ClassicalMeasure::kSsd;
  if (name == "l1") return ClassicalMeasure::kL1;
  if (name == "pbc") return ClassicalMeasure::kPbc;
  if (name == "mgc") return ClassicalMeasure::kMgc;
  throw UsageError("unknown classical measure '" + name + "'");
}

double classical_score(ClassicalMeasure m, const Piece& left, const Piece& right) {
  switch (m) {
    case ClassicalMeasure::kSsd: return ssd(left, right);
    case ClassicalMeasure::kL1: return l1_cm(left, right);
    case ClassicalMeasure::kPbc: return pbc(left, right);
    case ClassicalMeasure::kMgc: return mgc(left, right);
  }
  return 0.0;
}

}  // namespace jigcm
