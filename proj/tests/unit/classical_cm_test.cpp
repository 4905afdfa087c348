#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "jigcm/classical_cm.hpp"
#include "jigcm/errors.hpp"
#include "jigcm/puzzle_io.hpp"
#include "test_support.hpp"

namespace jigcm {
namespace {

// 2x2 single-channel pieces given as row-major values.
Piece piece2(std::initializer_list<float> v) {
  Piece p(2, 1);
  p.data.assign(v);
  return p;
}

TEST(Ssd, HandValues) {
  // left last column (0.5, 0.0), right first column (0.6, 0.2).
  const Piece left = piece2({0.9f, 0.5f, 0.3f, 0.0f});
  const Piece right = piece2({0.6f, 0.1f, 0.2f, 0.7f});
  EXPECT_NEAR(ssd(left, right), 0.05, 1e-7);
  EXPECT_NEAR(l1_cm(left, right), 0.3, 1e-7);
  const Piece same = piece2({0.5f, 0.4f, 0.0f, 0.4f});
  EXPECT_EQ(ssd(left, same), 0.0);
  EXPECT_EQ(l1_cm(left, same), 0.0);
}

TEST(Ssd, SizeMismatchThrows) {
  EXPECT_THROW(ssd(Piece(2, 1), Piece(3, 1)), UsageError);
  EXPECT_THROW(mgc(Piece(2, 3), Piece(2, 1)), UsageError);
}

TEST(Classical, ErodedPiecesAreDegenerateForSsd) {
  std::mt19937_64 rng(1);
  const Piece a = erode_piece(testing::random_piece(8, rng), 1);
  const Piece b = erode_piece(testing::random_piece(8, rng), 1);
  EXPECT_EQ(ssd(a, b), 0.0);
  EXPECT_EQ(l1_cm(a, b), 0.0);
  EXPECT_TRUE(std::isfinite(pbc(a, b)));
  EXPECT_TRUE(std::isfinite(mgc(a, b)));
}

TEST(Pbc, LinearContinuationScoresZero) {
  // Rows identical; columns 0.25, 0.5 | 0.75, 1 continue one ramp. Dyadic
  // values keep the predictions exact, which matters under the 3/10 power.
  const Piece left = piece2({0.25f, 0.5f, 0.25f, 0.5f});
  const Piece right = piece2({0.75f, 1.0f, 0.75f, 1.0f});
  EXPECT_NEAR(pbc(left, right), 0.0, 1e-6);
  Piece flat_l(4, 3, 0.3f), flat_r(4, 3, 0.3f);
  EXPECT_EQ(pbc(flat_l, flat_r), 0.0);
}

TEST(Pbc, MatchesDirectFormula) {
  std::mt19937_64 rng(2);
  const Piece left = testing::random_piece(5, rng);
  const Piece right = testing::random_piece(5, rng);
  double lr = 0, rl = 0;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) {
      const double pred_r = 2.0 * left.at(r, 4, c) - left.at(r, 3, c);
      lr += std::pow(std::abs(pred_r - right.at(r, 0, c)), 0.3);
      const double pred_l = 2.0 * right.at(r, 0, c) - right.at(r, 1, c);
      rl += std::pow(std::abs(pred_l - left.at(r, 4, c)), 0.3);
    }
  const double expected = std::pow(lr, (1.0 / 16.0) / 0.3) + std::pow(rl, (1.0 / 16.0) / 0.3);
  EXPECT_NEAR(pbc(left, right), expected, 1e-9);
  EXPECT_GE(pbc(left, right), 0.0);
}

// Straightforward Mahalanobis term: explicit sums, cofactor inverse.
double mgc_term(const std::vector<std::array<double, 3>>& grads,
                const std::vector<std::array<double, 3>>& cross) {
  std::vector<std::array<double, 3>> all = grads;
  const double d = 1.0 / 255.0;
  const double dummies[9][3] = {{0, 0, 0}, {d, d, d}, {-d, -d, -d}, {d, 0, 0}, {0, d, 0},
                                {0, 0, d}, {-d, 0, 0}, {0, -d, 0}, {0, 0, -d}};
  for (auto& v : dummies) all.push_back({v[0], v[1], v[2]});
  const double n = static_cast<double>(all.size());
  double mu[3] = {0, 0, 0}, mean_all[3] = {0, 0, 0};
  for (const auto& g : grads)
    for (int c = 0; c < 3; ++c) mu[c] += g[c] / static_cast<double>(grads.size());
  for (const auto& g : all)
    for (int c = 0; c < 3; ++c) mean_all[c] += g[c] / n;
  double s[3][3] = {};
  for (const auto& g : all)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        s[a][b] += (g[a] - mean_all[a]) * (g[b] - mean_all[b]) / (n - 1);
  const double det = s[0][0] * (s[1][1] * s[2][2] - s[1][2] * s[2][1]) -
                     s[0][1] * (s[1][0] * s[2][2] - s[1][2] * s[2][0]) +
                     s[0][2] * (s[1][0] * s[2][1] - s[1][1] * s[2][0]);
  double inv[3][3];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const int r0 = (b + 1) % 3, r1 = (b + 2) % 3, c0 = (a + 1) % 3, c1 = (a + 2) % 3;
      inv[a][b] = (s[r0][c0] * s[r1][c1] - s[r0][c1] * s[r1][c0]) / det;
    }
  double total = 0;
  for (const auto& h : cross) {
    double v[3];
    for (int c = 0; c < 3; ++c) v[c] = h[c] - mu[c];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) total += v[a] * inv[a][b] * v[b];
  }
  return total;
}

TEST(Mgc, MatchesBruteForceOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Piece left = testing::random_piece(4, rng);
    const Piece right = testing::random_piece(4, rng);
    std::vector<std::array<double, 3>> g_lr, h_lr, g_rl, h_rl;
    for (int r = 0; r < 4; ++r) {
      std::array<double, 3> a{}, b{}, c{}, e{};
      for (int k = 0; k < 3; ++k) {
        a[k] = double(left.at(r, 3, k)) - left.at(r, 2, k);
        b[k] = double(right.at(r, 0, k)) - left.at(r, 3, k);
        c[k] = double(right.at(r, 0, k)) - right.at(r, 1, k);
        e[k] = double(left.at(r, 3, k)) - right.at(r, 0, k);
      }
      g_lr.push_back(a);
      h_lr.push_back(b);
      g_rl.push_back(c);
      h_rl.push_back(e);
    }
    const double expected = mgc_term(g_lr, h_lr) + mgc_term(g_rl, h_rl);
    EXPECT_NEAR(mgc(left, right), expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(Mgc, ConstantShiftInvariantAndRampNearZero) {
  std::mt19937_64 rng(4);
  Piece left = testing::random_piece(6, rng), right = testing::random_piece(6, rng);
  for (float& v : left.data) v *= 0.5f;
  for (float& v : right.data) v *= 0.5f;
  Piece l2 = left, r2 = right;
  for (float& v : l2.data) v += 0.25f;
  for (float& v : r2.data) v += 0.25f;
  EXPECT_NEAR(mgc(left, right), mgc(l2, r2), 1e-6 * mgc(left, right));

  // Horizontal ramp with a small vertical texture, continued exactly.
  Piece a(6, 3), b(6, 3);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c) {
        a.at(y, x, c) = static_cast<float>(0.1 + 0.02 * x + 0.01 * y + 0.05 * c);
        b.at(y, x, c) = static_cast<float>(0.1 + 0.02 * (x + 6) + 0.01 * y + 0.05 * c);
      }
  const double ramp = mgc(a, b);
  EXPECT_GE(ramp, 0.0);
  EXPECT_LT(ramp, 1e-3);
  EXPECT_LT(ramp, mgc(b, a));
}

TEST(Classical, NonNegativeFiniteAndDeterministic) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Piece a = testing::random_piece(7, rng), b = testing::random_piece(7, rng);
    for (auto m : {ClassicalMeasure::kSsd, ClassicalMeasure::kL1, ClassicalMeasure::kPbc,
                   ClassicalMeasure::kMgc}) {
      const double v = classical_score(m, a, b);
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
      EXPECT_EQ(v, classical_score(m, a, b));
    }
  }
  const Piece flat(7, 3, 0.4f);
  EXPECT_EQ(ssd(flat, flat), 0.0);
  EXPECT_EQ(l1_cm(flat, flat), 0.0);
  EXPECT_EQ(pbc(flat, flat), 0.0);
  EXPECT_LT(mgc(flat, flat), 1e-9);
}

TEST(Classical, ExtractEdgeColumns) {
  std::mt19937_64 rng(6);
  const Piece a = testing::random_piece(5, rng), b = testing::random_piece(5, rng);
  const EdgeColumns e = extract_edge_columns(a, b);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(e.last_col[r * 3 + c], a.at(r, 4, c));
      EXPECT_EQ(e.second_last_col[r * 3 + c], a.at(r, 3, c));
      EXPECT_EQ(e.first_col[r * 3 + c], b.at(r, 0, c));
      EXPECT_EQ(e.second_col[r * 3 + c], b.at(r, 1, c));
    }
  EXPECT_THROW(classical_measure_from_name("bogus"), UsageError);
}

}  // namespace
}  // namespace jigcm
