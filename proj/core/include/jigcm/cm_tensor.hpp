#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <vector>

#include "jigcm/puzzle_io.hpp"

namespace jigcm {

// Board directions, also the ccw turn count that brings each one to "right".
enum class Direction : int { kRight = 0, kDown = 1, kLeft = 2, kUp = 3 };

// scores[i][ri][j][rj]: dissimilarity of piece j (rotated rj) placed
// immediately right of piece i (rotated ri). Lower is more compatible.
// Unpopulated slots and the diagonal hold +inf. Type-1 tensors populate the
// diagonal rotation slots ri == rj only.
struct CMTensor {
  static constexpr float kSentinel = std::numeric_limits<float>::infinity();

  int n = 0;
  ProblemType type = ProblemType::kType1;
  std::vector<float> scores;

  CMTensor() = default;
  CMTensor(int pieces, ProblemType t)
      : n(pieces), type(t), scores(static_cast<std::size_t>(pieces) * 16 * pieces, kSentinel) {}

  std::size_t index(int i, int ri, int j, int rj) const {
    return ((static_cast<std::size_t>(i) * 4 + ri) * n + j) * 4 + rj;
  }
  float& at(int i, int ri, int j, int rj) { return scores[index(i, ri, j, rj)]; }
  float at(int i, int ri, int j, int rj) const { return scores[index(i, ri, j, rj)]; }

  // Whether (i, ri, j, rj) carries a score for this problem type.
  bool populated(int i, int ri, int j, int rj) const {
    return i != j && (type == ProblemType::kType2 || ri == rj);
  }

  // Score of piece j (rotation qj) at direction d of piece i (rotation qi).
  float query(int i, int qi, int j, int qj, Direction d) const {
    const int t = static_cast<int>(d);
    return at(i, mod4(qi + t), j, mod4(qj + t));
  }

  std::size_t finite_count() const;

  bool operator==(const CMTensor&) const = default;
};

// "CMT1" binary format: magic, u32 N, u8 type, 3 reserved bytes, then
// N*4*N*4 float32 values, all little-endian, [i][ri][j][rj] row-major.
void save_cm(const CMTensor& t, const std::filesystem::path& path);
CMTensor load_cm(const std::filesystem::path& path);

}  // namespace jigcm
