#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "jigcm/cm_tensor.hpp"
#include "jigcm/image.hpp"
#include "jigcm/puzzle_io.hpp"

namespace jigcm {

// A board of rows x cols cells, each holding a scrambled piece index and the
// ccw quarter turns applied to it, or nothing.
struct Placement {
  int rows = 0;
  int cols = 0;
  std::vector<std::optional<Pose>> cells;  // row-major

  Placement() = default;
  Placement(int r, int c) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c) {}

  std::optional<Pose>& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
  const std::optional<Pose>& at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * cols + c];
  }

  bool operator==(const Placement&) const = default;
};

// Throws DataError unless every piece in [0, n) appears exactly once and all
// rotations lie in [0, 4).
void validate_placement(const Placement& pl, int n);

// The placement that undoes the scramble of `b`.
Placement ground_truth_placement(const PuzzleBundle& b);

// Greedy placer: seeds with the lowest-scoring populated pose, then keeps
// committing the (slot, piece, rotation) with the lowest mean score against
// its placed neighbors. Slots must keep the placed set inside a rows x cols
// window (either orientation for Type-2, rotated back at the end). Ties go
// to more placed neighbors, then lower piece, rotation, and slot position.
Placement greedy_solve(const CMTensor& t, int rows, int cols, int workers = 1);

// Fraction of ground-truth adjacencies that appear in the placement with the
// same relative direction and relative rotation.
double neighbor_accuracy(const Placement& pl, const PuzzleBundle& b);

// True iff the placement equals the ground truth, up to a whole-board
// rotation for Type-2.
bool perfect_reconstruction(const Placement& pl, const PuzzleBundle& b);

// JSON {rows, cols, cells: [[piece, rotation_degrees] | null, ...]}.
void save_placement(const Placement& pl, const std::filesystem::path& path);
Placement load_placement(const std::filesystem::path& path);

// Assembled board image; empty cells are black.
Image render_board(const Placement& pl, const PuzzleBundle& b);

}  // namespace jigcm
