#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jigcm/image.hpp"

namespace jigcm {

enum class ProblemType : int {
  kType1 = 1,  // unknown location, known orientation
  kType2 = 2,  // unknown location and orientation
};

// Reads a PNG or JPEG as RGB in [0,1] (8-bit value / 255). Grayscale inputs
// are replicated across channels, alpha is dropped.
Image load_image(const std::filesystem::path& path);

// Writes an 8-bit PNG. Values are clamped and rounded to the nearest level.
void save_png(const Image& img, const std::filesystem::path& path);

// Catmull-Rom (a = -0.5) resampling to floor(dim / factor), pixel-center
// aligned, replicated border. Output is not clamped.
Image resample_bicubic(const Image& img, int factor);

// resample_bicubic followed by clamping to [0,1] and 8-bit quantization.
Image downscale_bicubic(const Image& img, int factor);

struct PieceGrid {
  int rows = 0;
  int cols = 0;
  std::vector<Piece> pieces;  // row-major ground-truth order

  int num_pieces() const { return rows * cols; }
  const Piece& at(int r, int c) const { return pieces[static_cast<std::size_t>(r) * cols + c]; }
};

// Cuts a top-left anchored grid of floor(h/S) x floor(w/S) pieces. With
// `max_pieces`, the grid is shrunk (larger dimension first) and centered
// until it holds at most that many pieces.
PieceGrid cut_puzzle(const Image& img, int piece_size, std::optional<int> max_pieces = std::nullopt);

// Reassembles a grid in ground-truth order.
Image assemble(const PieceGrid& grid);

// Zeroes the outer `e`-pixel frame. Requires 2e < S.
Piece erode_piece(const Piece& p, int e);
PieceGrid erode_grid(const PieceGrid& grid, int e);

struct PuzzleBundle {
  int rows = 0;
  int cols = 0;
  int piece_size = 0;
  int erosion_width = 0;
  ProblemType problem_type = ProblemType::kType1;
  std::vector<Piece> pieces;        // scrambled order
  std::vector<int> permutation;     // scrambled index -> ground-truth cell (row-major)
  std::vector<int> rotations;       // ccw quarter turns applied at scramble time
  std::string source_id;

  int num_pieces() const { return rows * cols; }
  bool operator==(const PuzzleBundle&) const = default;
};

// Uniform random permutation (and, for Type-2, uniform rotations) from a
// seeded generator. Deterministic in (grid, type, seed).
PuzzleBundle scramble(const PieceGrid& grid, ProblemType type, std::uint64_t seed,
                      std::string source_id = {});

// Inverse of scramble: pieces back in ground-truth order and orientation.
PieceGrid unscramble(const PuzzleBundle& b);

// Checks bijectivity, sizes and Type-1 rotations; throws DataError.
void validate_bundle(const PuzzleBundle& b);

// Directory layout: manifest.json + pieces/<00000>.png.
void save_bundle(const PuzzleBundle& b, const std::filesystem::path& dir);
PuzzleBundle load_bundle(const std::filesystem::path& dir);

// A piece index with a ccw quarter-turn count.
struct Pose {
  int piece = -1;
  int rotation = 0;
  bool operator==(const Pose&) const = default;
};

// The ground-truth partner of the edge of scrambled piece `piece` that faces
// right after rotating it by `rotation`: the piece that must sit on its right,
// and the rotation that piece needs. Empty for border edges.
std::optional<Pose> true_right_neighbor(const PuzzleBundle& b, int piece, int rotation);

// Inverse of the permutation: ground-truth cell -> scrambled index.
std::vector<int> cell_to_piece(const PuzzleBundle& b);

// Same as above with a precomputed cell_to_piece table.
std::optional<Pose> true_right_neighbor(const PuzzleBundle& b, std::span<const int> cell_owner,
                                       int piece, int rotation);

const char* to_string(ProblemType t);
ProblemType problem_type_from_string(const std::string& s);

}  // namespace jigcm
