#include "jigcm/reconstructor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

#include <nlohmann/json.hpp>

#include "jigcm/errors.hpp"
#include "jigcm/parallel.hpp"

namespace jigcm {
namespace {

constexpr int kDy[4] = {0, 1, 0, -1};
constexpr int kDx[4] = {1, 0, -1, 0};

struct Choice {
  double score = std::numeric_limits<double>::infinity();
  int neighbors = 0;
  int piece = -1;
  int rotation = 0;
  int y = 0;
  int x = 0;

  auto key() const { return std::make_tuple(score, -neighbors, piece, rotation, y, x); }
  bool better_than(const Choice& o) const { return o.piece < 0 || key() < o.key(); }
};

double finite_or_inf(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }

// Rotates a board a quarter turn ccw, turning every piece with it.
Placement rotate_board(const Placement& pl) {
  Placement out(pl.cols, pl.rows);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) {
      auto cell = pl.at(c, pl.cols - 1 - r);
      if (cell) cell->rotation = mod4(cell->rotation + 1);
      out.at(r, c) = cell;
    }
  return out;
}

}  // namespace

void validate_placement(const Placement& pl, int n) {
  if (pl.rows < 0 || pl.cols < 0 || pl.cells.size() != static_cast<std::size_t>(pl.rows) * pl.cols)
    throw DataError("placement cell count does not match its dimensions");
  std::vector<int> seen(n, 0);
  for (const auto& cell : pl.cells) {
    if (!cell) continue;
    if (cell->piece < 0 || cell->piece >= n) throw DataError("placement piece index out of range");
    if (cell->rotation < 0 || cell->rotation > 3) throw DataError("placement rotation out of range");
    if (seen[cell->piece]++) throw DataError("piece " + std::to_string(cell->piece) + " placed twice");
  }
  for (int i = 0; i < n; ++i)
    if (!seen[i]) throw DataError("piece " + std::to_string(i) + " is not placed");
}

Placement ground_truth_placement(const PuzzleBundle& b) {
  Placement pl(b.rows, b.cols);
  for (int i = 0; i < b.num_pieces(); ++i)
    pl.cells[b.permutation[i]] = Pose{i, mod4(-b.rotations[i])};
  return pl;
}

Placement greedy_solve(const CMTensor& t, int rows, int cols, int workers) {
  const int n = t.n;
  if (rows < 1 || cols < 1 || rows * cols != n)
    throw DataError("tensor holds " + std::to_string(n) + " pieces, dims are " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  if (t.scores.size() != static_cast<std::size_t>(n) * 16 * n)
    throw DataError("tensor storage does not match N");
  const bool type2 = t.type == ProblemType::kType2;
  const int turns = type2 ? 4 : 1;

  // Canvas wide enough for any window anchored at the seed.
  const int span = 2 * std::max(rows, cols) + 1;
  const int origin = std::max(rows, cols);
  std::vector<std::optional<Pose>> canvas(static_cast<std::size_t>(span) * span);
  auto cell = [&](int y, int x) -> std::optional<Pose>& {
    return canvas[static_cast<std::size_t>(y) * span + x];
  };
  std::vector<char> used(n, 0);
  int min_y = origin, max_y = origin, min_x = origin, max_x = origin;
  int placed = 0;
  auto commit = [&](int y, int x, Pose p) {
    cell(y, x) = p;
    used[p.piece] = 1;
    ++placed;
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
  };
  auto fits = [&](int y, int x) {
    const int h = std::max(max_y, y) - std::min(min_y, y) + 1;
    const int w = std::max(max_x, x) - std::min(min_x, x) + 1;
    return (h <= rows && w <= cols) || (type2 && h <= cols && w <= rows);
  };

  // Seed pair.
  float best = std::numeric_limits<float>::infinity();
  int si = -1, sa = 0, sj = 0, sb = 0;
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 4; ++a)
      for (int j = 0; j < n; ++j)
        for (int b = 0; b < 4; ++b) {
          if (!t.populated(i, a, j, b)) continue;
          const float v = t.at(i, a, j, b);
          if (std::isfinite(v) && v < best) {
            best = v;
            si = i, sa = a, sj = j, sb = b;
          }
        }
  if (si < 0) {
    commit(origin, origin, {0, 0});
  } else if (type2) {
    commit(origin, origin, {si, sa});
    if (fits(origin, origin + 1)) commit(origin, origin + 1, {sj, sb});
  } else {
    commit(origin, origin, {si, 0});
    const int y = origin + kDy[sa], x = origin + kDx[sa];
    if (fits(y, x)) commit(y, x, {sj, 0});
  }

  std::vector<char> stamp(canvas.size(), 0);
  while (placed < n) {
    std::vector<std::pair<int, int>> slots;
    std::fill(stamp.begin(), stamp.end(), 0);
    for (int y = min_y; y <= max_y; ++y)
      for (int x = min_x; x <= max_x; ++x) {
        if (!cell(y, x)) continue;
        for (int d = 0; d < 4; ++d) {
          const int ny = y + kDy[d], nx = x + kDx[d];
          const std::size_t k = static_cast<std::size_t>(ny) * span + nx;
          if (cell(ny, nx) || stamp[k] || !fits(ny, nx)) continue;
          stamp[k] = 1;
          slots.emplace_back(ny, nx);
        }
      }
    std::sort(slots.begin(), slots.end());

    std::vector<int> free_pieces;
    for (int i = 0; i < n; ++i)
      if (!used[i]) free_pieces.push_back(i);

    std::vector<Choice> per_slot(slots.size());
    parallel_for(static_cast<int>(slots.size()), workers, [&](int begin, int end) {
      for (int s = begin; s < end; ++s) {
        const auto [y, x] = slots[s];
        struct Neighbor { int dir; Pose pose; };
        std::vector<Neighbor> nbs;
        for (int d = 0; d < 4; ++d)
          if (const auto& c = cell(y + kDy[d], x + kDx[d])) nbs.push_back({d, *c});
        Choice local;
        for (int i : free_pieces)
          for (int q = 0; q < turns; ++q) {
            double sum = 0.0;
            for (const auto& nb : nbs)
              sum += t.at(i, mod4(q + nb.dir), nb.pose.piece, mod4(nb.pose.rotation + nb.dir));
            Choice c{finite_or_inf(sum / static_cast<double>(nbs.size())),
                     static_cast<int>(nbs.size()), i, q, y, x};
            if (c.better_than(local)) local = c;
          }
        per_slot[s] = local;
      }
    });
    Choice choice;
    for (const auto& c : per_slot)
      if (c.piece >= 0 && c.better_than(choice)) choice = c;
    commit(choice.y, choice.x, {choice.piece, choice.rotation});
  }

  Placement pl(max_y - min_y + 1, max_x - min_x + 1);
  for (int y = min_y; y <= max_y; ++y)
    for (int x = min_x; x <= max_x; ++x) pl.at(y - min_y, x - min_x) = cell(y, x);
  if (pl.rows != rows) pl = rotate_board(pl);
  return pl;
}

double neighbor_accuracy(const Placement& pl, const PuzzleBundle& b) {
  const int n = b.num_pieces();
  validate_placement(pl, n);
  std::vector<int> y(n), x(n), turn(n);
  for (int r = 0; r < pl.rows; ++r)
    for (int c = 0; c < pl.cols; ++c)
      if (const auto& cell = pl.at(r, c)) {
        y[cell->piece] = r;
        x[cell->piece] = c;
        turn[cell->piece] = mod4(b.rotations[cell->piece] + cell->rotation);
      }
  const std::vector<int> owner = cell_to_piece(b);
  const int total = b.rows * (b.cols - 1) + (b.rows - 1) * b.cols;
  if (total == 0) return 1.0;
  int hits = 0;
  for (int r = 0; r < b.rows; ++r)
    for (int c = 0; c < b.cols; ++c)
      for (int d = 0; d < 2; ++d) {
        const int nr = r + kDy[d], nc = c + kDx[d];
        if (nr >= b.rows || nc >= b.cols) continue;
        const int u = owner[r * b.cols + c];
        const int v = owner[nr * b.cols + nc];
        if (turn[u] != turn[v]) continue;
        const int dir = mod4(d - turn[u]);
        if (y[v] - y[u] == kDy[dir] && x[v] - x[u] == kDx[dir]) ++hits;
      }
  return static_cast<double>(hits) / total;
}

bool perfect_reconstruction(const Placement& pl, const PuzzleBundle& b) {
  validate_placement(pl, b.num_pieces());
  Placement expected = ground_truth_placement(b);
  const int variants = b.problem_type == ProblemType::kType2 ? 4 : 1;
  for (int k = 0; k < variants; ++k) {
    if (expected == pl) return true;
    expected = rotate_board(expected);
  }
  return false;
}

void save_placement(const Placement& pl, const std::filesystem::path& path) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& cell : pl.cells)
    cells.push_back(cell ? nlohmann::json::array({cell->piece, cell->rotation * 90})
                         : nlohmann::json());
  const nlohmann::json j{{"rows", pl.rows}, {"cols", pl.cols}, {"cells", cells}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

Placement load_placement(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    Placement pl(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto& cells = j.at("cells");
    if (!cells.is_array() || cells.size() != pl.cells.size())
      throw DataError("placement cell count does not match its dimensions");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].is_null()) continue;
      const int degrees = cells[k].at(1).get<int>();
      if (degrees % 90 != 0) throw DataError("placement rotation is not a multiple of 90");
      pl.cells[k] = Pose{cells[k].at(0).get<int>(), degrees / 90};
    }
    return pl;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed placement " + path.string() + ": " + e.what());
  }
}

Image render_board(const Placement& pl, const PuzzleBundle& b) {
  const int s = b.piece_size;
  const int ch = b.pieces.empty() ? 3 : b.pieces.front().channels;
  Image img(pl.rows * s, pl.cols * s, ch);
  for (int r = 0; r < pl.rows; ++r)
    for (int c = 0; c < pl.cols; ++c) {
      const auto& cell = pl.at(r, c);
      if (!cell) continue;
      const Piece p = rotate(b.pieces.at(cell->piece), cell->rotation);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int k = 0; k < ch; ++k) img.at(r * s + y, c * s + x, k) = p.at(y, x, k);
    }
  return img;
}

}  // namespace jigcm
