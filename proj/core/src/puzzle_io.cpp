#include "jigcm/puzzle_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "jigcm/errors.hpp"

namespace jigcm {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBundleVersion = "pzb1";

double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

// Taps and weights along one axis for output index o.
struct Taps {
  int index[4];
  double weight[4];
};

Taps axis_taps(int o, int factor, int extent) {
  const double src = (o + 0.5) * factor - 0.5;
  const int base = static_cast<int>(std::floor(src));
  const double frac = src - base;
  Taps t{};
  for (int k = 0; k < 4; ++k) {
    t.index[k] = std::clamp(base - 1 + k, 0, extent - 1);
    t.weight[k] = cubic_weight(frac - (k - 1));
  }
  return t;
}

std::string piece_file_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", index);
  return buf;
}

}  // namespace

Image load_image(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("image not found: " + path.string());
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("unreadable or unsupported image: " + path.string());
  Image img(bgr.rows, bgr.cols, 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(row[x][2 - c]) / 255.0f;
    }
  }
  return img;
}

void save_png(const Image& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3) throw UsageError("PNG output needs 1 or 3 channels");
  cv::Mat out(img.height, img.width, img.channels == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < img.height; ++y) {
    auto* row = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const int dst = img.channels == 3 ? 2 - c : 0;
        const float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
        row[x * img.channels + dst] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw DataError("cannot write " + path.string());
}

Image resample_bicubic(const Image& img, int factor) {
  if (factor <= 0) throw UsageError("downscale factor must be >= 1");
  const int oh = img.height / factor;
  const int ow = img.width / factor;
  if (oh == 0 || ow == 0) throw UsageError("image too small for downscale factor");
  const int ch = img.channels;

  // Horizontal pass into a height x ow buffer, then vertical.
  std::vector<double> tmp(static_cast<std::size_t>(img.height) * ow * ch);
  for (int x = 0; x < ow; ++x) {
    const Taps t = axis_taps(x, factor, img.width);
    for (int y = 0; y < img.height; ++y)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += t.weight[k] * img.at(y, t.index[k], c);
        tmp[(static_cast<std::size_t>(y) * ow + x) * ch + c] = acc;
      }
  }
  Image out(oh, ow, ch);
  for (int y = 0; y < oh; ++y) {
    const Taps t = axis_taps(y, factor, img.height);
    for (int x = 0; x < ow; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k)
          acc += t.weight[k] * tmp[(static_cast<std::size_t>(t.index[k]) * ow + x) * ch + c];
        out.at(y, x, c) = static_cast<float>(acc);
      }
  }
  return out;
}

Image downscale_bicubic(const Image& img, int factor) {
  Image out = resample_bicubic(img, factor);
  for (float& v : out.data) v = quantize_8bit(v);
  return out;
}

PieceGrid cut_puzzle(const Image& img, int piece_size, std::optional<int> max_pieces) {
  if (piece_size <= 0) throw UsageError("piece size must be positive");
  if (img.height < piece_size || img.width < piece_size)
    throw DataError("image smaller than one piece");
  if (max_pieces && *max_pieces < 1) throw UsageError("max_pieces must be >= 1");

  const int full_rows = img.height / piece_size;
  const int full_cols = img.width / piece_size;
  int rows = full_rows;
  int cols = full_cols;
  if (max_pieces) {
    while (rows * cols > *max_pieces) {
      if (rows >= cols) --rows;
      else --cols;
    }
  }
  const int row0 = (full_rows - rows) / 2;
  const int col0 = (full_cols - cols) / 2;

  PieceGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.pieces.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      grid.pieces.push_back(
          crop_piece(img, (row0 + r) * piece_size, (col0 + c) * piece_size, piece_size));
  return grid;
}

Image assemble(const PieceGrid& grid) {
  if (grid.pieces.empty()) return {};
  const int s = grid.pieces.front().size;
  const int ch = grid.pieces.front().channels;
  Image img(grid.rows * s, grid.cols * s, ch);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const Piece& p = grid.at(r, c);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int k = 0; k < ch; ++k) img.at(r * s + y, c * s + x, k) = p.at(y, x, k);
    }
  return img;
}

Piece erode_piece(const Piece& p, int e) {
  if (e < 0 || 2 * e >= p.size) throw UsageError("erosion width must satisfy 0 <= 2e < S");
  Piece out = p;
  out.erosion_width = std::max(p.erosion_width, e);
  const int s = p.size;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      if (y >= e && y < s - e && x >= e && x < s - e) continue;
      for (int c = 0; c < p.channels; ++c) out.at(y, x, c) = 0.0f;
    }
  return out;
}

PieceGrid erode_grid(const PieceGrid& grid, int e) {
  PieceGrid out = grid;
  for (Piece& p : out.pieces) p = erode_piece(p, e);
  return out;
}

PuzzleBundle scramble(const PieceGrid& grid, ProblemType type, std::uint64_t seed,
                      std::string source_id) {
  const int n = grid.num_pieces();
  if (n == 0 || static_cast<int>(grid.pieces.size()) != n)
    throw UsageError("grid is empty or inconsistent");
  std::mt19937_64 rng(seed);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[i], perm[pick(rng)]);
  }
  std::vector<int> rots(n, 0);
  if (type == ProblemType::kType2) {
    std::uniform_int_distribution<int> quarter(0, 3);
    for (int& r : rots) r = quarter(rng);
  }

  PuzzleBundle b;
  b.rows = grid.rows;
  b.cols = grid.cols;
  b.piece_size = grid.pieces.front().size;
  b.erosion_width = grid.pieces.front().erosion_width;
  b.problem_type = type;
  b.permutation = perm;
  b.rotations = rots;
  b.source_id = std::move(source_id);
  b.pieces.reserve(n);
  for (int i = 0; i < n; ++i) b.pieces.push_back(rotate(grid.pieces[perm[i]], rots[i]));
  return b;
}

PieceGrid unscramble(const PuzzleBundle& b) {
  PieceGrid grid;
  grid.rows = b.rows;
  grid.cols = b.cols;
  grid.pieces.resize(b.pieces.size());
  for (std::size_t i = 0; i < b.pieces.size(); ++i)
    grid.pieces[b.permutation[i]] = rotate(b.pieces[i], -b.rotations[i]);
  return grid;
}

void validate_bundle(const PuzzleBundle& b) {
  const int n = b.num_pieces();
  if (b.rows <= 0 || b.cols <= 0) throw DataError("bundle grid dims must be positive");
  if (static_cast<int>(b.pieces.size()) != n)
    throw DataError("bundle has " + std::to_string(b.pieces.size()) + " pieces, manifest says " +
                    std::to_string(n));
  if (static_cast<int>(b.permutation.size()) != n || static_cast<int>(b.rotations.size()) != n)
    throw DataError("permutation/rotation length mismatch");
  std::vector<char> seen(n, 0);
  for (int p : b.permutation) {
    if (p < 0 || p >= n || seen[p]) throw DataError("permutation is not a bijection");
    seen[p] = 1;
  }
  for (int r : b.rotations) {
    if (r < 0 || r > 3) throw DataError("rotation out of range");
    if (b.problem_type == ProblemType::kType1 && r != 0)
      throw DataError("Type-1 bundle with non-zero rotation");
  }
  for (const Piece& p : b.pieces)
    if (p.size != b.piece_size) throw DataError("piece size mismatch");
}

void save_bundle(const PuzzleBundle& b, const fs::path& dir) {
  validate_bundle(b);
  fs::create_directories(dir / "pieces");
  json m;
  m["format_version"] = kBundleVersion;
  m["rows"] = b.rows;
  m["cols"] = b.cols;
  m["piece_size"] = b.piece_size;
  m["erosion_width"] = b.erosion_width;
  m["problem_type"] = to_string(b.problem_type);
  m["permutation"] = b.permutation;
  std::vector<int> degrees;
  for (int r : b.rotations) degrees.push_back(r * 90);
  m["rotations"] = degrees;
  m["source_id"] = b.source_id;
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write manifest in " + dir.string());
    out << m.dump(2) << '\n';
  }
  for (std::size_t i = 0; i < b.pieces.size(); ++i) {
    const Piece& p = b.pieces[i];
    Image img(p.size, p.size, p.channels);
    img.data = p.data;
    save_png(img, dir / "pieces" / piece_file_name(static_cast<int>(i)));
  }
}

PuzzleBundle load_bundle(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  std::ifstream in(manifest);
  if (!in) throw DataError("missing manifest: " + manifest.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw DataError("corrupt manifest: " + std::string(e.what()));
  }
  PuzzleBundle b;
  try {
    const auto version = m.at("format_version").get<std::string>();
    if (version != kBundleVersion)
      throw DataError("unsupported bundle format_version '" + version + "' (expected pzb1)");
    b.rows = m.at("rows").get<int>();
    b.cols = m.at("cols").get<int>();
    b.piece_size = m.at("piece_size").get<int>();
    b.erosion_width = m.at("erosion_width").get<int>();
    b.problem_type = problem_type_from_string(m.at("problem_type").get<std::string>());
    b.permutation = m.at("permutation").get<std::vector<int>>();
    for (int deg : m.at("rotations").get<std::vector<int>>()) {
      if (deg % 90 != 0) throw DataError("rotation must be a multiple of 90 degrees");
      b.rotations.push_back(mod4(deg / 90));
    }
    b.source_id = m.value("source_id", std::string{});
  } catch (const json::exception& e) {
    throw DataError("corrupt manifest: " + std::string(e.what()));
  }

  const int n = b.num_pieces();
  std::size_t files = 0;
  if (fs::is_directory(dir / "pieces"))
    for (const auto& entry : fs::directory_iterator(dir / "pieces"))
      if (entry.path().extension() == ".png") ++files;
  if (files != static_cast<std::size_t>(n))
    throw DataError("manifest declares " + std::to_string(n) + " pieces but found " +
                    std::to_string(files) + " piece files");

  for (int i = 0; i < n; ++i) {
    const Image img = load_image(dir / "pieces" / piece_file_name(i));
    if (img.height != b.piece_size || img.width != b.piece_size)
      throw DataError("piece " + std::to_string(i) + " has wrong dimensions");
    Piece p(b.piece_size, 3);
    p.data = img.data;
    p.erosion_width = b.erosion_width;
    b.pieces.push_back(std::move(p));
  }
  validate_bundle(b);
  return b;
}

std::vector<int> cell_to_piece(const PuzzleBundle& b) {
  std::vector<int> inv(b.permutation.size());
  for (std::size_t i = 0; i < b.permutation.size(); ++i) inv[b.permutation[i]] = static_cast<int>(i);
  return inv;
}

std::optional<Pose> true_right_neighbor(const PuzzleBundle& b, std::span<const int> cell_owner,
                                       int piece, int rotation) {
  static constexpr int kDr[4] = {0, 1, 0, -1};
  static constexpr int kDc[4] = {1, 0, -1, 0};
  const int side = mod4(b.rotations[piece] + rotation);  // original side now facing right
  const int cell = b.permutation[piece];
  const int r = cell / b.cols + kDr[side];
  const int c = cell % b.cols + kDc[side];
  if (r < 0 || r >= b.rows || c < 0 || c >= b.cols) return std::nullopt;
  const int j = cell_owner[static_cast<std::size_t>(r) * b.cols + c];
  return Pose{j, mod4(side - b.rotations[j])};
}

std::optional<Pose> true_right_neighbor(const PuzzleBundle& b, int piece, int rotation) {
  const std::vector<int> owner = cell_to_piece(b);
  return true_right_neighbor(b, owner, piece, rotation);
}

const char* to_string(ProblemType t) { return t == ProblemType::kType1 ? "type1" : "type2"; }

ProblemType problem_type_from_string(const std::string& s) {
  if (s == "type1" || s == "1") return ProblemType::kType1;
  if (s == "type2" || s == "2") return ProblemType::kType2;
  throw DataError("unknown problem type '" + s + "'");
}

}  // namespace jigcm
