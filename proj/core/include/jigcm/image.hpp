#pragma once

#include <cstddef>
#include <vector>

namespace jigcm {

// Row-major HWC float image with channel values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c = 3, float fill = 0.0f)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Image&) const = default;
};

// One square puzzle tile. `erosion_width` records the zeroed outer frame.
struct Piece {
  int size = 0;
  int channels = 3;
  int erosion_width = 0;
  std::vector<float> data;  // S x S x C, row-major HWC

  Piece() = default;
  Piece(int s, int c = 3, float fill = 0.0f)
      : size(s), channels(c), data(static_cast<std::size_t>(s) * s * c, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * size + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * size + x) * channels + c];
  }

  bool operator==(const Piece&) const = default;
};

inline int mod4(int v) {
  v %= 4;
  return v < 0 ? v + 4 : v;
}

// Rotates counter-clockwise by `quarter_turns` * 90 degrees. After one turn the
// original bottom row becomes the right column.
Piece rotate(const Piece& p, int quarter_turns);

// Mirrors columns: the right edge becomes the left edge.
Piece hflip(const Piece& p);

// Copies the h x w window at (y, x) of `img` into a piece (h == w required).
Piece crop_piece(const Image& img, int y, int x, int size);

// Value on the 8-bit grid nearest to v (clamped to [0,1]).
float quantize_8bit(float v);

}  // namespace jigcm
