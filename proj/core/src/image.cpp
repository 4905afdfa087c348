#include "jigcm/image.hpp"

#include <algorithm>
#include <cmath>

#include "jigcm/errors.hpp"

namespace jigcm {

Piece rotate(const Piece& p, int quarter_turns) {
  const int k = mod4(quarter_turns);
  if (k == 0) return p;
  const int s = p.size;
  Piece out = p;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      int sy = 0, sx = 0;
      switch (k) {
        case 1: sy = x; sx = s - 1 - y; break;
        case 2: sy = s - 1 - y; sx = s - 1 - x; break;
        default: sy = s - 1 - x; sx = y; break;
      }
      for (int c = 0; c < p.channels; ++c) out.at(y, x, c) = p.at(sy, sx, c);
    }
  }
  return out;
}

Piece hflip(const Piece& p) {
  Piece out = p;
  const int s = p.size;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < p.channels; ++c) out.at(y, x, c) = p.at(y, s - 1 - x, c);
  return out;
}

Piece crop_piece(const Image& img, int y, int x, int size) {
  if (y < 0 || x < 0 || y + size > img.height || x + size > img.width)
    throw UsageError("crop window outside image");
  Piece p(size, img.channels);
  for (int r = 0; r < size; ++r) {
    const float* src = &img.data[(static_cast<std::size_t>(y + r) * img.width + x) * img.channels];
    std::copy(src, src + static_cast<std::size_t>(size) * img.channels,
              &p.data[static_cast<std::size_t>(r) * size * img.channels]);
  }
  return p;
}

float quantize_8bit(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<float>(std::lround(c * 255.0f)) / 255.0f;
}

}  // namespace jigcm
