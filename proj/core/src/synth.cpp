#include "jigcm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "jigcm/errors.hpp"

namespace jigcm {

Image synth_image(const SynthOptions& opt, std::uint64_t seed) {
  if (opt.height < 1 || opt.width < 1) throw UsageError("synthetic image needs positive size");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = opt.height, w = opt.width;
  const double scale = std::max(h, w);

  Image img(opt.height, opt.width, 3);
  // Base: random background colour plus a sum of low-frequency waves.
  for (int c = 0; c < 3; ++c) {
    const double base = 0.25 + 0.5 * unit(rng);
    struct Wave { double fy, fx, phase, amp; };
    std::vector<Wave> waves;
    for (int k = 0; k < opt.waves; ++k) {
      const double freq = (0.5 + 3.5 * unit(rng)) * 2.0 * std::numbers::pi / scale;
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      waves.push_back({freq * std::sin(angle), freq * std::cos(angle),
                       2.0 * std::numbers::pi * unit(rng), 0.25 * unit(rng) / std::sqrt(opt.waves + 1.0)});
    }
    for (int y = 0; y < opt.height; ++y)
      for (int x = 0; x < opt.width; ++x) {
        double v = base;
        for (const auto& wv : waves) v += wv.amp * std::sin(wv.fy * y + wv.fx * x + wv.phase);
        img.at(y, x, c) = static_cast<float>(v);
      }
  }
  // Soft ellipses blended over the base.
  for (int k = 0; k < opt.blobs; ++k) {
    const double cy = h * unit(rng), cx = w * unit(rng);
    const double ry = scale * (0.03 + 0.15 * unit(rng)), rx = scale * (0.03 + 0.15 * unit(rng));
    const double angle = std::numbers::pi * unit(rng);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double soft = 0.05 + 0.3 * unit(rng);
    const double alpha = 0.4 + 0.5 * unit(rng);
    const double color[3] = {unit(rng), unit(rng), unit(rng)};
    const int y0 = std::max(0, static_cast<int>(cy - 2 * std::max(ry, rx)));
    const int y1 = std::min(opt.height - 1, static_cast<int>(cy + 2 * std::max(ry, rx)));
    const int x0 = std::max(0, static_cast<int>(cx - 2 * std::max(ry, rx)));
    const int x1 = std::min(opt.width - 1, static_cast<int>(cx + 2 * std::max(ry, rx)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double u = (ca * dx + sa * dy) / rx, v = (-sa * dx + ca * dy) / ry;
        const double r = std::sqrt(u * u + v * v);
        const double m = alpha / (1.0 + std::exp((r - 1.0) / soft));
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) = static_cast<float>((1.0 - m) * img.at(y, x, c) + m * color[c]);
      }
  }
  std::normal_distribution<double> noise(0.0, opt.noise);
  for (float& v : img.data) v = quantize_8bit(static_cast<float>(v + (opt.noise > 0 ? noise(rng) : 0.0)));
  return img;
}

}  // namespace jigcm
