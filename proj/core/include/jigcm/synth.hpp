#pragma once

#include <cstdint>

#include "jigcm/image.hpp"

namespace jigcm {

struct SynthOptions {
  int height = 420;
  int width = 560;
  int waves = 6;         // low-frequency sinusoids per channel
  int blobs = 24;        // soft-edged ellipses
  double noise = 0.01;   // Gaussian pixel noise (std)
};

// Smooth, photo-like RGB test image on the 8-bit grid. Deterministic in
// (options, seed).
Image synth_image(const SynthOptions& opt, std::uint64_t seed);

}  // namespace jigcm
