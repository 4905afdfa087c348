#pragma once

#include <filesystem>

#include "jigcm/embed_net.hpp"

namespace jigcm {

// Checkpoint directory: meta.json (format "e2v1", config, parameter manifest)
// and weights.bin (float32 little-endian, manifest order, row-major).
void save_checkpoint(const ModelParams& params, const std::filesystem::path& dir);
ModelParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace jigcm
