#pragma once

#include <filesystem>
#include <string>

#include "jigcm/trainer.hpp"

namespace jigcm {

// JSON using the TrainConfig field names, with the model under "model" and
// an optional "erosion_width". Missing fields keep `base` values; unknown
// fields throw UsageError.
struct TrainSetup {
  TrainConfig train;
  int erosion_width = 0;
};

TrainSetup parse_train_setup(const std::string& json_text, const TrainSetup& base = {});
TrainSetup load_train_setup(const std::filesystem::path& path, const TrainSetup& base = {});
std::string dump_train_setup(const TrainSetup& setup);

}  // namespace jigcm
