#include "jigcm/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jigcm/errors.hpp"

namespace jigcm {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw UsageError("unknown config field '" + where + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainSetup parse_train_setup(const std::string& json_text, const TrainSetup& base) {
  TrainSetup s = base;
  try {
    const json j = json::parse(json_text);
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    reject_unknown(j,
                   {"model", "margin", "lambda", "batch_size", "learning_rate", "decay_factor",
                    "patience", "iterations_per_epoch", "epochs", "intra_fraction", "hbt_enabled",
                    "seed", "workers", "erosion_width"},
                   "");
    TrainConfig& t = s.train;
    read(j, "margin", t.margin);
    read(j, "lambda", t.lambda);
    read(j, "batch_size", t.batch_size);
    read(j, "learning_rate", t.learning_rate);
    read(j, "decay_factor", t.decay_factor);
    read(j, "patience", t.patience);
    read(j, "iterations_per_epoch", t.iterations_per_epoch);
    read(j, "epochs", t.epochs);
    read(j, "intra_fraction", t.intra_fraction);
    read(j, "hbt_enabled", t.hbt_enabled);
    read(j, "seed", t.seed);
    read(j, "workers", t.workers);
    read(j, "erosion_width", s.erosion_width);
    if (j.contains("model")) {
      const json& m = j.at("model");
      if (!m.is_object()) throw UsageError("config field 'model' must be an object");
      reject_unknown(m,
                     {"piece_size", "channels_in", "conv_channels", "embedding_dim", "groups",
                      "twin_mode", "pair_input"},
                     "model.");
      ModelConfig& mc = t.model;
      read(m, "piece_size", mc.piece_size);
      read(m, "channels_in", mc.channels_in);
      read(m, "conv_channels", mc.conv_channels);
      read(m, "embedding_dim", mc.embedding_dim);
      read(m, "groups", mc.groups);
      read(m, "twin_mode", mc.twin_mode);
      read(m, "pair_input", mc.pair_input);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  return s;
}

TrainSetup load_train_setup(const std::filesystem::path& path, const TrainSetup& base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_setup(ss.str(), base);
}

std::string dump_train_setup(const TrainSetup& s) {
  const TrainConfig& t = s.train;
  const ModelConfig& m = t.model;
  const json j{{"model",
                {{"piece_size", m.piece_size},
                 {"channels_in", m.channels_in},
                 {"conv_channels", m.conv_channels},
                 {"embedding_dim", m.embedding_dim},
                 {"groups", m.groups},
                 {"twin_mode", m.twin_mode},
                 {"pair_input", m.pair_input}}},
               {"margin", t.margin},
               {"lambda", t.lambda},
               {"batch_size", t.batch_size},
               {"learning_rate", t.learning_rate},
               {"decay_factor", t.decay_factor},
               {"patience", t.patience},
               {"iterations_per_epoch", t.iterations_per_epoch},
               {"epochs", t.epochs},
               {"intra_fraction", t.intra_fraction},
               {"hbt_enabled", t.hbt_enabled},
               {"seed", t.seed},
               {"workers", t.workers},
               {"erosion_width", s.erosion_width}};
  return j.dump(2);
}

}  // namespace jigcm
