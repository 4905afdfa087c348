#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "jigcm/checkpoint.hpp"
#include "jigcm/cm_engine.hpp"
#include "jigcm/config_io.hpp"
#include "jigcm/errors.hpp"
#include "jigcm/experiment.hpp"
#include "jigcm/reconstructor.hpp"
#include "jigcm/synth.hpp"

namespace jigcm::cli {
namespace {

std::vector<fs::path> list_images(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw DataError("no such file or directory: " + input.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  if (out.empty()) throw DataError("no images in " + input.string());
  std::sort(out.begin(), out.end());
  return out;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int run_cut(const CutOptions& o) {
  if (o.downscale < 1) throw UsageError("--downscale must be at least 1");
  const ProblemType type = problem_type_from_string(o.type);
  const auto images = list_images(o.input);
  fs::create_directories(o.out);
  std::printf("%-32s %6s %6s %8s\n", "image", "rows", "cols", "pieces");
  for (std::size_t k = 0; k < images.size(); ++k) {
    Image img = load_image(images[k]);
    if (o.downscale > 1) img = downscale_bicubic(img, o.downscale);
    PieceGrid grid = cut_puzzle(img, o.piece_size, o.max_pieces);
    if (o.erosion > 0) grid = erode_grid(grid, o.erosion);
    const std::string stem = images[k].stem().string();
    const PuzzleBundle b = scramble(grid, type, o.seed + k, stem);
    save_bundle(b, o.out / stem);
    std::printf("%-32s %6d %6d %8d\n", stem.c_str(), b.rows, b.cols, b.num_pieces());
  }
  return 0;
}

int run_train(const TrainOptions& o) {
  TrainSetup setup;
  if (o.config) setup = load_train_setup(*o.config, setup);
  TrainConfig& t = setup.train;
  if (o.epochs) t.epochs = *o.epochs;
  if (o.iterations) t.iterations_per_epoch = *o.iterations;
  if (o.batch_size) t.batch_size = *o.batch_size;
  if (o.lr) t.learning_rate = *o.lr;
  if (o.lambda) t.lambda = *o.lambda;
  if (o.margin) t.margin = *o.margin;
  if (o.intra) t.intra_fraction = *o.intra;
  if (o.hbt) t.hbt_enabled = *o.hbt;
  if (o.seed) t.seed = *o.seed;
  if (o.erosion) setup.erosion_width = *o.erosion;
  if (o.workers) t.workers = *o.workers;

  std::optional<ModelParams> init;
  if (o.resume) {
    init = load_checkpoint(*o.resume);
    t.model = init->config;
  }
  t.validate();

  auto paths = list_images(o.corpus);
  std::vector<fs::path> val_paths;
  if (o.validation) {
    val_paths = list_images(*o.validation);
  } else if (paths.size() >= 3) {
    val_paths.push_back(paths.back());
    paths.pop_back();
  }
  std::vector<Image> images;
  for (const auto& p : paths) images.push_back(load_image(p));
  const Corpus corpus = make_corpus(images, t.model.piece_size, setup.erosion_width);
  std::vector<PieceGrid> validation;
  for (const auto& p : val_paths) {
    PieceGrid g = cut_puzzle(load_image(p), t.model.piece_size, 100);
    if (setup.erosion_width > 0) g = erode_grid(g, setup.erosion_width);
    validation.push_back(std::move(g));
  }

  fs::create_directories(o.out);
  const fs::path log_path = o.log ? *o.log : o.out / "train_log.jsonl";
  std::ofstream log(log_path);
  if (!log) throw DataError("cannot write " + log_path.string());
  {
    std::ofstream cfg_out(o.out / "train_config.json");
    cfg_out << dump_train_setup(setup) << '\n';
  }
  const TrainResult result = train(corpus, validation, t, std::move(init), [&](const EpochRecord& r) {
    const std::string line = to_jsonl(r);
    log << line << '\n';
    log.flush();
    std::cout << line << '\n';
  });
  save_checkpoint(result.params, o.out);
  return 0;
}

int run_cm(const CmOptions& o) {
  const PuzzleBundle bundle = load_bundle(o.bundle);
  std::optional<ModelParams> params;
  if (o.checkpoint) params = load_checkpoint(*o.checkpoint);
  const Postprocess stage = postprocess_from_name(o.postprocess);
  const auto backend = make_backend(o.backend, std::move(params));
  CMTensor t = compute_cm(bundle, *backend, o.workers);
  std::vector<std::string> warnings;
  t = postprocess(t, stage, &warnings);
  print_warnings(warnings);
  save_cm(t, o.out);
  if (o.heatmap) export_distance_map(t, bundle, *o.heatmap);
  const nlohmann::json report{{"backend", backend->name()},
                              {"N", bundle.num_pieces()},
                              {"type", to_string(bundle.problem_type)},
                              {"postprocess", o.postprocess},
                              {"top1", top1_accuracy(t, bundle)},
                              {"forward_passes", backend->network_passes()}};
  std::cout << report.dump() << '\n';
  return 0;
}

int run_solve(const SolveOptions& o) {
  const PuzzleBundle bundle = load_bundle(o.bundle);
  CMTensor t = load_cm(o.cm);
  if (t.n != bundle.num_pieces())
    throw DataError("CM holds " + std::to_string(t.n) + " pieces, bundle has " +
                    std::to_string(bundle.num_pieces()));
  if (t.type != bundle.problem_type) throw DataError("CM and bundle problem types differ");
  std::vector<std::string> warnings;
  t = postprocess(t, postprocess_from_name(o.postprocess), &warnings);
  print_warnings(warnings);
  const Placement pl = greedy_solve(t, bundle.rows, bundle.cols, o.workers);
  save_placement(pl, o.out);
  if (o.render) save_png(render_board(pl, bundle), *o.render);
  const nlohmann::json report{{"neighbor_accuracy", neighbor_accuracy(pl, bundle)},
                              {"perfect", perfect_reconstruction(pl, bundle)}};
  std::cout << report.dump() << '\n';
  return 0;
}

int run_bench(const BenchOptions& o) {
  BenchConfig cfg;
  cfg.sizes = o.sizes;
  cfg.backends = o.backends;
  cfg.repeat = o.repeat;
  cfg.analytic_only = o.analytic_only;
  cfg.seed = o.seed;
  cfg.workers = o.workers;
  std::ofstream file;
  if (o.out) {
    file.open(*o.out);
    if (!file) throw DataError("cannot write " + o.out->string());
  }
  auto emit = [&](const std::string& line) {
    std::cout << line << '\n';
    std::cout.flush();
    if (file) file << line << '\n';
  };
  const auto records = jigcm::run_bench(cfg, [&](const BenchRecord& r) { emit(to_jsonl(r)); });
  if (!o.analytic_only)
    for (const auto& [backend, slope] : fit_slopes(records, o.min_n))
      emit(nlohmann::json{{"backend", backend}, {"slope", slope}, {"min_n", o.min_n}}.dump());
  return 0;
}

int run_synth(const SynthOptionsCli& o) {
  if (o.count < 1) throw UsageError("--count must be positive");
  fs::create_directories(o.out);
  SynthOptions opt;
  opt.height = o.height;
  opt.width = o.width;
  for (int k = 0; k < o.count; ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03d.png", k);
    save_png(synth_image(opt, o.seed + k), o.out / name);
  }
  return 0;
}

}  // namespace jigcm::cli
