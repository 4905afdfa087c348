#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "jigcm/errors.hpp"

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kNumerical = 4;

}  // namespace

int main(int argc, char** argv) {
  using namespace jigcm::cli;
  CLI::App app{"Jigsaw-puzzle compatibility measures: cut, train, score, solve, bench"};
  app.require_subcommand(1);

  CutOptions cut;
  auto* c = app.add_subcommand("cut", "Cut images into scrambled puzzle bundles");
  c->add_option("--input", cut.input, "Image file or directory")->required();
  c->add_option("--out", cut.out, "Output directory (one bundle per image)")->required();
  c->add_option("--piece-size", cut.piece_size, "Piece side in pixels")->capture_default_str();
  c->add_option("--erosion", cut.erosion, "Zeroed outer frame width")->capture_default_str();
  c->add_option("--type", cut.type, "type1 or type2")->check(CLI::IsMember({"type1", "type2"}))
      ->capture_default_str();
  c->add_option("--seed", cut.seed, "Scramble seed")->capture_default_str();
  c->add_option("--downscale", cut.downscale, "Bicubic downscale factor before cutting")
      ->capture_default_str();
  c->add_option("--max-pieces", cut.max_pieces, "Cap on pieces per puzzle");

  TrainOptions tr;
  bool no_hbt = false;
  auto* t = app.add_subcommand("train", "Train the edge embedding network");
  t->add_option("--corpus", tr.corpus, "Training image directory")->required();
  t->add_option("--config", tr.config, "JSON config (TrainConfig/ModelConfig field names)");
  t->add_option("--out", tr.out, "Checkpoint output directory")->required();
  t->add_option("--resume", tr.resume, "Start from this checkpoint");
  t->add_option("--validation", tr.validation, "Validation image directory");
  t->add_option("--log", tr.log, "JSON-lines log path (default <out>/train_log.jsonl)");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--iterations", tr.iterations, "Iterations per epoch");
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--lambda", tr.lambda, "Weight of the embedding L2 term");
  t->add_option("--margin", tr.margin);
  t->add_option("--intra", tr.intra, "Intra-image fraction of each batch");
  t->add_flag("--no-hbt", no_hbt, "Use each sample's own negative");
  t->add_option("--seed", tr.seed);
  t->add_option("--erosion", tr.erosion, "Erosion width applied to training pieces");
  t->add_option("--workers", tr.workers);

  CmOptions cm;
  auto* m = app.add_subcommand("cm", "Compute a compatibility tensor for a bundle");
  m->add_option("--bundle", cm.bundle)->required();
  m->add_option("--backend", cm.backend, "ssd, l1, pbc, mgc, edge2vec, e2e_proxy, oracle")
      ->check(CLI::IsMember({"ssd", "l1", "pbc", "mgc", "edge2vec", "e2e_proxy", "oracle"}))
      ->capture_default_str();
  m->add_option("--checkpoint", cm.checkpoint, "Checkpoint for network backends");
  m->add_option("--postprocess", cm.postprocess, "none, scaled, symmetric, rescaled")
      ->check(CLI::IsMember({"none", "scaled", "symmetric", "rescaled"}))
      ->capture_default_str();
  m->add_option("--out", cm.out, "CMT1 output file")->required();
  m->add_option("--heatmap", cm.heatmap, "Distance-map PNG");
  m->add_option("--workers", cm.workers)->capture_default_str();

  SolveOptions so;
  auto* s = app.add_subcommand("solve", "Greedy reconstruction from a tensor");
  s->add_option("--cm", so.cm)->required();
  s->add_option("--bundle", so.bundle)->required();
  s->add_option("--out", so.out, "Placement JSON")->required();
  s->add_option("--postprocess", so.postprocess, "Applied before solving")
      ->check(CLI::IsMember({"none", "scaled", "symmetric", "rescaled"}))
      ->capture_default_str();
  s->add_option("--render", so.render, "Board PNG");
  s->add_option("--workers", so.workers)->capture_default_str();

  BenchOptions be;
  auto* b = app.add_subcommand("bench", "Wall-clock and analytic cost scaling");
  b->add_option("--sizes", be.sizes, "Puzzle sizes")->delimiter(',')->capture_default_str();
  b->add_option("--backends", be.backends)->delimiter(',')->capture_default_str();
  b->add_option("--repeat", be.repeat, "Timed runs per size (median reported)")
      ->capture_default_str();
  b->add_flag("--analytic-only", be.analytic_only, "Skip timing");
  b->add_option("--out", be.out, "JSON-lines report path");
  b->add_option("--seed", be.seed)->capture_default_str();
  b->add_option("--min-n", be.min_n, "Smallest N used in the slope fit")->capture_default_str();
  b->add_option("--workers", be.workers)->capture_default_str();

  SynthOptionsCli sy;
  auto* y = app.add_subcommand("synth", "Write synthetic test images");
  y->add_option("--out", sy.out)->required();
  y->add_option("--count", sy.count)->capture_default_str();
  y->add_option("--height", sy.height)->capture_default_str();
  y->add_option("--width", sy.width)->capture_default_str();
  y->add_option("--seed", sy.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*c) return run_cut(cut);
    if (*t) {
      if (no_hbt) tr.hbt = false;
      return run_train(tr);
    }
    if (*m) return run_cm(cm);
    if (*s) return run_solve(so);
    if (*b) return run_bench(be);
    if (*y) return run_synth(sy);
  } catch (const jigcm::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const jigcm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
