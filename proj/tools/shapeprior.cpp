#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "shapeprior/config.hpp"
#include "shapeprior/pipeline.hpp"

namespace {

struct CliState {
  shapeprior::AppConfig cfg;
  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::string ckpt_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> fold;
  std::optional<int> k;
  std::optional<int> grid;
  std::optional<int> epochs;
  std::optional<int> infer_epochs;
  bool single_thread = false;
};

void add_common(CLI::App* cmd, CliState& st, bool with_out) {
  cmd->add_option("--config", st.config_path, "key=value configuration file");
  cmd->add_option("--seed", st.seed, "root seed (overrides the config file)");
  if (with_out)
    cmd->add_option("--out", st.out_dir, "output directory")->required();
  cmd->add_flag("--single-thread", st.single_thread,
                "accepted for compatibility; execution is single-threaded");
  cmd->add_option("--grid", st.grid, "voxel grid resolution per axis");
  cmd->add_option("--epochs", st.epochs, "training epochs");
  cmd->add_option("--infer-epochs", st.infer_epochs, "latent inference epochs");
}

// config file first, then explicit flags on top
void finalize_config(CliState& st) {
  if (!st.config_path.empty())
    shapeprior::load_config_file(st.cfg, st.config_path);
  if (st.seed) st.cfg.seed = *st.seed;
  if (st.k) st.cfg.k = *st.k;
  if (st.grid) st.cfg.pop.grid = *st.grid;
  if (st.epochs) st.cfg.train.epochs = *st.epochs;
  if (st.infer_epochs) st.cfg.infer.epochs = *st.infer_epochs;
  shapeprior::validate_config(st.cfg);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional occupancy shape prior over voxel volumes"};
  app.require_subcommand(1);

  CliState st;

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic population with a manifest");
  add_common(synth, st, true);

  CLI::App* train = app.add_subcommand(
      "train", "fit the shape prior on the normal subjects of a population");
  train->add_option("data_dir", st.data_dir, "population directory")->required();
  add_common(train, st, true);

  CLI::App* eval = app.add_subcommand(
      "eval", "score held-out subjects against a trained prior");
  eval->add_option("data_dir", st.data_dir, "population directory")->required();
  eval->add_option("ckpt_dir", st.ckpt_dir, "directory with model.inrc + latents.ltab")
      ->required();
  add_common(eval, st, true);

  CLI::App* xval = app.add_subcommand(
      "xval", "k-fold cross-validation over a population");
  xval->add_option("data_dir", st.data_dir, "population directory")->required();
  add_common(xval, st, true);
  xval->add_option("--fold", st.fold, "run a single fold index");
  xval->add_option("--k", st.k, "number of folds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    finalize_config(st);
    if (synth->parsed()) {
      shapeprior::run_synth(st.cfg, st.out_dir);
    } else if (train->parsed()) {
      shapeprior::run_train(st.cfg, st.data_dir, st.out_dir);
    } else if (eval->parsed()) {
      shapeprior::run_eval(st.cfg, st.data_dir, st.ckpt_dir, st.out_dir);
    } else if (xval->parsed()) {
      shapeprior::run_xval(st.cfg, st.data_dir, st.out_dir, st.fold);
    }
  } catch (const shapeprior::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
