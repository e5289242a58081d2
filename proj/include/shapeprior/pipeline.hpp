#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shapeprior/anomaly.hpp"
#include "shapeprior/config.hpp"
#include "shapeprior/synth.hpp"
#include "shapeprior/trainer.hpp"

namespace shapeprior {

// End-to-end commands shared by the CLI and the acceptance harness. Each
// command validates its configuration before touching the filesystem, writes
// its artifacts, and finishes with a run_manifest.json (the only output whose
// bytes may differ between identical reruns, because it records duration).

struct SynthOutcome {
  std::vector<PopulationFile> rows;
};

SynthOutcome run_synth(const AppConfig& cfg, const std::filesystem::path& data_dir);

struct TrainOutcome {
  TrainedPrior prior;
  std::vector<std::string> scan_ids; // composite "<subject>_s<scan>", sorted
};

// trains on the listed subjects (default: every normal subject in the
// manifest); refuses anomalous-labeled scans in the training set. Writes
// model.inrc, latents.ltab, loss.csv, run_manifest.json into out_dir.
TrainOutcome run_train(const AppConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir,
                       const std::vector<std::string>& train_subjects = {},
                       const TrainObserver& observer = nullptr);

struct LatentPoint {
  std::string scan_id;
  std::string group;
  bool is_train = false;
  double u = 0.0, v = 0.0;
};

struct EvalOutcome {
  AnomalyReport report;
  bool lda_available = false;
  double lda_balanced_accuracy = 0.0; // train cohorts, in-sample
  double lda_hull_containment = 0.0;  // normal test latents inside train hull
  std::vector<LatentPoint> lda_points;
};

// infers a latent per held-out scan with frozen weights, calibrates the
// Dice threshold on the held-out normal scans, and writes scores.csv,
// report.json, lda.csv, lda.svg, run_manifest.json into out_dir. Default
// test set: every manifest subject absent from the checkpoint's latent table.
EvalOutcome run_eval(const AppConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& ckpt_dir,
                     const std::filesystem::path& out_dir,
                     const std::vector<std::string>& test_subjects = {});

struct XvalOutcome {
  FoldPlan plan;
  std::vector<EvalOutcome> folds; // empty entries for folds not run
};

// k-fold cross-validation over the population; anomalous subjects are
// test-only in every fold. Writes fold_<i>/ directories plus summary.json
// (omitted when only_fold limits the run to a single fold).
XvalOutcome run_xval(const AppConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& out_dir,
                     std::optional<int> only_fold = std::nullopt);

} // namespace shapeprior
