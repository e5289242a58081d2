#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shapeprior/mlp.hpp"
#include "shapeprior/voxel.hpp"

namespace shapeprior {

struct TrainConfig {
  int epochs = 2500;
  double lr_theta = 1e-4;
  double lr_latent = 1e-3;
  double lambda = 1e-4;
  double latent_init_std = 0.1;
  int d = 128;
  int hidden = 512;
  double ce_weight = 1.0;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct EpochStats { // means over shapes
  double soft_dice = 0.0;
  double cross_entropy = 0.0;
  double latent_reg = 0.0;
  double total = 0.0;
};

struct TrainedPrior {
  ShapePriorModel model;
  std::vector<std::string> subject_ids;        // one per training shape
  std::vector<std::vector<double>> latents;    // aligned with subject_ids
  std::vector<EpochStats> history;

  const std::vector<double>& latent_for(const std::string& subject_id) const;
};

// called after each epoch; return false to stop training early
using TrainObserver =
    std::function<bool(int epoch, const TrainedPrior& state, const EpochStats& stats)>;

std::vector<std::vector<double>> init_latents(int n, int d, double stddev,
                                              std::uint64_t seed);

// Joint auto-decoder optimization: every epoch visits each shape once
// (full-volume batch), one simultaneous Adam step updates theta and that
// shape's latent. Separate Adam state per latent and for theta. Aborts on a
// non-finite loss; fails if the final epoch's mean loss exceeds 120% of the
// best epoch's mean loss.
TrainedPrior train(const std::vector<VoxelGrid>& shapes, const TrainConfig& cfg,
                   const TrainObserver& observer = nullptr);

} // namespace shapeprior
