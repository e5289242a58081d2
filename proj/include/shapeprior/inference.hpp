#pragma once

#include <cstdint>
#include <vector>

#include "shapeprior/mlp.hpp"
#include "shapeprior/voxel.hpp"

namespace shapeprior {

struct InferConfig {
  int epochs = 1500;
  double lr_latent = 1e-3;
  double lambda = 1e-4;
  double init_std = 0.1;
  double ce_weight = 1.0;
  std::uint64_t seed = 0;
  int restarts = 1;
};

struct InferResult {
  std::vector<double> z;
  ProbGrid recon;
  double dice_vs_input = 0.0;
  double vol_err_cm3 = 0.0;
  double vol_err_pct = 0.0;
  double final_loss = 0.0;
  std::vector<double> loss_history; // per epoch, winning restart
};

// Frozen-weight latent optimization: theta is never touched; z starts from
// N(0, init_std^2) and takes cfg.epochs Adam steps. The returned z is the
// best latent seen during the run (the initial draw included), so the final
// loss never exceeds the initial loss. With restarts > 1 the restart with the
// lowest final loss wins; a restart whose loss turns non-finite is discarded,
// and it is an error when every restart fails.
InferResult infer_latent(const ShapePriorModel& model, const VoxelGrid& s,
                         const InferConfig& cfg);

} // namespace shapeprior
