#pragma once

#include <cstdint>
#include <vector>

#include "shapeprior/tape.hpp"
#include "shapeprior/voxel.hpp"

namespace shapeprior {

inline constexpr double kDiceEps = 1e-6;

struct LossWeights {
  double ce_weight = 1.0;
  double lambda = 1e-4;
};

struct LossBreakdown {
  double soft_dice = 0.0;
  double cross_entropy = 0.0;
  double latent_reg = 0.0;
  double total = 0.0;
};

// value-only path from probabilities:
//   soft_dice = 1 - (2*sum(p*y)+eps)/(sum(p)+sum(y)+eps)
//   cross_entropy = mean of -[y*log(p) + (1-y)*log(1-p)]
//   latent_reg = ||z||^2, total = soft_dice + ce_weight*ce + lambda*reg
LossBreakdown loss_from_probs(const std::vector<double>& probs, const VoxelGrid& target,
                              const std::vector<double>& z, const LossWeights& w);

struct LossNodes {
  autodiff::Tape::NodeId soft_dice = -1;
  autodiff::Tape::NodeId cross_entropy = -1;
  autodiff::Tape::NodeId latent_reg = -1;
  autodiff::Tape::NodeId total = -1;
};

// same quantities on the tape; CE is taken from logits for stability.
// target occupancy must outlive the tape's backward pass.
LossNodes build_loss(autodiff::Tape& tape, autodiff::Tape::NodeId logits,
                     autodiff::Tape::NodeId probs, autodiff::Tape::NodeId z,
                     const VoxelGrid& target, const LossWeights& w);

LossBreakdown read_loss(const autodiff::Tape& tape, const LossNodes& n);

} // namespace shapeprior
