#include "shapeprior/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shapeprior {

LossBreakdown loss_from_probs(const std::vector<double>& probs, const VoxelGrid& target,
                              const std::vector<double>& z, const LossWeights& w) {
  if (probs.size() != target.occ.size())
    throw std::invalid_argument("loss_from_probs: prob/target size mismatch");
  if (probs.empty()) throw std::invalid_argument("loss_from_probs: empty grid");
  if (!(w.lambda >= 0.0)) throw std::invalid_argument("loss_from_probs: lambda >= 0");

  double sum_py = 0.0, sum_p = 0.0, sum_y = 0.0, ce = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    // clamp matches the open-interval range of the stable sigmoid
    const double p = std::clamp(probs[i], 1e-300, 0x1.fffffffffffffp-1);
    const double y = target.occ[i];
    sum_py += p * y;
    sum_p += p;
    sum_y += y;
    ce += -(y * std::log(p) + (1.0 - y) * std::log1p(-p));
  }

  LossBreakdown b;
  b.soft_dice = 1.0 - (2.0 * sum_py + kDiceEps) / (sum_p + sum_y + kDiceEps);
  b.cross_entropy = ce / static_cast<double>(probs.size());
  b.latent_reg = 0.0;
  for (const double v : z) b.latent_reg += v * v;
  b.total = b.soft_dice + w.ce_weight * b.cross_entropy + w.lambda * b.latent_reg;
  return b;
}

LossNodes build_loss(autodiff::Tape& tape, autodiff::Tape::NodeId logits,
                     autodiff::Tape::NodeId probs, autodiff::Tape::NodeId z,
                     const VoxelGrid& target, const LossWeights& w) {
  if (tape.value(logits).size() != target.occ.size())
    throw std::invalid_argument("build_loss: logit/target size mismatch");
  LossNodes n;
  n.soft_dice = tape.soft_dice(probs, target.occ.data(), kDiceEps);
  n.cross_entropy = tape.bce_logits_mean(logits, target.occ.data());
  n.latent_reg = tape.sum_sq(z);
  n.total = tape.weighted_sum({n.soft_dice, n.cross_entropy, n.latent_reg},
                              {1.0, w.ce_weight, w.lambda});
  return n;
}

LossBreakdown read_loss(const autodiff::Tape& tape, const LossNodes& n) {
  LossBreakdown b;
  b.soft_dice = tape.scalar(n.soft_dice);
  b.cross_entropy = tape.scalar(n.cross_entropy);
  b.latent_reg = tape.scalar(n.latent_reg);
  b.total = tape.scalar(n.total);
  return b;
}

} // namespace shapeprior
