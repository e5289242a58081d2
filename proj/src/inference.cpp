#include "shapeprior/inference.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "shapeprior/adam.hpp"
#include "shapeprior/loss.hpp"
#include "shapeprior/rng.hpp"

namespace shapeprior {

namespace {

struct RestartOutcome {
  std::vector<double> z;
  double final_loss = 0.0;
  std::vector<double> history;
};

std::optional<RestartOutcome> run_restart(const ShapePriorModel& model,
                                          const VoxelGrid& s, const Matrix& coords,
                                          const InferConfig& cfg, std::uint64_t seed) {
  const LossWeights weights{cfg.ce_weight, cfg.lambda};

  Rng rng(seed);
  std::vector<double> z(model.d);
  for (double& v : z) v = snap_f32(rng.normal(0.0, cfg.init_std));

  AdamState state(model.d);
  RestartOutcome out;
  out.history.reserve(cfg.epochs);

  std::vector<double> best_z = z;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    autodiff::Tape tape;
    const ForwardNodes f = build_forward(tape, model, z, coords, false, true);
    const LossNodes l = build_loss(tape, f.logits, f.probs, f.z, s, weights);
    const double loss = tape.scalar(l.total);
    if (!std::isfinite(loss)) return std::nullopt;
    out.history.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_z = z;
    }
    tape.backward(l.total);
    adam_step(z, tape.grad(f.z).v, state, cfg.lr_latent);
    snap_f32(z);
  }

  { // the latent after the last step is a candidate too
    autodiff::Tape tape;
    const ForwardNodes f = build_forward(tape, model, z, coords, false, false);
    const LossNodes l = build_loss(tape, f.logits, f.probs, f.z, s, weights);
    const double loss = tape.scalar(l.total);
    if (std::isfinite(loss) && loss < best_loss) {
      best_loss = loss;
      best_z = z;
    }
  }

  out.z = std::move(best_z);
  out.final_loss = best_loss;
  return out;
}

} // namespace

InferResult infer_latent(const ShapePriorModel& model, const VoxelGrid& s,
                         const InferConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("infer_latent: epochs >= 1");
  if (cfg.restarts < 1) throw std::invalid_argument("infer_latent: restarts >= 1");
  if (!(cfg.lr_latent > 0.0)) throw std::invalid_argument("infer_latent: lr > 0");
  if (s.occupied_count() == 0)
    throw std::invalid_argument("infer_latent: input shape is empty");

  const Matrix coords = normalized_coord_rows(s.dims);

  std::optional<RestartOutcome> best;
  for (int r = 0; r < cfg.restarts; ++r) {
    auto outcome =
        run_restart(model, s, coords, cfg, mix_seed(cfg.seed, 0xD000ULL + r));
    if (outcome && (!best || outcome->final_loss < best->final_loss))
      best = std::move(outcome);
  }
  if (!best) throw std::runtime_error("infer_latent: all restarts failed (non-finite loss)");

  InferResult res;
  res.z = best->z;
  res.final_loss = best->final_loss;
  res.loss_history = std::move(best->history);
  res.recon = reconstruct(model, res.z, s.dims, s.spacing_mm);
  const VoxelGrid pred = binarize(res.recon, 0.5);
  res.dice_vs_input = dice_score(pred, s);
  const VolErr e = vol_err(s, pred);
  res.vol_err_cm3 = e.cm3;
  res.vol_err_pct = e.pct;
  return res;
}

} // namespace shapeprior
