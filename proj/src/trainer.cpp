#include "shapeprior/trainer.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "shapeprior/adam.hpp"
#include "shapeprior/loss.hpp"
#include "shapeprior/rng.hpp"

namespace shapeprior {

const std::vector<double>& TrainedPrior::latent_for(const std::string& subject_id) const {
  for (std::size_t i = 0; i < subject_ids.size(); ++i)
    if (subject_ids[i] == subject_id) return latents[i];
  throw std::runtime_error("no latent for subject " + subject_id);
}

std::vector<std::vector<double>> init_latents(int n, int d, double stddev,
                                              std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("init_latents: n, d >= 1");
  if (!(stddev >= 0.0)) throw std::invalid_argument("init_latents: stddev >= 0");
  Rng rng(mix_seed(seed, 0x2B00));
  std::vector<std::vector<double>> zs(n);
  for (auto& z : zs) {
    z.resize(d);
    for (double& v : z) v = snap_f32(rng.normal(0.0, stddev));
  }
  return zs;
}

namespace {

void validate(const std::vector<VoxelGrid>& shapes, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(cfg.lr_theta > 0.0 && cfg.lr_latent > 0.0))
    throw std::invalid_argument("train: learning rates must be positive");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("train: lambda >= 0");
  if (cfg.d < 1 || cfg.hidden < 1) throw std::invalid_argument("train: d, hidden >= 1");
  if (shapes.empty()) throw std::invalid_argument("train: need at least one shape");
  for (const VoxelGrid& s : shapes) {
    if (s.occupied_count() == 0)
      throw std::invalid_argument("train: shape " + s.subject_id + " is empty");
    if (s.occ.size() != s.voxel_count())
      throw std::invalid_argument("train: malformed grid " + s.subject_id);
  }
}

} // namespace

TrainedPrior train(const std::vector<VoxelGrid>& shapes, const TrainConfig& cfg,
                   const TrainObserver& observer) {
  validate(shapes, cfg);
  const int n = static_cast<int>(shapes.size());

  TrainedPrior prior;
  prior.model = model_init(cfg.d, cfg.hidden, mix_seed(cfg.seed, 0x7E4A));
  prior.model.ce_weight = cfg.ce_weight;
  prior.model.lambda = cfg.lambda;
  prior.latents = init_latents(n, cfg.d, cfg.latent_init_std, mix_seed(cfg.seed, 0x7E4B));
  prior.subject_ids.reserve(n);
  for (const VoxelGrid& s : shapes) prior.subject_ids.push_back(s.subject_id);

  AdamState theta_state(prior.model.param_count());
  std::vector<AdamState> latent_states(n, AdamState(cfg.d));

  // coordinate batches are shared across shapes with equal dims
  std::map<std::array<int, 3>, Matrix> coord_cache;
  for (const VoxelGrid& s : shapes)
    if (coord_cache.find(s.dims) == coord_cache.end())
      coord_cache.emplace(s.dims, normalized_coord_rows(s.dims));

  const LossWeights weights{cfg.ce_weight, cfg.lambda};
  std::vector<double> theta_grad(prior.model.param_count());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  double best_mean = 0.0;
  bool have_best = false;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      for (int i = 0; i < n; ++i) order[i] = i;
      Rng erng(mix_seed(cfg.seed, 0xE90000ULL + static_cast<std::uint64_t>(epoch)));
      erng.shuffle(order);
    }

    std::vector<LossBreakdown> per_shape(n);
    for (const int si : order) {
      const VoxelGrid& s = shapes[si];
      autodiff::Tape tape;
      const ForwardNodes f =
          build_forward(tape, prior.model, prior.latents[si], coord_cache.at(s.dims),
                        true, true);
      const LossNodes l = build_loss(tape, f.logits, f.probs, f.z, s, weights);
      per_shape[si] = read_loss(tape, l);
      if (!std::isfinite(per_shape[si].total))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", shape " + s.subject_id);

      tape.backward(l.total);

      for (std::size_t t = 0; t < prior.model.tensors.size(); ++t) {
        const TensorView& tv = prior.model.tensors[t];
        const Matrix& g = tape.grad(f.theta[t]);
        for (std::size_t j = 0; j < tv.size(); ++j) theta_grad[tv.offset + j] = g.v[j];
      }
      const Matrix& gz = tape.grad(f.z);

      adam_step(prior.model.params, theta_grad, theta_state, cfg.lr_theta);
      adam_step(prior.latents[si], gz.v, latent_states[si], cfg.lr_latent);
      snap_f32(prior.model.params);
      snap_f32(prior.latents[si]);
    }

    EpochStats stats;
    for (int i = 0; i < n; ++i) { // fixed index order, independent of visit order
      stats.soft_dice += per_shape[i].soft_dice;
      stats.cross_entropy += per_shape[i].cross_entropy;
      stats.latent_reg += per_shape[i].latent_reg;
      stats.total += per_shape[i].total;
    }
    stats.soft_dice /= n;
    stats.cross_entropy /= n;
    stats.latent_reg /= n;
    stats.total /= n;
    prior.history.push_back(stats);

    if (!have_best || stats.total < best_mean) {
      best_mean = stats.total;
      have_best = true;
    }
    if (observer && !observer(epoch, prior, stats)) break;
  }

  const double final_mean = prior.history.back().total;
  if (final_mean > 1.2 * best_mean && final_mean > best_mean + 1e-12)
    throw std::runtime_error(
        "train: diverged, final mean loss " + std::to_string(final_mean) +
        " exceeds 120% of best " + std::to_string(best_mean));
  return prior;
}

} // namespace shapeprior
