#include "shapeprior/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shapeprior {

double percentile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty input");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile: q in [0,100]");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double calibrate_threshold(const std::vector<double>& normal_scores, double quantile) {
  if (normal_scores.size() < 2)
    throw std::invalid_argument("calibrate_threshold: need at least 2 scores");
  if (!(quantile > 0.0 && quantile < 100.0))
    throw std::invalid_argument("calibrate_threshold: quantile in (0,100)");
  return percentile_linear(normal_scores, quantile);
}

const char* verdict_name(Verdict v) {
  return v == Verdict::kNormal ? "normal" : "anomalous";
}

Verdict classify(double dice, double tau) {
  if (!(dice >= 0.0 && dice <= 1.0))
    throw std::invalid_argument("classify: dice must be in [0,1]");
  return dice < tau ? Verdict::kAnomalous : Verdict::kNormal;
}

double roc_auc(const std::vector<double>& normal_scores,
               const std::vector<double>& anomalous_scores) {
  if (normal_scores.empty() || anomalous_scores.empty())
    throw std::invalid_argument("roc_auc: both score lists must be nonempty");

  // rank-sum form: AUC = (R_normal - n(n+1)/2) / (n*m), mid-ranks for ties
  struct Tagged {
    double score;
    bool normal;
  };
  std::vector<Tagged> all;
  all.reserve(normal_scores.size() + anomalous_scores.size());
  for (const double s : normal_scores) all.push_back({s, true});
  for (const double s : anomalous_scores) all.push_back({s, false});
  std::stable_sort(all.begin(), all.end(),
                   [](const Tagged& a, const Tagged& b) { return a.score < b.score; });

  double rank_sum_normal = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t)
      if (all[t].normal) rank_sum_normal += mid_rank;
    i = j;
  }
  const double n = static_cast<double>(normal_scores.size());
  const double m = static_cast<double>(anomalous_scores.size());
  return (rank_sum_normal - n * (n + 1.0) / 2.0) / (n * m);
}

AnomalyReport build_report(std::vector<ShapeRecord> records, double threshold) {
  std::vector<double> dice_normal, dice_anom, vol_normal, vol_anom;
  std::map<std::string, std::pair<double, int>> sums;
  for (ShapeRecord& r : records) {
    r.verdict = classify(r.dice, threshold);
    auto& [sum, count] = sums[group_name(r.group)];
    sum += r.dice;
    count += 1;
    if (r.group == Group::kSyntheticAnomalous || r.group == Group::kSarcopenic) {
      dice_anom.push_back(r.dice);
      vol_anom.push_back(r.volume_cm3);
    } else {
      dice_normal.push_back(r.dice);
      vol_normal.push_back(r.volume_cm3);
    }
  }
  if (dice_normal.empty() || dice_anom.empty())
    throw std::invalid_argument("build_report: need both normal and anomalous records");

  AnomalyReport rep;
  rep.threshold = threshold;
  rep.records = std::move(records);
  rep.auc = roc_auc(dice_normal, dice_anom);
  const double va = roc_auc(vol_normal, vol_anom);
  rep.volume_auc = std::max(va, 1.0 - va);
  for (const auto& [name, sc] : sums)
    rep.group_mean_dice[name] = sc.first / static_cast<double>(sc.second);
  return rep;
}

} // namespace shapeprior
