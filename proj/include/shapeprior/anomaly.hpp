#pragma once

#include <map>
#include <string>
#include <vector>

#include "shapeprior/voxel.hpp"

namespace shapeprior {

// q-th percentile with linear interpolation between order statistics
// (rank = q/100 * (n-1) over the sorted values)
double percentile_linear(std::vector<double> values, double q);

// tau = q-th percentile of held-out normal Dice scores; needs >= 2 scores
double calibrate_threshold(const std::vector<double>& normal_scores,
                           double quantile = 5.0);

enum class Verdict { kNormal, kAnomalous };
const char* verdict_name(Verdict v);

// anomalous iff dice < tau (strict)
Verdict classify(double dice, double tau);

// P(normal score > anomalous score), ties counted 1/2 (Mann-Whitney)
double roc_auc(const std::vector<double>& normal_scores,
               const std::vector<double>& anomalous_scores);

struct ShapeRecord {
  std::string subject_id;
  Group group = Group::kSyntheticNormal;
  double dice = 0.0;
  double vol_err_cm3 = 0.0;
  double vol_err_pct = 0.0;
  double final_loss = 0.0;
  double volume_cm3 = 0.0;
  Verdict verdict = Verdict::kNormal;
};

struct AnomalyReport {
  double threshold = 0.0;
  double auc = 0.0;        // reconstruction Dice, normal vs anomalous
  double volume_auc = 0.0; // best volume-threshold direction: max(a, 1-a)
  std::map<std::string, double> group_mean_dice;
  std::vector<ShapeRecord> records;
};

// fills verdicts from the threshold and computes the separation statistics;
// records must contain at least one normal and one anomalous entry
AnomalyReport build_report(std::vector<ShapeRecord> records, double threshold);

} // namespace shapeprior
