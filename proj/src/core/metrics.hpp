// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace energy_ood {

// In-distribution scores are the positive class (label 1), OOD scores the
// negative class. Higher score = more in-distribution.
struct ScoreSet {
  std::vector<double> in_scores;
  std::vector<double> out_scores;

  void validate() const;
};

struct MetricsReport {
  double fpr_at_tpr = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  double tpr_target = 0.95;
  // AUPR with OOD as the positive class and negated scores; only filled on
  // request.
  std::optional<double> aupr_out;
};

// Fraction of OOD scores above the threshold calibrated on the in scores.
double fpr_at_tpr(const ScoreSet& set, double q);

// Mann-Whitney statistic; ties count one half.
double auroc(const ScoreSet& set);

// Average precision with in-distribution as positive; tied scores form a
// single operating point.
double aupr(const ScoreSet& set);

MetricsReport full_report(const ScoreSet& set, double q, bool both_orientations = false);

std::string to_json(const MetricsReport& report);

}  // namespace energy_ood
