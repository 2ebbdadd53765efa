// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "core/scores.hpp"

namespace energy_ood {

// Threshold on a higher-is-in-distribution score axis. tau = -inf accepts
// every sample.
struct DetectorConfig {
  double tau = -std::numeric_limits<double>::infinity();
  double target_tpr = 0.95;
  ScoreKind score_kind = ScoreKind::kNegEnergy;

  void validate() const;
};

// label is 1 for in-distribution, 0 for OOD.
struct Decision {
  int label = 0;
  double score = 0.0;
};

// Picks the largest tau in {-inf} U in_scores whose pass rate
// |{s > tau}| / N is at least target_tpr. With k = max{j : (N - j) / N >= q},
// tau starts at the k-th smallest score and steps down to the next distinct
// value (or -inf) when ties at tau would drop the pass rate below q.
DetectorConfig calibrate_threshold(std::span<const double> in_scores, double target_tpr,
                                   ScoreKind kind = ScoreKind::kNegEnergy);

// Fraction of scores strictly above tau.
double pass_rate(std::span<const double> scores, double tau);

Decision classify(double score, const DetectorConfig& cfg);

// Score the logits, reject on label 0, otherwise return the argmax class.
std::optional<std::size_t> filter_and_predict(std::span<const double> logits,
                                              const DetectorConfig& cfg, Temperature temp);

std::string to_json(const DetectorConfig& cfg);
DetectorConfig detector_from_json(std::string_view text);

}  // namespace energy_ood
