// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace energy_ood {

// Softmax / energy temperature. Always strictly positive and finite.
class Temperature {
 public:
  explicit Temperature(double t = 1.0);
  double value() const noexcept { return t_; }

 private:
  double t_;
};

// Scores whose larger values mean "more in-distribution", plus raw energy
// which runs the other way.
enum class ScoreKind {
  kNegEnergy,
  kMsp,
  kNegEnergyGda,
  kMahalanobis,
};

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view name);

// Throws kInvalidArgument unless logits is non-empty and finite.
void validate_logits(std::span<const double> logits);

// T * log(sum_i exp(f_i / T)), evaluated around the maximum logit.
double log_sum_exp(std::span<const double> logits, Temperature temp);

// E(x; f) = -T * logsumexp(f / T).
double energy_score(std::span<const double> logits, Temperature temp);
double neg_energy_score(std::span<const double> logits, Temperature temp);

// E(x, y) = -f_y.
double label_energy(std::span<const double> logits, std::size_t label);

std::vector<double> softmax(std::span<const double> logits, Temperature temp);
void softmax_into(std::span<const double> logits, Temperature temp, std::span<double> out);

// Maximum softmax probability at T = 1.
double msp_score(std::span<const double> logits);

// Lowest index among the maximal logits.
std::size_t argmax(std::span<const double> logits);

// Scores `rows` consecutive logit vectors of width k. Only kNegEnergy and kMsp
// are meaningful on logits.
std::vector<double> score_batch(std::span<const double> logits, std::size_t k, ScoreKind kind,
                                Temperature temp);
std::vector<double> energy_batch(std::span<const double> logits, std::size_t k, Temperature temp);

}  // namespace energy_ood
