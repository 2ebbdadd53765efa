// SPDX-License-Identifier: Apache-2.0
#include "core/scores.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"
#include "core/text.hpp"
#include "core/parallel.hpp"

namespace energy_ood {

Temperature::Temperature(double t) : t_(t) {
  require(std::isfinite(t) && t > 0.0, "temperature must be finite and > 0, got " + format_double(t));
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kNegEnergy: return "neg_energy";
    case ScoreKind::kMsp: return "msp";
    case ScoreKind::kNegEnergyGda: return "neg_energy_gda";
    case ScoreKind::kMahalanobis: return "mahalanobis";
  }
  return "unknown";
}

ScoreKind score_kind_from_string(std::string_view name) {
  if (name == "neg_energy") return ScoreKind::kNegEnergy;
  if (name == "msp") return ScoreKind::kMsp;
  if (name == "neg_energy_gda") return ScoreKind::kNegEnergyGda;
  if (name == "mahalanobis") return ScoreKind::kMahalanobis;
  fail(ErrorCode::kParse, "unknown score kind '" + std::string(name) + "'");
}

void validate_logits(std::span<const double> logits) {
  require(!logits.empty(), "logit vector must have at least one entry");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) {
      fail(ErrorCode::kInvalidArgument, "logit " + std::to_string(i) + " is not finite");
    }
  }
}

namespace {

// Sum of exp((f_i - max) / T); always in [1, K].
double shifted_partition(std::span<const double> logits, double max_logit, double t) {
  double sum = 0.0;
  for (double f : logits) sum += std::exp((f - max_logit) / t);
  return sum;
}

}  // namespace

double log_sum_exp(std::span<const double> logits, Temperature temp) {
  validate_logits(logits);
  const double t = temp.value();
  const double m = *std::max_element(logits.begin(), logits.end());
  return m + t * std::log(shifted_partition(logits, m, t));
}

double energy_score(std::span<const double> logits, Temperature temp) {
  return -log_sum_exp(logits, temp);
}

double neg_energy_score(std::span<const double> logits, Temperature temp) {
  return log_sum_exp(logits, temp);
}

double label_energy(std::span<const double> logits, std::size_t label) {
  validate_logits(logits);
  if (label >= logits.size()) {
    fail(ErrorCode::kOutOfRange, "label " + std::to_string(label) + " out of range for K=" +
                                     std::to_string(logits.size()));
  }
  return -logits[label];
}

void softmax_into(std::span<const double> logits, Temperature temp, std::span<double> out) {
  validate_logits(logits);
  require(out.size() == logits.size(), "softmax output size mismatch");
  const double t = temp.value();
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - m) / t);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
}

std::vector<double> softmax(std::span<const double> logits, Temperature temp) {
  std::vector<double> out(logits.size());
  softmax_into(logits, temp, out);
  return out;
}

double msp_score(std::span<const double> logits) {
  validate_logits(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  return 1.0 / shifted_partition(logits, m, 1.0);
}

std::size_t argmax(std::span<const double> logits) {
  validate_logits(logits);
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

namespace {

template <typename F>
std::vector<double> map_rows(std::span<const double> logits, std::size_t k, F&& f) {
  require(k >= 1, "class count must be >= 1");
  require(logits.size() % k == 0, "logit buffer is not a whole number of rows");
  const std::size_t rows = logits.size() / k;
  std::vector<double> out(rows);
  parallel_for(rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) out[r] = f(logits.subspan(r * k, k));
  });
  return out;
}

}  // namespace

std::vector<double> score_batch(std::span<const double> logits, std::size_t k, ScoreKind kind,
                                Temperature temp) {
  switch (kind) {
    case ScoreKind::kNegEnergy:
      return map_rows(logits, k, [&](auto row) { return neg_energy_score(row, temp); });
    case ScoreKind::kMsp:
      return map_rows(logits, k, [](auto row) { return msp_score(row); });
    default:
      fail(ErrorCode::kInvalidArgument,
           "score kind " + std::string(to_string(kind)) + " is not computed from logits");
  }
}

std::vector<double> energy_batch(std::span<const double> logits, std::size_t k, Temperature temp) {
  return map_rows(logits, k, [&](auto row) { return energy_score(row, temp); });
}

}  // namespace energy_ood
