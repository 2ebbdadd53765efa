// SPDX-License-Identifier: Apache-2.0
#include "core/detector.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "core/error.hpp"
#include "core/text.hpp"

namespace energy_ood {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_tpr(double q) {
  require(std::isfinite(q) && q > 0.0 && q <= 1.0,
          "target TPR must lie in (0, 1], got " + format_double(q));
}

}  // namespace

void DetectorConfig::validate() const {
  validate_tpr(target_tpr);
  require(!std::isnan(tau) && tau != std::numeric_limits<double>::infinity(),
          "tau must be finite or -inf");
}

double pass_rate(std::span<const double> scores, double tau) {
  require(!scores.empty(), "pass rate of an empty score list");
  const auto passed = std::count_if(scores.begin(), scores.end(), [tau](double s) { return s > tau; });
  return static_cast<double>(passed) / static_cast<double>(scores.size());
}

DetectorConfig calibrate_threshold(std::span<const double> in_scores, double target_tpr,
                                   ScoreKind kind) {
  validate_tpr(target_tpr);
  require(!in_scores.empty(), "cannot calibrate on an empty in-distribution score list");
  for (double s : in_scores) require(std::isfinite(s), "in-distribution scores must be finite");

  const std::size_t n = in_scores.size();
  const double nd = static_cast<double>(n);
  const auto rate = [nd](std::size_t passed) { return static_cast<double>(passed) / nd; };

  // Largest k with (n - k) / n >= q, evaluated in the same arithmetic that
  // reports the achieved rate so the guarantee holds exactly.
  auto k = static_cast<std::size_t>(std::floor(nd * (1.0 - target_tpr)));
  k = std::min(k, n);
  while (k > 0 && rate(n - k) < target_tpr) --k;
  while (k < n && rate(n - k - 1) >= target_tpr) ++k;

  DetectorConfig cfg;
  cfg.target_tpr = target_tpr;
  cfg.score_kind = kind;
  if (k == 0) return cfg;

  std::vector<double> sorted(in_scores.begin(), in_scores.end());
  std::sort(sorted.begin(), sorted.end());
  double tau = sorted[k - 1];
  const auto at_or_below = [&](double t) {
    return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
  };
  if (rate(n - at_or_below(tau)) < target_tpr) {
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), tau);
    tau = first == sorted.begin() ? kNegInf : *(first - 1);
  }
  cfg.tau = tau;
  return cfg;
}

Decision classify(double score, const DetectorConfig& cfg) {
  require(!std::isnan(score), "cannot classify a NaN score");
  return Decision{score > cfg.tau ? 1 : 0, score};
}

std::optional<std::size_t> filter_and_predict(std::span<const double> logits,
                                              const DetectorConfig& cfg, Temperature temp) {
  double score = 0.0;
  switch (cfg.score_kind) {
    case ScoreKind::kNegEnergy: score = neg_energy_score(logits, temp); break;
    case ScoreKind::kMsp: score = msp_score(logits); break;
    default:
      fail(ErrorCode::kInvalidArgument, "filter_and_predict needs a logit-based score kind, got " +
                                            std::string(to_string(cfg.score_kind)));
  }
  if (classify(score, cfg).label == 0) return std::nullopt;
  return argmax(logits);
}

std::string to_json(const DetectorConfig& cfg) {
  nlohmann::ordered_json j;
  if (std::isinf(cfg.tau)) {
    j["tau"] = "-inf";
  } else {
    j["tau"] = cfg.tau;
  }
  j["target_tpr"] = cfg.target_tpr;
  j["score_kind"] = std::string(to_string(cfg.score_kind));
  return j.dump(2);
}

DetectorConfig detector_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("detector JSON: ") + e.what());
  }
  DetectorConfig cfg;
  try {
    const auto& tau = j.at("tau");
    if (tau.is_string()) {
      if (tau.get<std::string>() != "-inf") fail(ErrorCode::kParse, "tau string must be \"-inf\"");
      cfg.tau = kNegInf;
    } else {
      cfg.tau = tau.get<double>();
    }
    cfg.target_tpr = j.at("target_tpr").get<double>();
    cfg.score_kind = score_kind_from_string(j.at("score_kind").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("detector JSON: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace energy_ood
