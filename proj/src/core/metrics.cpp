// SPDX-License-Identifier: Apache-2.0
#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <json.hpp>

#include "core/detector.hpp"
#include "core/error.hpp"

namespace energy_ood {

void ScoreSet::validate() const {
  require(!in_scores.empty(), "score set has no in-distribution scores");
  require(!out_scores.empty(), "score set has no out-of-distribution scores");
  for (double s : in_scores) require(std::isfinite(s), "in-distribution score is not finite");
  for (double s : out_scores) require(std::isfinite(s), "out-of-distribution score is not finite");
}

double fpr_at_tpr(const ScoreSet& set, double q) {
  set.validate();
  const DetectorConfig cfg = calibrate_threshold(set.in_scores, q);
  return pass_rate(set.out_scores, cfg.tau);
}

double auroc(const ScoreSet& set) {
  set.validate();
  std::vector<double> in(set.in_scores);
  std::sort(in.begin(), in.end());
  // Twice the Mann-Whitney U, kept integral so ties are exact.
  std::uint64_t u2 = 0;
  for (double o : set.out_scores) {
    const auto lo = std::lower_bound(in.begin(), in.end(), o);
    const auto hi = std::upper_bound(lo, in.end(), o);
    u2 += 2 * static_cast<std::uint64_t>(in.end() - hi) + static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = static_cast<double>(in.size()) * static_cast<double>(set.out_scores.size());
  return static_cast<double>(u2) / 2.0 / pairs;
}

namespace {

double average_precision(std::span<const double> positives, std::span<const double> negatives) {
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double s : positives) items.push_back({s, true});
  for (double s : negatives) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });

  const double n_pos = static_cast<double>(positives.size());
  std::size_t tp = 0;
  std::size_t seen = 0;
  double ap = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t group_pos = 0;
    std::size_t j = i;
    for (; j < items.size() && items[j].score == items[i].score; ++j) {
      if (items[j].positive) ++group_pos;
    }
    tp += group_pos;
    seen += j - i;
    if (group_pos > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += precision * static_cast<double>(group_pos);
    }
    i = j;
  }
  // One final division keeps AP <= 1 and exact on perfect separation.
  return ap / n_pos;
}

}  // namespace

double aupr(const ScoreSet& set) {
  set.validate();
  return average_precision(set.in_scores, set.out_scores);
}

MetricsReport full_report(const ScoreSet& set, double q, bool both_orientations) {
  MetricsReport r;
  r.fpr_at_tpr = fpr_at_tpr(set, q);
  r.auroc = auroc(set);
  r.aupr = aupr(set);
  r.n_in = set.in_scores.size();
  r.n_out = set.out_scores.size();
  r.tpr_target = q;
  if (both_orientations) {
    std::vector<double> neg_in(set.in_scores.size());
    std::vector<double> neg_out(set.out_scores.size());
    std::transform(set.in_scores.begin(), set.in_scores.end(), neg_in.begin(), [](double s) { return -s; });
    std::transform(set.out_scores.begin(), set.out_scores.end(), neg_out.begin(), [](double s) { return -s; });
    r.aupr_out = average_precision(neg_out, neg_in);
  }
  return r;
}

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["fpr_at_tpr"] = report.fpr_at_tpr;
  j["auroc"] = report.auroc;
  j["aupr"] = report.aupr;
  j["n_in"] = report.n_in;
  j["n_out"] = report.n_out;
  j["tpr_target"] = report.tpr_target;
  if (report.aupr_out) j["aupr_out"] = *report.aupr_out;
  return j.dump(2);
}

}  // namespace energy_ood
