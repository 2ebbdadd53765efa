// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only by tests. Nothing here
// shares code with the library paths it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace oracle {

// -T * ln(sum exp(f_i / T)) without max shifting, in long double.
inline long double naive_energy(std::span<const double> f, long double t) {
  long double s = 0.0L;
  for (double v : f) s += std::exp(static_cast<long double>(v) / t);
  return -t * std::log(s);
}

// Pairwise Mann-Whitney.
inline double auroc(const std::vector<double>& in, const std::vector<double>& out) {
  double acc = 0.0;
  for (double a : in) {
    for (double b : out) acc += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return acc / (static_cast<double>(in.size()) * static_cast<double>(out.size()));
}

// Average precision by enumerating each distinct in-score as a threshold.
inline double aupr(const std::vector<double>& in, const std::vector<double>& out) {
  std::vector<double> thresholds(in);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double ap = 0.0;
  for (double t : thresholds) {
    double tp = 0, fp = 0, at = 0;
    for (double a : in) {
      if (a >= t) ++tp;
      if (a == t) ++at;
    }
    for (double b : out) {
      if (b >= t) ++fp;
    }
    ap += tp / (tp + fp) * (at / static_cast<double>(in.size()));
  }
  return ap;
}

inline double rate_above(const std::vector<double>& s, double tau) {
  double c = 0;
  for (double v : s) {
    if (v > tau) ++c;
  }
  return c / static_cast<double>(s.size());
}

// Largest threshold among {-inf} U in whose pass rate on `in` is >= q.
inline double threshold_sweep(const std::vector<double>& in, double q) {
  double best = -std::numeric_limits<double>::infinity();
  for (double t : in) {
    if (rate_above(in, t) >= q && t > best) best = t;
  }
  return best;
}

inline double fpr_at_tpr(const std::vector<double>& in, const std::vector<double>& out, double q) {
  return rate_above(out, threshold_sweep(in, q));
}

// Central differences of f over a flat parameter vector.
inline std::vector<double> finite_difference(std::vector<double> params,
                                             const std::function<double(const std::vector<double>&)>& f,
                                             double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f(params);
    params[i] = saved - h;
    const double down = f(params);
    params[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// ||a - b|| / max(||a||, ||b||), Euclidean norms; 0 when both are zero.
inline double norm_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace oracle
