// SPDX-License-Identifier: Apache-2.0
#include "core/gda.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "core/error.hpp"

namespace energy_ood {

GdaModel::GdaModel(std::vector<Eigen::VectorXd> means, Eigen::MatrixXd covariance, std::vector<double> priors,
                   double ridge)
    : means_(std::move(means)), covariance_(std::move(covariance)), priors_(std::move(priors)), ridge_(ridge) {
  require(!means_.empty(), "GDA model needs at least one class");
  require(covariance_.rows() >= 1 && covariance_.rows() == covariance_.cols(), "covariance must be square");
  for (const auto& m : means_) {
    require(m.size() == covariance_.rows(), "class mean dimension does not match covariance");
    require(m.allFinite(), "class means must be finite");
  }
  require(priors_.size() == means_.size(), "need one prior per class");
  double sum = 0.0;
  for (double p : priors_) {
    require(std::isfinite(p) && p > 0.0, "priors must be positive");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-12, "priors must sum to 1");
  require(std::isfinite(ridge_) && ridge_ >= 0.0, "ridge must be >= 0");
  require(covariance_.allFinite(), "covariance must be finite");
  require((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() <= 1e-10, "covariance must be symmetric");

  chol_.compute(covariance_);
  bool spd = chol_.info() == Eigen::Success;
  if (spd) {
    const Eigen::MatrixXd l = chol_.matrixL();
    spd = (l.diagonal().array() > 0.0).all() && l.allFinite();
  }
  if (!spd) fail(ErrorCode::kNumerical, "covariance is not positive definite (add ridge)");
}

std::vector<double> GdaModel::distances(std::span<const double> x) const {
  if (x.size() != dim()) {
    fail(ErrorCode::kInvalidArgument, "feature vector has dimension " + std::to_string(x.size()) +
                                          ", model expects " + std::to_string(dim()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  std::vector<double> d(classes());
  for (std::size_t c = 0; c < classes(); ++c) {
    const Eigen::VectorXd w = chol_.matrixL().solve(v - means_[c]);
    d[c] = w.squaredNorm();
  }
  return d;
}

GdaModel fit_gda(std::span<const double> features, std::size_t dim, std::span<const std::int32_t> labels,
                 double ridge) {
  require(dim >= 1, "feature dimension must be >= 1");
  require(features.size() % dim == 0, "features are not a whole number of rows");
  const std::size_t n = features.size() / dim;
  require(n >= 1, "cannot fit GDA on no samples");
  require(labels.size() == n, "need one label per feature row");
  require(std::isfinite(ridge) && ridge >= 0.0, "ridge must be >= 0");
  std::int32_t max_label = -1;
  for (std::int32_t y : labels) {
    require(y >= 0, "GDA fit needs every row labeled");
    max_label = std::max(max_label, y);
  }
  const auto k = static_cast<std::size_t>(max_label) + 1;
  const auto d = static_cast<Eigen::Index>(dim);

  std::vector<Eigen::VectorXd> means(k, Eigen::VectorXd::Zero(d));
  std::vector<std::size_t> counts(k, 0);
  const auto row = [&](std::size_t i) {
    return Eigen::Map<const Eigen::VectorXd>(features.data() + i * dim, d);
  };
  for (std::size_t i = 0; i < n; ++i) {
    means[static_cast<std::size_t>(labels[i])] += row(i);
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) fail(ErrorCode::kInvalidArgument, "class " + std::to_string(c) + " has no samples");
    means[c] /= static_cast<double>(counts[c]);
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd r = row(i) - means[static_cast<std::size_t>(labels[i])];
    cov.noalias() += r * r.transpose();
  }
  cov /= static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += ridge;

  std::vector<double> priors(k);
  for (std::size_t c = 0; c < k; ++c) priors[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
  // Renormalize so the sum is 1 to rounding.
  double sum = 0.0;
  for (double p : priors) sum += p;
  for (double& p : priors) p /= sum;
  return GdaModel(std::move(means), std::move(cov), std::move(priors), ridge);
}

GdaModel fit_gda(const Dataset& data, double ridge) {
  data.validate();
  return fit_gda(data.inputs, data.dim, data.labels, ridge);
}

std::vector<double> gda_posterior(const GdaModel& model, std::span<const double> x) {
  const std::vector<double> d = model.distances(x);
  std::vector<double> logit(d.size());
  for (std::size_t c = 0; c < d.size(); ++c) logit[c] = -d[c] + std::log(model.priors()[c]);
  const double m = *std::max_element(logit.begin(), logit.end());
  double sum = 0.0;
  for (double& v : logit) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : logit) v /= sum;
  return logit;
}

double energy_u(const GdaModel& model, std::span<const double> x) {
  const std::vector<double> d = model.distances(x);
  const std::vector<double> p = gda_posterior(model, x);
  double e = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) e += (d[c] + std::log(model.priors()[c])) * p[c];
  return e;
}

double mahalanobis_score(const GdaModel& model, std::span<const double> x) {
  const std::vector<double> d = model.distances(x);
  // 0.0 - d rather than -d so a zero distance gives +0.
  return 0.0 - *std::min_element(d.begin(), d.end());
}

std::string to_json(const GdaModel& model) {
  nlohmann::ordered_json j;
  j["dimension"] = model.dim();
  j["K"] = model.classes();
  auto means = nlohmann::ordered_json::array();
  for (const auto& m : model.means()) means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
  j["means"] = means;
  std::vector<double> cov;
  for (Eigen::Index r = 0; r < model.covariance().rows(); ++r) {
    for (Eigen::Index c = 0; c < model.covariance().cols(); ++c) cov.push_back(model.covariance()(r, c));
  }
  j["covariance"] = cov;
  j["priors"] = model.priors();
  j["ridge"] = model.ridge();
  return j.dump(2);
}

GdaModel gda_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto dim = j.at("dimension").get<std::size_t>();
    const auto k = j.at("K").get<std::size_t>();
    const auto raw_means = j.at("means").get<std::vector<std::vector<double>>>();
    const auto raw_cov = j.at("covariance").get<std::vector<double>>();
    if (raw_means.size() != k) fail(ErrorCode::kParse, "GDA JSON: means count does not match K");
    if (raw_cov.size() != dim * dim) fail(ErrorCode::kParse, "GDA JSON: covariance is not dimension^2 long");
    std::vector<Eigen::VectorXd> means;
    for (const auto& m : raw_means) {
      if (m.size() != dim) fail(ErrorCode::kParse, "GDA JSON: mean has wrong dimension");
      means.push_back(Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(dim)));
    }
    const auto d = static_cast<Eigen::Index>(dim);
    const Eigen::MatrixXd cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(raw_cov.data(), d, d);
    return GdaModel(std::move(means), cov, j.at("priors").get<std::vector<double>>(), j.at("ridge").get<double>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("GDA JSON: ") + e.what());
  }
}

}  // namespace energy_ood
