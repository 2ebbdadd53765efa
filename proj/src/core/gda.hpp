// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"

namespace energy_ood {

inline constexpr double kDefaultRidge = 1e-6;

// Class-conditional Gaussians over feature vectors with one shared
// covariance. The covariance is held together with its Cholesky factor; all
// Mahalanobis terms go through triangular solves.
//
// Class distance d_c(x) = (x - mu_c)^T Sigma^-1 (x - mu_c) is used without a
// 1/2 factor, so the posterior is softmax_c(-d_c + ln pi_c).
class GdaModel {
 public:
  // Throws kInvalidArgument on shape or prior violations and kNumerical when
  // the covariance is not symmetric positive definite.
  GdaModel(std::vector<Eigen::VectorXd> means, Eigen::MatrixXd covariance, std::vector<double> priors,
           double ridge = 0.0);

  std::size_t classes() const { return means_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(covariance_.rows()); }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const std::vector<double>& priors() const { return priors_; }
  double ridge() const { return ridge_; }

  std::vector<double> distances(std::span<const double> x) const;

 private:
  std::vector<Eigen::VectorXd> means_;
  Eigen::MatrixXd covariance_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  std::vector<double> priors_;
  double ridge_;
};

// Class means, pooled within-class covariance (divided by N) plus ridge * I,
// and class frequencies as priors. Labels must cover 0..K-1.
GdaModel fit_gda(const Dataset& data, double ridge = kDefaultRidge);
GdaModel fit_gda(std::span<const double> features, std::size_t dim, std::span<const std::int32_t> labels,
                 double ridge = kDefaultRidge);

std::vector<double> gda_posterior(const GdaModel& model, std::span<const double> x);

// sum_c [d_c(x) + ln pi_c] * P(y = c | x).
double energy_u(const GdaModel& model, std::span<const double> x);

// -min_c d_c(x); 0 exactly at a class mean, negative elsewhere.
double mahalanobis_score(const GdaModel& model, std::span<const double> x);

// {"dimension", "K", "means", "covariance" (row-major), "priors", "ridge"}.
// The stored covariance already includes the ridge.
std::string to_json(const GdaModel& model);
GdaModel gda_from_json(std::string_view text);

}  // namespace energy_ood
