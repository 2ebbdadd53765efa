// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "core/error.hpp"
#include "core/gda.hpp"

using namespace energy_ood;

namespace {

GdaModel two_unit_classes(std::vector<double> priors = {0.5, 0.5}) {
  return GdaModel({Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 0)}, Eigen::Matrix2d::Identity(), std::move(priors));
}

std::vector<double> vec(std::initializer_list<double> v) { return v; }

Eigen::MatrixXd random_spd(std::mt19937_64& gen, int d) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = nd(gen);
  return a * a.transpose() + Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST_CASE("posterior examples") {
  const auto m = two_unit_classes();
  const auto mid = gda_posterior(m, vec({0, 0}));
  CHECK(mid[0] == 0.5);
  CHECK(mid[1] == 0.5);

  const auto at_mu0 = gda_posterior(m, vec({-1, 0}));
  CHECK(std::abs(at_mu0[0] - 0.98201379003790844) < 1e-12);
  CHECK(std::abs(at_mu0[0] + at_mu0[1] - 1.0) < 1e-15);

  const auto skewed = gda_posterior(two_unit_classes({0.9, 0.1}), vec({0, 5}));
  CHECK(std::abs(skewed[0] - 0.9) < 1e-12);

  CHECK_THROWS_AS(gda_posterior(m, vec({1, 2, 3})), Error);
}

TEST_CASE("energy_u examples") {
  const auto m = two_unit_classes();
  CHECK(std::abs(energy_u(m, vec({0, 0})) - 0.30685281944005469) < 1e-12);
  CHECK(std::abs(energy_u(m, vec({-1, 0})) - -0.62120234071157908) < 1e-12);

  const GdaModel one({Eigen::Vector2d(1, 1)}, Eigen::Matrix2d::Identity() * 2.0, {1.0});
  CHECK(gda_posterior(one, vec({4, -3})) == vec({1.0}));
  CHECK(std::abs(energy_u(one, vec({3, 1})) - 2.0) < 1e-12);
}

TEST_CASE("mahalanobis examples") {
  const GdaModel m({Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 10)}, Eigen::Matrix2d::Identity(), {0.5, 0.5});
  CHECK(mahalanobis_score(m, vec({0, 0})) == 0.0);
  CHECK_FALSE(std::signbit(mahalanobis_score(m, vec({0, 0}))));
  CHECK(mahalanobis_score(m, vec({10, 10})) == 0.0);
  CHECK(std::abs(mahalanobis_score(m, vec({3, 4})) - -25.0) < 1e-12);
  const auto d = m.distances(vec({3, 4}));
  CHECK(std::abs(d[0] - 25.0) < 1e-12);
  CHECK(std::abs(d[1] - 85.0) < 1e-12);
}

TEST_CASE("model validation") {
  const std::vector<Eigen::VectorXd> means{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)};
  CHECK_THROWS_AS(GdaModel(means, Eigen::Matrix2d::Identity(), {0.6, 0.6}), Error);
  CHECK_THROWS_AS(GdaModel(means, Eigen::Matrix2d::Identity(), {1.0, 0.0}), Error);
  CHECK_THROWS_AS(GdaModel(means, Eigen::Matrix2d::Identity(), {1.0}), Error);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(GdaModel(means, asym, {0.5, 0.5}), Error);
  try {
    (void)GdaModel(means, Eigen::Matrix2d::Zero(), {0.5, 0.5});
    FAIL("expected numerical error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumerical);
  }
  // The ridge is recorded, not added: the covariance must already include it.
  CHECK_THROWS_AS(GdaModel(means, Eigen::Matrix2d::Zero(), {0.5, 0.5}, 1e-3), Error);
  CHECK(GdaModel(means, Eigen::Matrix2d::Identity() * 1e-3, {0.5, 0.5}, 1e-3).ridge() == 1e-3);
}

TEST_CASE("property: affine invariance") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 3;
    const Eigen::MatrixXd sigma = random_spd(gen, d);
    std::vector<Eigen::VectorXd> means;
    for (int c = 0; c < 3; ++c) means.push_back(Eigen::VectorXd::NullaryExpr(d, [&] { return nd(gen); }));
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return nd(gen); });
    a += 3.0 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(d, [&] { return nd(gen); });
    std::vector<Eigen::VectorXd> moved;
    for (const auto& mu : means) moved.push_back(a * mu + b);
    Eigen::MatrixXd sigma2 = a * sigma * a.transpose();
    sigma2 = 0.5 * (sigma2 + sigma2.transpose());
    const std::vector<double> priors{0.2, 0.3, 0.5};
    const GdaModel m(means, sigma, priors);
    const GdaModel m2(moved, sigma2, priors);
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(d, [&] { return nd(gen); });
    const Eigen::VectorXd x2 = a * x + b;
    const std::span<const double> xs(x.data(), 3), x2s(x2.data(), 3);
    CHECK(std::abs(energy_u(m, xs) - energy_u(m2, x2s)) < 1e-8 * std::max(1.0, std::abs(energy_u(m, xs))));
    CHECK(std::abs(mahalanobis_score(m, xs) - mahalanobis_score(m2, x2s)) <
          1e-8 * std::max(1.0, std::abs(mahalanobis_score(m, xs))));
  }
}

TEST_CASE("property: relabeling permutes the posterior and keeps energy_u") {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd sigma = random_spd(gen, 2);
    std::vector<Eigen::VectorXd> means;
    for (int c = 0; c < 3; ++c) means.push_back(Eigen::Vector2d(nd(gen), nd(gen)));
    const std::vector<double> priors{0.5, 0.3, 0.2};
    const GdaModel m(means, sigma, priors);
    const GdaModel swapped({means[2], means[0], means[1]}, sigma, {priors[2], priors[0], priors[1]});
    const auto x = vec({nd(gen), nd(gen)});
    const auto p = gda_posterior(m, x);
    const auto q = gda_posterior(swapped, x);
    CHECK(std::abs(p[2] - q[0]) < 1e-12);
    CHECK(std::abs(p[0] - q[1]) < 1e-12);
    CHECK(std::abs(p[1] - q[2]) < 1e-12);
    CHECK(std::abs(energy_u(m, x) - energy_u(swapped, x)) < 1e-10);
    CHECK(mahalanobis_score(m, x) == doctest::Approx(mahalanobis_score(swapped, x)).epsilon(1e-12));
  }
}

TEST_CASE("fit examples") {
  // Within-class deviations are (+/-1, 0), so the pooled covariance is diag(1, 0).
  const std::vector<double> x{0, 0, 2, 0, 0, 2, 2, 2};
  const std::vector<std::int32_t> y{0, 0, 1, 1};
  const auto m = fit_gda(x, 2, y, 1e-6);
  CHECK(m.means()[0].isApprox(Eigen::Vector2d(1, 0)));
  CHECK(m.means()[1].isApprox(Eigen::Vector2d(1, 2)));
  CHECK(std::abs(m.covariance()(0, 0) - (1.0 + 1e-6)) < 1e-15);
  CHECK(std::abs(m.covariance()(1, 1) - 1e-6) < 1e-18);
  CHECK(m.covariance()(0, 1) == 0.0);
  CHECK(m.priors() == vec({0.5, 0.5}));
  CHECK(m.ridge() == 1e-6);

  try {
    (void)fit_gda(x, 2, y, 0.0);
    FAIL("expected numerical error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumerical);
  }
  const std::vector<std::int32_t> gap{0, 0, 2, 2};
  CHECK_THROWS_AS(fit_gda(x, 2, gap, 1e-6), Error);
  CHECK_THROWS_AS(fit_gda(x, 2, std::vector<std::int32_t>{0, 1}, 1e-6), Error);
}

TEST_CASE("fit recovers Monte Carlo parameters") {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> nd;
  Eigen::Matrix2d l;
  l << 1.0, 0.0, 0.5, 0.8;
  const Eigen::Matrix2d sigma = l * l.transpose();
  const std::vector<Eigen::Vector2d> mu{{2, -1}, {-3, 0.5}};
  std::vector<double> x;
  std::vector<std::int32_t> y;
  for (int i = 0; i < 10000; ++i) {
    const int c = (gen() % 10 < 3) ? 1 : 0;
    const Eigen::Vector2d s = mu[c] + l * Eigen::Vector2d(nd(gen), nd(gen));
    x.push_back(s(0));
    x.push_back(s(1));
    y.push_back(c);
  }
  const auto m = fit_gda(x, 2, y);
  CHECK((m.means()[0] - mu[0]).cwiseAbs().maxCoeff() < 0.05);
  CHECK((m.means()[1] - mu[1]).cwiseAbs().maxCoeff() < 0.05);
  CHECK((m.covariance() - sigma).cwiseAbs().maxCoeff() < 0.05);
  CHECK(std::abs(m.priors()[1] - 0.3) < 0.02);
}

TEST_CASE("JSON round trip") {
  const auto m = two_unit_classes({0.25, 0.75});
  const auto back = gda_from_json(to_json(m));
  CHECK(back.classes() == 2);
  CHECK(back.dim() == 2);
  CHECK(back.priors() == m.priors());
  CHECK(back.covariance() == m.covariance());
  CHECK(energy_u(back, vec({0.3, -0.2})) == energy_u(m, vec({0.3, -0.2})));
  CHECK_THROWS_AS(gda_from_json("{}"), Error);
  CHECK_THROWS_AS(gda_from_json("not json"), Error);
}
