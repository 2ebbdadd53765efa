// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "core/error.hpp"
#include "core/scores.hpp"
#include "oracles.hpp"

using namespace energy_ood;

namespace {

std::vector<double> random_logits(std::mt19937_64& gen, std::size_t k, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> f(k);
  for (double& v : f) v = u(gen);
  return f;
}

}  // namespace

TEST_CASE("energy_score examples") {
  const std::vector<double> zeros(10, 0.0);
  CHECK(energy_score(zeros, Temperature(1.0)) == doctest::Approx(-std::log(10.0)).epsilon(1e-15));

  const std::vector<double> f{1, 2, 3};
  // 40-digit reference values.
  CHECK(std::abs(energy_score(f, Temperature(1.0)) - -3.4076059644443803) < 1e-14);
  CHECK(std::abs(energy_score(f, Temperature(2.0)) - -4.3605393412834692) < 1e-14);

  const std::vector<double> big{1000, 1000};
  CHECK(std::abs(energy_score(big, Temperature(1.0)) - -(1000.0 + std::log(2.0))) < 1e-9);
}

TEST_CASE("label_energy is the negated logit") {
  CHECK(label_energy(std::vector<double>{1, 2, 3}, 2) == -3.0);
  CHECK(label_energy(std::vector<double>{0, 0}, 0) == 0.0);
  CHECK(label_energy(std::vector<double>{-4.5, 7.25}, 1) == -7.25);
  CHECK_THROWS_AS(label_energy(std::vector<double>{1, 2}, 2), Error);
}

TEST_CASE("softmax and msp examples") {
  const auto half = softmax(std::vector<double>{0, 0}, Temperature(1.0));
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);

  const auto p = softmax(std::vector<double>{1, 2, 3}, Temperature(1.0));
  CHECK(std::abs(p[0] - 0.09003057317038046) < 1e-15);
  CHECK(std::abs(p[1] - 0.24472847105479765) < 1e-15);
  CHECK(std::abs(p[2] - 0.66524095577482189) < 1e-15);

  for (double t : {0.5, 1.0, 7.0}) {
    const auto u = softmax(std::vector<double>(5, -3.25), Temperature(t));
    for (double v : u) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  }

  CHECK(msp_score(std::vector<double>{0, 0}) == 0.5);
  CHECK(std::abs(msp_score(std::vector<double>{1, 2, 3}) - 0.66524095577482189) < 1e-15);
  CHECK(msp_score(std::vector<double>{7}) == 1.0);
}

TEST_CASE("neg_energy_score mirrors energy_score") {
  CHECK(neg_energy_score(std::vector<double>(10, 0.0), Temperature(1.0)) == doctest::Approx(std::log(10.0)));
  CHECK(std::abs(neg_energy_score(std::vector<double>{1, 2, 3}, Temperature(1.0)) - 3.4076059644443803) < 1e-14);
}

TEST_CASE("K = 1 is permitted") {
  const std::vector<double> f{-2.5};
  CHECK(energy_score(f, Temperature(3.0)) == 2.5);
  CHECK(msp_score(f) == 1.0);
}

TEST_CASE("input validation") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(energy_score(std::vector<double>{1.0, nan}, Temperature(1.0)), Error);
  CHECK_THROWS_AS(energy_score(std::vector<double>{inf}, Temperature(1.0)), Error);
  CHECK_THROWS_AS(energy_score(std::vector<double>{}, Temperature(1.0)), Error);
  CHECK_THROWS_AS(Temperature(0.0), Error);
  CHECK_THROWS_AS(Temperature(-1.0), Error);
  CHECK_THROWS_AS(Temperature{nan}, Error);
  CHECK_THROWS_AS(softmax(std::vector<double>{nan}, Temperature(1.0)), Error);
}

TEST_CASE("property: shift covariance and shift invariance") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> shift(-50, 50);
  std::uniform_int_distribution<std::size_t> kdist(1, 32);
  for (int trial = 0; trial < 500; ++trial) {
    const auto f = random_logits(gen, kdist(gen), -10, 10);
    const double c = shift(gen);
    const double t = 0.25 + 4.0 * std::generate_canonical<double, 53>(gen);
    std::vector<double> g(f);
    for (double& v : g) v += c;
    CHECK(std::abs(energy_score(g, Temperature(t)) - (energy_score(f, Temperature(t)) - c)) < 1e-10);
    const auto p = softmax(f, Temperature(t));
    const auto q = softmax(g, Temperature(t));
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
  }
}

TEST_CASE("property: log msp = energy + max logit") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<std::size_t> kdist(1, 64);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = random_logits(gen, kdist(gen), -30, 30);
    const double fmax = *std::max_element(f.begin(), f.end());
    CHECK(std::abs(std::log(msp_score(f)) - (energy_score(f, Temperature(1.0)) + fmax)) <= 1e-9);
  }
}

TEST_CASE("property: smooth-max bounds and stability") {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<std::size_t> kdist(1, 40);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = kdist(gen);
    const auto f = random_logits(gen, k, -1e4, 1e4);
    const double t = 0.1 + 100.0 * std::generate_canonical<double, 53>(gen);
    const double fmax = *std::max_element(f.begin(), f.end());
    const double e = energy_score(f, Temperature(t));
    REQUIRE(std::isfinite(e));
    const double slack = 1e-9 * std::max(1.0, std::abs(fmax));
    CHECK(e <= -fmax + slack);
    CHECK(e >= -fmax - t * std::log(static_cast<double>(k)) - slack);
  }
}

TEST_CASE("property: matches naive extended-precision summation") {
  std::mt19937_64 gen(23);
  std::uniform_int_distribution<std::size_t> kdist(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto f = random_logits(gen, kdist(gen), -5, 5);
    const double t = 0.5 + 3.0 * std::generate_canonical<double, 53>(gen);
    const long double ref = oracle::naive_energy(f, t);
    CHECK(std::abs(static_cast<long double>(energy_score(f, Temperature(t))) - ref) < 1e-10L);
  }
}

TEST_CASE("batch scoring preserves order") {
  const std::vector<double> logits{1, 2, 3, 0, 0, 0, 5, 1, 1};
  const auto s = score_batch(logits, 3, ScoreKind::kNegEnergy, Temperature(1.0));
  REQUIRE(s.size() == 3);
  CHECK(s[0] == neg_energy_score(std::vector<double>{1, 2, 3}, Temperature(1.0)));
  CHECK(s[1] == neg_energy_score(std::vector<double>{0, 0, 0}, Temperature(1.0)));
  CHECK(s[2] == neg_energy_score(std::vector<double>{5, 1, 1}, Temperature(1.0)));
  const auto m = score_batch(logits, 3, ScoreKind::kMsp, Temperature(1.0));
  CHECK(m[1] == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(score_batch(logits, 4, ScoreKind::kMsp, Temperature(1.0)), Error);
  CHECK_THROWS_AS(score_batch(logits, 3, ScoreKind::kMahalanobis, Temperature(1.0)), Error);
}
