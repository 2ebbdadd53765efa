// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <random>
#include <stdexcept>
#include <vector>

#include "core/bench.hpp"
#include "core/mlp.hpp"
#include "core/parallel.hpp"
#include "core/scores.hpp"

using namespace energy_ood;

namespace {

struct ThreadScope {
  unsigned saved = max_threads();
  explicit ThreadScope(unsigned n) { set_max_threads(n); }
  ~ThreadScope() { set_max_threads(saved); }
};

}  // namespace

TEST_CASE("parallel_for visits every index once") {
  for (unsigned threads : {1u, 2u, 3u, 8u}) {
    ThreadScope scope(threads);
    for (std::size_t n : {0u, 1u, 255u, 256u, 257u, 10000u}) {
      std::vector<std::atomic<int>> hits(n);
      parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) hits[i].fetch_add(1);
      });
      bool once = true;
      for (const auto& h : hits) once = once && h.load() == 1;
      CHECK(once);
    }
  }
}

TEST_CASE("parallel_for rethrows worker exceptions") {
  ThreadScope scope(4);
  CHECK_THROWS_AS(parallel_for(5000, [](std::size_t b, std::size_t) {
                    if (b > 0) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("batch results do not depend on the thread count") {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd(0.0, 5.0);
  std::vector<double> logits(3000 * 7);
  for (double& v : logits) v = nd(gen);
  BenchmarkSpec spec;
  spec.n_test_in = 3000;
  const auto data = generate(spec).test_in;
  const auto model = MlpModel::init(MlpConfig{{2, 16, 3}}, 2);

  std::vector<double> e1, m1, f1;
  {
    ThreadScope scope(1);
    e1 = energy_batch(logits, 7, Temperature(1.5));
    m1 = score_batch(logits, 7, ScoreKind::kMsp, Temperature(1.0));
    f1 = model.forward_batch(as_batch(data));
  }
  for (unsigned threads : {2u, 4u, 0u}) {
    ThreadScope scope(threads);
    CHECK(energy_batch(logits, 7, Temperature(1.5)) == e1);
    CHECK(score_batch(logits, 7, ScoreKind::kMsp, Temperature(1.0)) == m1);
    CHECK(model.forward_batch(as_batch(data)) == f1);
  }
}
