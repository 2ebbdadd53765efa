// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace energy_ood {

// Seeded streams used across the library. Distinct ids give statistically
// independent sequences from one user seed.
enum class Stream : std::uint32_t {
  kTrainIn = 1,
  kTrainOut = 2,
  kTestIn = 3,
  kTestOut = 4,
  kInit = 16,
  kShuffle = 17,
};

// mt19937_64 keyed through std::seed_seq. Both algorithms are fixed by the C++
// standard, and the real-valued transforms below are spelled out here rather
// than delegated to std::*_distribution, whose algorithms are unspecified.
class Rng {
 public:
  static constexpr std::string_view kName = "mt19937_64+seed_seq/box-muller";
  static constexpr int kVersion = 1;

  Rng(std::uint64_t seed, Stream stream);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace energy_ood
