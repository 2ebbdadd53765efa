// SPDX-License-Identifier: Apache-2.0
#include "core/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace energy_ood {

namespace {
std::atomic<unsigned> g_max_threads{1};
constexpr std::size_t kMinChunk = 256;
}  // namespace

void set_max_threads(unsigned n) {
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  g_max_threads.store(n);
}

unsigned max_threads() { return g_max_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(max_threads(), (n + kMinChunk - 1) / kMinChunk);
  if (workers <= 1) {
    if (n > 0) body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace energy_ood
