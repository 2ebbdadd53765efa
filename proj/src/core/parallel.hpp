// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace energy_ood {

// 0 selects std::thread::hardware_concurrency().
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs body(begin, end) over contiguous index chunks. Each index is visited
// exactly once, so per-index outputs are identical to a serial loop.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace energy_ood
