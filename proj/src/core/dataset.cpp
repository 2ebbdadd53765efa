// SPDX-License-Identifier: Apache-2.0
#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace energy_ood {

bool Dataset::labeled() const {
  return !labels.empty() &&
         std::none_of(labels.begin(), labels.end(), [](std::int32_t l) { return l == kNoLabel; });
}

void Dataset::validate() const {
  require(dim >= 1, "dataset dimension must be >= 1");
  require(inputs.size() % dim == 0, "dataset inputs are not a whole number of rows");
  require(labels.size() == rows(), "dataset label count does not match row count");
  for (double v : inputs) require(std::isfinite(v), "dataset contains a non-finite value");
  for (std::int32_t l : labels) require(l >= kNoLabel, "dataset label must be >= 0 or absent");
}

}  // namespace energy_ood
