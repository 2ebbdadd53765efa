// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace energy_ood {

inline constexpr std::int32_t kNoLabel = -1;

// Row-major samples with optional class labels (kNoLabel when absent).
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> inputs;
  std::vector<std::int32_t> labels;

  std::size_t rows() const { return dim == 0 ? 0 : inputs.size() / dim; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * dim, dim);
  }
  bool labeled() const;
  void validate() const;
};

// Non-owning view over consecutive rows; labels empty for unlabeled batches.
struct Batch {
  std::span<const double> inputs;
  std::span<const std::int32_t> labels;
  std::size_t dim = 0;

  std::size_t rows() const { return dim == 0 ? 0 : inputs.size() / dim; }
  std::span<const double> row(std::size_t i) const { return inputs.subspan(i * dim, dim); }
  bool has_labels() const { return !labels.empty(); }
};

inline Batch as_batch(const Dataset& d) {
  Batch b{d.inputs, {}, d.dim};
  if (d.labeled()) b.labels = d.labels;
  return b;
}

}  // namespace energy_ood
