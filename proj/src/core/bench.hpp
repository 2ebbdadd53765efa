// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "core/dataset.hpp"
#include "core/gda.hpp"
#include "core/metrics.hpp"
#include "core/mlp.hpp"
#include "core/scores.hpp"

namespace energy_ood {

enum class OodKind { kRing, kUniformBox, kShiftedGaussian };

std::string_view to_string(OodKind kind);
OodKind ood_kind_from_string(std::string_view name);

// In-distribution: uniform class choice, then N(mean_c, in_std^2 I).
// Default means sit at +/- radius on the coordinate axes (class c < dim on
// +e_c, dim <= c < 2 dim on -e_{c-dim}).
//   ring            radius ~ U[ring_inner, ring_outer], direction uniform
//   uniform_box     U[-box_half_width, box_half_width]^dim
//   shifted_gaussian N(ood_shift * 1, in_std^2 I)
struct BenchmarkSpec {
  std::size_t k_classes = 2;
  std::size_t dim = 2;
  std::vector<std::vector<double>> class_means;  // empty: axis defaults
  double radius = 4.0;
  double in_std = 1.0;
  OodKind ood_kind = OodKind::kRing;
  double ring_inner = 10.0;
  double ring_outer = 12.0;
  double box_half_width = 12.0;
  double ood_shift = -4.0;
  std::size_t n_train_in = 2000;
  std::size_t n_train_out = 2000;
  std::size_t n_test_in = 1000;
  std::size_t n_test_out = 1000;
  std::uint64_t seed = 7;

  void validate() const;
  std::vector<std::vector<double>> resolved_means() const;
};

struct Benchmark {
  Dataset train_in;
  Dataset train_out;
  Dataset test_in;
  Dataset test_out;
};

// Each split draws from its own seeded stream.
Benchmark generate(const BenchmarkSpec& spec);

std::string to_json(const BenchmarkSpec& spec);
BenchmarkSpec benchmark_spec_from_json(std::string_view text);
// {"spec", "prng_name", "version"}.
std::string benchmark_manifest_json(const BenchmarkSpec& spec);

enum class Split { kIn, kOut };

// Rows in file order, each tagged in/out with an optional label.
struct Table {
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<Split> splits;
  std::vector<std::int32_t> labels;

  std::size_t rows() const { return splits.size(); }
  Dataset select(Split split) const;
  // Every row regardless of split.
  Dataset all() const;
  static Table join(const Dataset& in, const Dataset& out);
  bool operator==(const Table&) const = default;
};

enum class TableFormat { kCsv, kRaw64 };
TableFormat table_format_from_string(std::string_view name);

// CSV: header `split,label,v0,...,v{d-1}`, label empty when absent, values in
// shortest round-trip form. raw64: float64 little-endian row-major values in
// `path`, descriptor {format, version, rows, cols, splits, labels} in
// `path + ".json"`.
void save_table(const std::string& path, const Table& table, TableFormat format);
Table load_table(const std::string& path, TableFormat format);

std::vector<double> score_rows(const MlpModel& model, const Dataset& data, ScoreKind kind, Temperature temp);
std::vector<double> score_rows(const GdaModel& model, const Dataset& data, ScoreKind kind);

ScoreSet assemble_scores(const MlpModel& model, const Dataset& test_in, const Dataset& test_out,
                         ScoreKind kind, Temperature temp);
ScoreSet assemble_scores(const GdaModel& model, const Dataset& test_in, const Dataset& test_out,
                         ScoreKind kind);

// CSV `row,score` score files.
void save_scores(const std::string& path, std::span<const double> scores);
// Reads the named column of a CSV whose first column is `row`.
std::vector<double> load_scores(const std::string& path, std::string_view column = "score");

}  // namespace energy_ood
