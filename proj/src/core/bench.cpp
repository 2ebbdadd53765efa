// SPDX-License-Identifier: Apache-2.0
#include "core/bench.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"
#include "core/text.hpp"

namespace energy_ood {

std::string_view to_string(OodKind kind) {
  switch (kind) {
    case OodKind::kRing: return "ring";
    case OodKind::kUniformBox: return "uniform_box";
    case OodKind::kShiftedGaussian: return "shifted_gaussian";
  }
  return "unknown";
}

OodKind ood_kind_from_string(std::string_view name) {
  if (name == "ring") return OodKind::kRing;
  if (name == "uniform_box") return OodKind::kUniformBox;
  if (name == "shifted_gaussian") return OodKind::kShiftedGaussian;
  fail(ErrorCode::kParse, "unknown OOD kind '" + std::string(name) + "'");
}

void BenchmarkSpec::validate() const {
  require(k_classes >= 2, "benchmark needs at least two classes");
  require(dim >= 1, "benchmark dimension must be >= 1");
  require(std::isfinite(in_std) && in_std > 0.0, "in_std must be > 0");
  require(std::isfinite(radius), "radius must be finite");
  require(n_train_in >= 1 && n_train_out >= 1 && n_test_in >= 1 && n_test_out >= 1,
          "every benchmark split needs at least one sample");
  if (class_means.empty()) {
    require(k_classes <= 2 * dim, "default class means support at most 2*dim classes; give class_means");
  } else {
    require(class_means.size() == k_classes, "class_means must have k_classes entries");
    for (const auto& m : class_means) {
      require(m.size() == dim, "class mean has the wrong dimension");
      for (double v : m) require(std::isfinite(v), "class means must be finite");
    }
  }
  switch (ood_kind) {
    case OodKind::kRing:
      require(std::isfinite(ring_inner) && std::isfinite(ring_outer) && 0.0 <= ring_inner &&
                  ring_inner <= ring_outer,
              "ring band must satisfy 0 <= ring_inner <= ring_outer");
      break;
    case OodKind::kUniformBox:
      require(std::isfinite(box_half_width) && box_half_width > 0.0, "box_half_width must be > 0");
      break;
    case OodKind::kShiftedGaussian:
      require(std::isfinite(ood_shift), "ood_shift must be finite");
      break;
  }
}

std::vector<std::vector<double>> BenchmarkSpec::resolved_means() const {
  if (!class_means.empty()) return class_means;
  std::vector<std::vector<double>> means(k_classes, std::vector<double>(dim, 0.0));
  for (std::size_t c = 0; c < k_classes; ++c) {
    if (c < dim) {
      means[c][c] = radius;
    } else {
      means[c][c - dim] = -radius;
    }
  }
  return means;
}

namespace {

Dataset draw_in(const BenchmarkSpec& spec, std::size_t n, Stream stream) {
  Rng rng(spec.seed, stream);
  const auto means = spec.resolved_means();
  Dataset d{spec.dim, {}, {}};
  d.inputs.reserve(n * spec.dim);
  d.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(rng.below(spec.k_classes));
    for (std::size_t j = 0; j < spec.dim; ++j) d.inputs.push_back(means[c][j] + spec.in_std * rng.normal());
    d.labels.push_back(static_cast<std::int32_t>(c));
  }
  return d;
}

Dataset draw_out(const BenchmarkSpec& spec, std::size_t n, Stream stream) {
  Rng rng(spec.seed, stream);
  Dataset d{spec.dim, {}, std::vector<std::int32_t>(n, kNoLabel)};
  d.inputs.reserve(n * spec.dim);
  std::vector<double> v(spec.dim);
  for (std::size_t i = 0; i < n; ++i) {
    switch (spec.ood_kind) {
      case OodKind::kRing: {
        double norm = 0.0;
        while (norm == 0.0) {
          norm = 0.0;
          for (double& x : v) {
            x = rng.normal();
            norm += x * x;
          }
          norm = std::sqrt(norm);
        }
        const double r = rng.uniform(spec.ring_inner, spec.ring_outer);
        for (double& x : v) x *= r / norm;
        break;
      }
      case OodKind::kUniformBox:
        for (double& x : v) x = rng.uniform(-spec.box_half_width, spec.box_half_width);
        break;
      case OodKind::kShiftedGaussian:
        for (double& x : v) x = spec.ood_shift + spec.in_std * rng.normal();
        break;
    }
    d.inputs.insert(d.inputs.end(), v.begin(), v.end());
  }
  return d;
}

}  // namespace

Benchmark generate(const BenchmarkSpec& spec) {
  spec.validate();
  return Benchmark{draw_in(spec, spec.n_train_in, Stream::kTrainIn),
                   draw_out(spec, spec.n_train_out, Stream::kTrainOut),
                   draw_in(spec, spec.n_test_in, Stream::kTestIn),
                   draw_out(spec, spec.n_test_out, Stream::kTestOut)};
}

namespace {

nlohmann::ordered_json spec_to_json_value(const BenchmarkSpec& spec) {
  nlohmann::ordered_json j;
  j["k_classes"] = spec.k_classes;
  j["dim"] = spec.dim;
  j["class_means"] = spec.resolved_means();
  j["radius"] = spec.radius;
  j["in_std"] = spec.in_std;
  j["ood_kind"] = std::string(to_string(spec.ood_kind));
  j["ring_inner"] = spec.ring_inner;
  j["ring_outer"] = spec.ring_outer;
  j["box_half_width"] = spec.box_half_width;
  j["ood_shift"] = spec.ood_shift;
  j["n_train_in"] = spec.n_train_in;
  j["n_train_out"] = spec.n_train_out;
  j["n_test_in"] = spec.n_test_in;
  j["n_test_out"] = spec.n_test_out;
  j["seed"] = spec.seed;
  return j;
}

}  // namespace

std::string to_json(const BenchmarkSpec& spec) { return spec_to_json_value(spec).dump(2); }

BenchmarkSpec benchmark_spec_from_json(std::string_view text) {
  BenchmarkSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) fail(ErrorCode::kParse, "benchmark spec must be a JSON object");
    s.k_classes = j.value("k_classes", s.k_classes);
    s.dim = j.value("dim", s.dim);
    s.class_means = j.value("class_means", s.class_means);
    s.radius = j.value("radius", s.radius);
    s.in_std = j.value("in_std", s.in_std);
    s.ood_kind = ood_kind_from_string(j.value("ood_kind", std::string("ring")));
    s.ring_inner = j.value("ring_inner", s.ring_inner);
    s.ring_outer = j.value("ring_outer", s.ring_outer);
    s.box_half_width = j.value("box_half_width", s.box_half_width);
    s.ood_shift = j.value("ood_shift", s.ood_shift);
    s.n_train_in = j.value("n_train_in", s.n_train_in);
    s.n_train_out = j.value("n_train_out", s.n_train_out);
    s.n_test_in = j.value("n_test_in", s.n_test_in);
    s.n_test_out = j.value("n_test_out", s.n_test_out);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("benchmark spec JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::string benchmark_manifest_json(const BenchmarkSpec& spec) {
  nlohmann::ordered_json j;
  j["spec"] = spec_to_json_value(spec);
  j["prng_name"] = std::string(Rng::kName);
  j["version"] = Rng::kVersion;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Tables

Dataset Table::select(Split split) const {
  Dataset d{dim, {}, {}};
  for (std::size_t i = 0; i < rows(); ++i) {
    if (splits[i] != split) continue;
    d.inputs.insert(d.inputs.end(), values.begin() + static_cast<std::ptrdiff_t>(i * dim),
                    values.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    d.labels.push_back(labels[i]);
  }
  return d;
}

Dataset Table::all() const { return Dataset{dim, values, labels}; }

Table Table::join(const Dataset& in, const Dataset& out) {
  require(in.dim == out.dim, "cannot join datasets of different dimension");
  Table t;
  t.dim = in.dim;
  t.values = in.inputs;
  t.values.insert(t.values.end(), out.inputs.begin(), out.inputs.end());
  t.splits.assign(in.rows(), Split::kIn);
  t.splits.insert(t.splits.end(), out.rows(), Split::kOut);
  t.labels = in.labels;
  t.labels.insert(t.labels.end(), out.labels.begin(), out.labels.end());
  return t;
}

TableFormat table_format_from_string(std::string_view name) {
  if (name == "csv") return TableFormat::kCsv;
  if (name == "raw64") return TableFormat::kRaw64;
  fail(ErrorCode::kParse, "unknown table format '" + std::string(name) + "'");
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void parse_error(const std::string& path, std::size_t line, const std::string& what) {
  fail(ErrorCode::kParse, path + ":" + std::to_string(line) + ": " + what);
}

// Lines without terminators; a single trailing newline is allowed, blank
// lines elsewhere are errors.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty()) fail(ErrorCode::kParse, path + ": file is empty");
  return lines;
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void validate_table(const Table& t) {
  require(t.dim >= 1, "table dimension must be >= 1");
  require(t.values.size() == t.rows() * t.dim, "table values do not match rows x dim");
  require(t.labels.size() == t.rows(), "table labels do not match rows");
}

void save_csv(const std::string& path, const Table& t) {
  std::string out = "split,label";
  for (std::size_t j = 0; j < t.dim; ++j) out += ",v" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < t.rows(); ++i) {
    out += t.splits[i] == Split::kIn ? "in," : "out,";
    if (t.labels[i] != kNoLabel) out += std::to_string(t.labels[i]);
    for (std::size_t j = 0; j < t.dim; ++j) {
      out += ',';
      out += format_double(t.values[i * t.dim + j]);
    }
    out += '\n';
  }
  write_file(path, out);
}

Table load_csv(const std::string& path) {
  const auto lines = read_lines(path);
  const auto header = split_fields(lines[0]);
  if (header.size() < 3 || header[0] != "split" || header[1] != "label") {
    parse_error(path, 1, "header must be split,label,v0,...");
  }
  Table t;
  t.dim = header.size() - 2;
  for (std::size_t j = 0; j < t.dim; ++j) {
    if (header[j + 2] != "v" + std::to_string(j)) {
      parse_error(path, 1, "header column " + std::to_string(j + 3) + " must be v" + std::to_string(j));
    }
  }
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto fields = split_fields(lines[ln]);
    if (fields.size() != header.size()) {
      parse_error(path, line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
    }
    if (fields[0] == "in") {
      t.splits.push_back(Split::kIn);
    } else if (fields[0] == "out") {
      t.splits.push_back(Split::kOut);
    } else {
      parse_error(path, line_no, "split must be 'in' or 'out'");
    }
    if (fields[1].empty()) {
      t.labels.push_back(kNoLabel);
    } else {
      long long label = 0;
      if (!parse_int(fields[1], label) || label < 0 || label > INT32_MAX) {
        parse_error(path, line_no, "label must be a non-negative integer or empty");
      }
      t.labels.push_back(static_cast<std::int32_t>(label));
    }
    for (std::size_t j = 0; j < t.dim; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j + 2], v)) {
        parse_error(path, line_no, "column v" + std::to_string(j) + " is not a finite number");
      }
      t.values.push_back(v);
    }
  }
  if (t.rows() == 0) fail(ErrorCode::kParse, path + ": no data rows");
  return t;
}

void save_raw64(const std::string& path, const Table& t) {
  std::string blob;
  blob.reserve(t.values.size() * 8);
  for (double v : t.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  write_file(path, blob);

  nlohmann::ordered_json desc;
  desc["format"] = "raw64";
  desc["version"] = 1;
  desc["rows"] = t.rows();
  desc["cols"] = t.dim;
  auto splits = nlohmann::ordered_json::array();
  auto labels = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    splits.push_back(t.splits[i] == Split::kIn ? "in" : "out");
    if (t.labels[i] == kNoLabel) {
      labels.push_back(nullptr);
    } else {
      labels.push_back(t.labels[i]);
    }
  }
  desc["splits"] = splits;
  desc["labels"] = labels;
  write_file(path + ".json", desc.dump() + "\n");
}

Table load_raw64(const std::string& path) {
  const std::string desc_path = path + ".json";
  Table t;
  std::size_t rows = 0;
  try {
    const auto desc = nlohmann::json::parse(read_file(desc_path));
    if (desc.at("format") != "raw64" || desc.at("version") != 1) {
      fail(ErrorCode::kParse, desc_path + ": unsupported descriptor format/version");
    }
    rows = desc.at("rows").get<std::size_t>();
    t.dim = desc.at("cols").get<std::size_t>();
    const auto& splits = desc.at("splits");
    const auto& labels = desc.at("labels");
    if (splits.size() != rows || labels.size() != rows) {
      fail(ErrorCode::kParse, desc_path + ": splits/labels length does not match rows");
    }
    for (std::size_t i = 0; i < rows; ++i) {
      const auto s = splits[i].get<std::string>();
      if (s != "in" && s != "out") fail(ErrorCode::kParse, desc_path + ": bad split at row " + std::to_string(i));
      t.splits.push_back(s == "in" ? Split::kIn : Split::kOut);
      if (labels[i].is_null()) {
        t.labels.push_back(kNoLabel);
      } else {
        const auto l = labels[i].get<std::int64_t>();
        if (l < 0 || l > INT32_MAX) fail(ErrorCode::kParse, desc_path + ": bad label at row " + std::to_string(i));
        t.labels.push_back(static_cast<std::int32_t>(l));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, desc_path + ": " + e.what());
  }
  if (rows == 0 || t.dim == 0) fail(ErrorCode::kParse, desc_path + ": table is empty");
  const std::string blob = read_file(path);
  if (blob.size() != rows * t.dim * 8) {
    fail(ErrorCode::kParse, path + ": expected " + std::to_string(rows * t.dim * 8) + " bytes, found " +
                                std::to_string(blob.size()));
  }
  t.values.resize(rows * t.dim);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[i * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    t.values[i] = std::bit_cast<double>(bits);
    if (!std::isfinite(t.values[i])) fail(ErrorCode::kParse, path + ": non-finite value at index " + std::to_string(i));
  }
  return t;
}

}  // namespace

void save_table(const std::string& path, const Table& table, TableFormat format) {
  validate_table(table);
  if (format == TableFormat::kCsv) {
    save_csv(path, table);
  } else {
    save_raw64(path, table);
  }
}

Table load_table(const std::string& path, TableFormat format) {
  return format == TableFormat::kCsv ? load_csv(path) : load_raw64(path);
}

// ---------------------------------------------------------------------------
// Scoring

std::vector<double> score_rows(const MlpModel& model, const Dataset& data, ScoreKind kind, Temperature temp) {
  const std::vector<double> logits = model.forward_batch(as_batch(data));
  return score_batch(logits, model.config().classes(), kind, temp);
}

std::vector<double> score_rows(const GdaModel& model, const Dataset& data, ScoreKind kind) {
  require(kind == ScoreKind::kNegEnergyGda || kind == ScoreKind::kMahalanobis,
          "GDA scoring supports neg_energy_gda and mahalanobis");
  require(data.dim == model.dim(), "feature dimension does not match GDA model");
  std::vector<double> out(data.rows());
  parallel_for(data.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = kind == ScoreKind::kNegEnergyGda ? -energy_u(model, data.row(i)) : mahalanobis_score(model, data.row(i));
    }
  });
  return out;
}

ScoreSet assemble_scores(const MlpModel& model, const Dataset& test_in, const Dataset& test_out,
                         ScoreKind kind, Temperature temp) {
  return ScoreSet{score_rows(model, test_in, kind, temp), score_rows(model, test_out, kind, temp)};
}

ScoreSet assemble_scores(const GdaModel& model, const Dataset& test_in, const Dataset& test_out,
                         ScoreKind kind) {
  return ScoreSet{score_rows(model, test_in, kind), score_rows(model, test_out, kind)};
}

void save_scores(const std::string& path, std::span<const double> scores) {
  std::string out = "row,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(scores[i]);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<double> load_scores(const std::string& path, std::string_view column) {
  const auto lines = read_lines(path);
  const auto header = split_fields(lines[0]);
  if (header.empty() || header[0] != "row") parse_error(path, 1, "first column must be 'row'");
  std::size_t col = header.size();
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] == column) col = j;
  }
  if (col == header.size()) parse_error(path, 1, "no column named '" + std::string(column) + "'");
  std::vector<double> scores;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = split_fields(lines[ln]);
    if (fields.size() != header.size()) {
      parse_error(path, ln + 1, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    double v = 0.0;
    if (!parse_double(fields[col], v)) parse_error(path, ln + 1, "score is not a finite number");
    scores.push_back(v);
  }
  if (scores.empty()) fail(ErrorCode::kParse, path + ": no data rows");
  return scores;
}

}  // namespace energy_ood
