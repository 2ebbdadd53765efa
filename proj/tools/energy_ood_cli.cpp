// SPDX-License-Identifier: Apache-2.0
// energy_ood: command-line front end over libenergy_ood.
#include <energy_ood/energy_ood.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct CliError : std::runtime_error {
  CliError(int code, const std::string& msg) : std::runtime_error(msg), exit_code(code) {}
  int exit_code;
};

[[noreturn]] void usage(const std::string& msg) { throw CliError(kExitUsage, msg); }

void check(eood_status s) {
  if (s == EOOD_OK) return;
  const int code = s == EOOD_ERR_NUMERICAL ? kExitNumerical : s == EOOD_ERR_INTERNAL ? kExitOther : kExitUsage;
  throw CliError(code, eood_last_error());
}

struct Free {
  void operator()(void* p) const { eood_free(p); }
  void operator()(eood_table* t) const { eood_table_destroy(t); }
  void operator()(eood_mlp* m) const { eood_mlp_destroy(m); }
  void operator()(eood_gda* g) const { eood_gda_destroy(g); }
};
using TablePtr = std::unique_ptr<eood_table, Free>;
using MlpPtr = std::unique_ptr<eood_mlp, Free>;
using GdaPtr = std::unique_ptr<eood_gda, Free>;

std::string take(char* s) {
  std::unique_ptr<char, Free> guard(s);
  return s;
}

// Shortest representation that parses back to the same double.
std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) usage("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) usage("cannot write '" + path + "'");
  f << text;
  if (!f) usage("failed writing '" + path + "'");
}

// FNV-1a 64 over the file bytes; identifies outputs in manifests.
std::string file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return "missing";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    usage(what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Run bookkeeping

struct Run {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json seeds = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string manifest_path;

  void input(const std::string& p) { inputs.push_back(p); }
  void output(const std::string& p) {
    outputs.push_back(p);
    if (fs::exists(p + ".json") && p.size() > 4 && p.substr(p.size() - 4) == ".bin") outputs.push_back(p + ".json");
  }
  void default_manifest(const std::string& primary) {
    if (manifest_path.empty()) manifest_path = primary + ".manifest.json";
  }
};

json describe_files(const std::vector<std::string>& paths) {
  json arr = json::array();
  for (const auto& p : paths) {
    std::error_code ec;
    const auto size = fs::file_size(p, ec);
    arr.push_back({{"path", p}, {"bytes", ec ? 0 : size}, {"fnv1a64", file_digest(p)}});
  }
  return arr;
}

void write_manifest(const Run& run, double seconds) {
  json m;
  m["command"] = run.command;
  m["argv"] = run.argv;
  m["cwd"] = fs::current_path().string();
  m["config"] = run.config;
  m["seeds"] = run.seeds;
  m["library_version"] = eood_version();
  m["inputs"] = describe_files(run.inputs);
  m["outputs"] = describe_files(run.outputs);
  m["duration_seconds"] = seconds;
  write_text(run.manifest_path, m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Tables

eood_table_format parse_format(const std::string& s) {
  if (s == "csv") return EOOD_FORMAT_CSV;
  if (s == "raw64") return EOOD_FORMAT_RAW64;
  usage("unknown table format '" + s + "' (expected csv or raw64)");
}

const char* extension(eood_table_format f) { return f == EOOD_FORMAT_CSV ? ".csv" : ".bin"; }

TablePtr load_table(const std::string& path, eood_table_format f) {
  eood_table* t = nullptr;
  check(eood_table_load(path.c_str(), f, &t));
  return TablePtr(t);
}

struct Rows {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<std::int32_t> y;
  std::size_t rows() const { return dim == 0 ? 0 : x.size() / dim; }
  eood_batch batch(bool labeled) const { return eood_batch{x.data(), labeled ? y.data() : nullptr, rows(), dim}; }
};

Rows copy_split(const eood_table* t, eood_split split) {
  Rows r;
  r.dim = eood_table_dim(t);
  const std::size_t n = eood_table_split_rows(t, split);
  r.x.resize(n * r.dim);
  r.y.resize(n);
  check(eood_table_copy_split(t, split, r.x.data(), r.y.data()));
  return r;
}

bool all_labeled(const Rows& r) {
  for (auto y : r.y) {
    if (y == EOOD_NO_LABEL) return false;
  }
  return true;
}

struct Data {
  TablePtr train;
  TablePtr test;
};

struct DataOptions {
  std::string bench;
  std::string dir;
  std::string format = "csv";

  void add(CLI::App* app) {
    auto* b = app->add_option("--bench", bench, "Benchmark spec JSON; data is generated in memory");
    auto* d = app->add_option("--data", dir, "Directory holding train and test tables");
    b->excludes(d);
    app->add_option("--format", format, "Table format in --data: csv or raw64");
  }

  Data load(Run& run, bool need_test) const {
    if (bench.empty() == dir.empty()) usage("exactly one of --bench or --data is required");
    Data data;
    if (!bench.empty()) {
      const std::string spec = read_text(bench);
      run.input(bench);
      eood_table* train = nullptr;
      eood_table* test = nullptr;
      char* manifest = nullptr;
      check(eood_bench_generate(spec.c_str(), &train, &test, &manifest));
      data.train.reset(train);
      data.test.reset(test);
      const json m = parse_json(take(manifest), "benchmark manifest");
      run.config["benchmark"] = m;
      run.seeds["benchmark"] = m["spec"]["seed"];
      return data;
    }
    const auto f = parse_format(format);
    const std::string train_path = (fs::path(dir) / ("train" + std::string(extension(f)))).string();
    data.train = load_table(train_path, f);
    run.input(train_path);
    if (need_test) {
      const std::string test_path = (fs::path(dir) / ("test" + std::string(extension(f)))).string();
      data.test = load_table(test_path, f);
      run.input(test_path);
    }
    return data;
  }
};

MlpPtr load_model(const std::string& path, Run& run, eood_train_config* cfg = nullptr) {
  eood_mlp* m = nullptr;
  eood_train_config scratch;
  int has_cfg = 0;
  check(eood_mlp_load(path.c_str(), &m, cfg ? cfg : &scratch, &has_cfg));
  run.input(path);
  return MlpPtr(m);
}

eood_score_kind parse_kind(std::string name) {
  for (char& c : name) {
    if (c == '-') c = '_';
  }
  eood_score_kind k;
  check(eood_score_kind_parse(name.c_str(), &k));
  return k;
}

std::vector<double> load_scores(const std::string& path, const std::string& column, Run& run) {
  double* values = nullptr;
  std::size_t n = 0;
  check(eood_scores_load(path.c_str(), column.c_str(), &values, &n));
  std::unique_ptr<double, Free> guard(values);
  run.input(path);
  return std::vector<double>(values, values + n);
}

// ---------------------------------------------------------------------------
// Commands

struct BenchCmd {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format = "csv";

  void add(CLI::App* app) {
    app->add_option("--spec", spec, "Benchmark spec JSON (defaults when omitted)");
    app->add_option("--seed", seed, "Override the seed in the benchmark spec");
    app->add_option("--out-dir", out_dir, "Output directory")->required();
    app->add_option("--format", format, "csv or raw64");
  }

  void run(Run& r) {
    json s = json::object();
    if (!spec.empty()) {
      s = parse_json(read_text(spec), "benchmark spec");
      r.input(spec);
    }
    if (seed) s["seed"] = *seed;
    const auto f = parse_format(format);
    eood_table* train = nullptr;
    eood_table* test = nullptr;
    char* manifest = nullptr;
    check(eood_bench_generate(s.dump().c_str(), &train, &test, &manifest));
    TablePtr tr(train), te(test);
    const json m = parse_json(take(manifest), "benchmark manifest");

    fs::create_directories(out_dir);
    const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };
    const std::string train_path = path("train" + std::string(extension(f)));
    const std::string test_path = path("test" + std::string(extension(f)));
    check(eood_table_save(tr.get(), train_path.c_str(), f));
    check(eood_table_save(te.get(), test_path.c_str(), f));
    write_text(path("bench.json"), m.dump(2) + "\n");
    r.output(train_path);
    r.output(test_path);
    r.output(path("bench.json"));
    r.config = m;
    r.seeds["benchmark"] = m["spec"]["seed"];
    if (r.manifest_path.empty()) r.manifest_path = path("manifest.json");

    std::cout << "train rows: " << eood_table_rows(tr.get()) << " (in " << eood_table_split_rows(tr.get(), EOOD_SPLIT_IN)
              << ", out " << eood_table_split_rows(tr.get(), EOOD_SPLIT_OUT) << ")\n"
              << "test rows:  " << eood_table_rows(te.get()) << " (in " << eood_table_split_rows(te.get(), EOOD_SPLIT_IN)
              << ", out " << eood_table_split_rows(te.get(), EOOD_SPLIT_OUT) << ")\n";
  }
};

// Training config file: TrainConfig keys plus "hidden" (hidden layer widths,
// pretrain only) and "margins" ("fixed" or "auto").
struct TrainFile {
  eood_train_config cfg{};
  std::vector<std::size_t> hidden{128, 128};
  bool auto_margins = false;
};

TrainFile read_train_file(const std::string& path, Run& run) {
  TrainFile tf;
  eood_train_config_default(&tf.cfg);
  if (path.empty()) return tf;
  const std::string text = read_text(path);
  run.input(path);
  const json j = parse_json(text, "train config");
  if (!j.is_object()) usage("train config must be a JSON object");
  static const std::vector<std::string> known{"lambda",    "m_in", "m_out", "lr0",    "epochs",  "batch_in",
                                              "batch_out", "seed", "temp",  "hidden", "margins"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) usage("train config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("hidden")) tf.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("margins")) {
      const auto mode = j.at("margins").get<std::string>();
      if (mode != "auto" && mode != "fixed") usage("train config: margins must be \"auto\" or \"fixed\"");
      tf.auto_margins = mode == "auto";
    }
  } catch (const json::exception& e) {
    usage(std::string("train config: ") + e.what());
  }
  check(eood_train_config_from_json(text.c_str(), &tf.cfg));
  return tf;
}

struct LogSink {
  std::ofstream* out = nullptr;
  std::size_t rows = 0;
  eood_train_log_row last{};
};

void log_row(const eood_train_log_row* row, void* user) {
  auto* sink = static_cast<LogSink*>(user);
  sink->last = *row;
  ++sink->rows;
  if (sink->out) {
    *sink->out << row->epoch << ',' << row->step << ',' << fmt(row->lr) << ',' << fmt(row->nll) << ','
               << fmt(row->energy_reg) << ',' << fmt(row->total) << '\n';
  }
}

double energy_gap(const eood_mlp* m, const Rows& in, const Rows& out) {
  double mi = 0, si = 0, mo = 0, so = 0;
  const auto bi = in.batch(false);
  const auto bo = out.batch(false);
  check(eood_mlp_energy_stats(m, &bi, &mi, &si));
  check(eood_mlp_energy_stats(m, &bo, &mo, &so));
  return mo - mi;
}

struct TrainCmd {
  bool finetune = false;
  DataOptions data;
  std::string config;
  std::string model;
  std::string out;
  std::string log;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app, bool is_finetune) {
    finetune = is_finetune;
    data.add(app);
    app->add_option("--config", config, "Training config JSON");
    auto* m = app->add_option("--model", model, "Starting checkpoint");
    if (finetune) m->required();
    app->add_option("--out", out, "Output checkpoint")->required();
    app->add_option("--log", log, "Per-step training log CSV");
    app->add_option("--seed", seed, "Override the config seed (initialization and shuffling)");
  }

  void run(Run& r) {
    TrainFile tf = read_train_file(config, r);
    if (seed) tf.cfg.seed = *seed;
    Data d = data.load(r, false);
    const Rows in = copy_split(d.train.get(), EOOD_SPLIT_IN);
    const Rows outl = copy_split(d.train.get(), EOOD_SPLIT_OUT);
    if (in.rows() == 0) usage("training data has no in-distribution rows");
    if (!all_labeled(in)) usage("in-distribution training rows must be labeled");

    MlpPtr net;
    if (!model.empty()) {
      net = load_model(model, r);
    } else {
      std::int32_t max_label = 0;
      for (auto y : in.y) max_label = std::max(max_label, y);
      std::vector<std::size_t> sizes{in.dim};
      sizes.insert(sizes.end(), tf.hidden.begin(), tf.hidden.end());
      sizes.push_back(static_cast<std::size_t>(max_label) + 1);
      eood_mlp* m = nullptr;
      check(eood_mlp_create(sizes.data(), sizes.size(), tf.cfg.seed, &m));
      net.reset(m);
      r.config["layer_sizes"] = sizes;
    }

    const eood_batch in_b = in.batch(true);
    const eood_batch out_b = outl.batch(false);
    if (finetune) {
      if (outl.rows() == 0) usage("fine-tuning needs outlier rows (split 'out') in the training data");
      if (tf.auto_margins) check(eood_mlp_auto_margins(net.get(), &in_b, &out_b, &tf.cfg.m_in, &tf.cfg.m_out));
    }
    if (!finetune) tf.cfg.lambda = 0.0;

    std::ofstream log_file;
    LogSink sink;
    if (!log.empty()) {
      log_file.open(log, std::ios::binary | std::ios::trunc);
      if (!log_file) usage("cannot write '" + log + "'");
      log_file << "epoch,step,lr,nll,energy_reg,total\n";
      sink.out = &log_file;
    }
    const double gap_before = finetune ? energy_gap(net.get(), in, outl) : 0.0;
    if (finetune) {
      check(eood_mlp_finetune(net.get(), &in_b, &out_b, &tf.cfg, log_row, &sink));
    } else {
      check(eood_mlp_pretrain(net.get(), &in_b, &tf.cfg, log_row, &sink));
    }
    if (log_file.is_open()) {
      log_file.close();
      r.output(log);
    }
    check(eood_mlp_save(net.get(), out.c_str(), &tf.cfg));
    r.output(out);
    r.default_manifest(out);

    char* cfg_json = nullptr;
    check(eood_train_config_to_json(&tf.cfg, &cfg_json));
    r.config["train"] = parse_json(take(cfg_json), "train config");
    r.config["margins"] = tf.auto_margins && finetune ? "auto" : "fixed";
    r.seeds["train"] = tf.cfg.seed;

    double acc = 0.0;
    check(eood_mlp_accuracy(net.get(), &in_b, &acc));
    std::cout << "steps: " << sink.rows << "\n";
    if (sink.rows > 0) std::cout << "final loss: " << fixed6(sink.last.total) << "\n";
    std::cout << "train accuracy: " << fixed6(acc) << "\n";
    if (finetune) {
      std::cout << "margins: m_in " << fixed6(tf.cfg.m_in) << ", m_out " << fixed6(tf.cfg.m_out) << "\n"
                << "energy gap (mean E_out - mean E_in): " << fixed6(gap_before) << " -> "
                << fixed6(energy_gap(net.get(), in, outl)) << "\n";
    }
  }
};

struct LogitsCmd {
  std::string model;
  std::string data;
  std::string out;
  std::string format = "csv";

  void add(CLI::App* app) {
    app->add_option("--model", model, "Checkpoint")->required();
    app->add_option("--data", data, "Input table")->required();
    app->add_option("--out", out, "Output logit table")->required();
    app->add_option("--format", format, "csv or raw64 (input and output)");
  }

  void run(Run& r) {
    const auto f = parse_format(format);
    MlpPtr net = load_model(model, r);
    TablePtr t = load_table(data, f);
    r.input(data);
    const std::size_t n = eood_table_rows(t.get());
    const std::size_t dim = eood_table_dim(t.get());
    std::vector<double> x(n * dim);
    std::vector<std::int32_t> labels(n), splits(n);
    check(eood_table_copy_all(t.get(), x.data(), labels.data(), splits.data()));
    const std::size_t k = eood_mlp_num_classes(net.get());
    std::vector<double> logits(n * k);
    check(eood_mlp_forward_batch(net.get(), x.data(), n, dim, logits.data()));
    eood_table* result = nullptr;
    check(eood_table_create(n, k, logits.data(), labels.data(), splits.data(), &result));
    TablePtr guard(result);
    check(eood_table_save(result, out.c_str(), f));
    r.output(out);
    r.default_manifest(out);
    std::cout << "rows: " << n << ", classes: " << k << "\n";
  }
};

struct ScoreCmd {
  std::string logits;
  std::string format = "csv";
  double temp = 1.0;
  std::string score = "neg-energy";
  std::string split = "all";
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--logits", logits, "Logit table")->required();
    app->add_option("--format", format, "csv or raw64");
    app->add_option("--temp", temp, "Temperature T > 0");
    app->add_option("--score", score, "energy, neg-energy or msp");
    app->add_option("--split", split, "all, in or out");
    app->add_option("--out", out, "Output score CSV (row,score)")->required();
  }

  void run(Run& r) {
    if (score != "energy" && score != "neg-energy" && score != "msp") {
      usage("--score must be energy, neg-energy or msp");
    }
    TablePtr t = load_table(logits, parse_format(format));
    r.input(logits);
    const std::size_t k = eood_table_dim(t.get());
    std::vector<double> values;
    if (split == "all") {
      values.resize(eood_table_rows(t.get()) * k);
      check(eood_table_copy_all(t.get(), values.data(), nullptr, nullptr));
    } else if (split == "in" || split == "out") {
      values = copy_split(t.get(), split == "in" ? EOOD_SPLIT_IN : EOOD_SPLIT_OUT).x;
    } else {
      usage("--split must be all, in or out");
    }
    const std::size_t rows = values.size() / k;
    std::vector<double> scores(rows);
    if (score == "energy") {
      check(eood_energy_logits(values.data(), rows, k, temp, scores.data()));
    } else {
      check(eood_score_logits(values.data(), rows, k, score == "msp" ? EOOD_SCORE_MSP : EOOD_SCORE_NEG_ENERGY, temp,
                              scores.data()));
    }
    check(eood_scores_save(out.c_str(), scores.data(), scores.size()));
    r.output(out);
    r.default_manifest(out);
    r.config = {{"score", score}, {"temp", temp}, {"split", split}};
    std::cout << "scored rows: " << rows << "\n";
  }
};

struct CalibrateCmd {
  std::string in_scores;
  std::string column = "score";
  double tpr = 0.95;
  std::string kind = "neg_energy";
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--in-scores", in_scores, "In-distribution score CSV")->required();
    app->add_option("--column", column, "Score column");
    app->add_option("--tpr", tpr, "Target true positive rate in (0, 1]")->required();
    app->add_option("--score-kind", kind, "Score kind recorded in the detector");
    app->add_option("--out", out, "Detector JSON")->required();
  }

  void run(Run& r) {
    const auto scores = load_scores(in_scores, column, r);
    eood_detector det;
    check(eood_calibrate(scores.data(), scores.size(), tpr, parse_kind(kind), &det));
    double achieved = 0.0;
    check(eood_pass_rate(scores.data(), scores.size(), det.tau, &achieved));
    char* text = nullptr;
    check(eood_detector_to_json(&det, &text));
    write_text(out, take(text) + "\n");
    r.output(out);
    r.default_manifest(out);
    r.config = {{"tpr", tpr}, {"column", column}, {"score_kind", eood_score_kind_name(det.score_kind)}};
    std::cout << "tau: " << fmt(det.tau) << "\n"
              << "achieved TPR: " << fixed6(achieved) << "\n";
  }
};

struct EvaluateCmd {
  std::string in;
  std::string out;
  std::string column = "score";
  double tpr = 0.95;
  std::string json_path;
  bool both = false;

  void add(CLI::App* app) {
    app->add_option("--in", in, "In-distribution score CSV")->required();
    app->add_option("--out", out, "Out-of-distribution score CSV")->required();
    app->add_option("--column", column, "Score column");
    app->add_option("--tpr", tpr, "TPR level for FPR");
    app->add_option("--json", json_path, "Write the report as JSON");
    app->add_flag("--both-orientations", both, "Also report AUPR with OOD as the positive class");
  }

  void run(Run& r) {
    const auto a = load_scores(in, column, r);
    const auto b = load_scores(out, column, r);
    eood_report rep;
    check(eood_full_report(a.data(), a.size(), b.data(), b.size(), tpr, both ? 1 : 0, &rep));
    if (!json_path.empty()) {
      char* text = nullptr;
      check(eood_report_to_json(&rep, &text));
      write_text(json_path, take(text) + "\n");
      r.output(json_path);
      r.default_manifest(json_path);
    }
    if (r.manifest_path.empty()) r.manifest_path = "evaluate.manifest.json";
    r.config = {{"tpr", tpr}, {"column", column}, {"both_orientations", both}};

    char label[32];
    std::snprintf(label, sizeof(label), "FPR@%g%%TPR", tpr * 100.0);
    std::printf("%-14s %s\n", "metric", "value");
    std::printf("%-14s %s\n", label, fixed6(rep.fpr_at_tpr).c_str());
    std::printf("%-14s %s\n", "AUROC", fixed6(rep.auroc).c_str());
    std::printf("%-14s %s\n", "AUPR", fixed6(rep.aupr).c_str());
    if (rep.has_aupr_out) std::printf("%-14s %s\n", "AUPR (out)", fixed6(rep.aupr_out).c_str());
    std::printf("%-14s %zu\n%-14s %zu\n", "n_in", rep.n_in, "n_out", rep.n_out);
  }
};

std::vector<double> parse_temps(const std::string& list) {
  std::vector<double> temps;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double t = 0.0;
    const char* end = item.data() + item.size();
    const auto res = std::from_chars(item.data(), end, t);
    if (item.empty() || res.ec != std::errc() || res.ptr != end) usage("--temps: '" + item + "' is not a number");
    if (!(t > 0.0) || !std::isfinite(t)) usage("--temps: temperatures must be finite and > 0, got " + item);
    temps.push_back(t);
  }
  if (temps.empty()) usage("--temps: empty list");
  return temps;
}

struct SweepCmd {
  std::string model;
  DataOptions data;
  std::string temps;
  std::string score = "neg-energy";
  double tpr = 0.95;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Checkpoint")->required();
    data.add(app);
    app->add_option("--temps", temps, "Comma-separated temperatures")->required();
    app->add_option("--score", score, "neg-energy or msp");
    app->add_option("--tpr", tpr, "TPR level for FPR");
    app->add_option("--out", out, "Output CSV (T,fpr95,auroc,aupr)")->required();
  }

  void run(Run& r) {
    const auto ts = parse_temps(temps);
    const auto kind = parse_kind(score);
    MlpPtr net = load_model(model, r);
    Data d = data.load(r, true);
    const std::size_t n_in = eood_table_split_rows(d.test.get(), EOOD_SPLIT_IN);
    const std::size_t n_out = eood_table_split_rows(d.test.get(), EOOD_SPLIT_OUT);
    std::vector<double> a(n_in), b(n_out);
    std::ostringstream csv;
    csv << "T,fpr95,auroc,aupr\n";
    for (double t : ts) {
      check(eood_mlp_score_split(net.get(), d.test.get(), EOOD_SPLIT_IN, kind, t, a.data()));
      check(eood_mlp_score_split(net.get(), d.test.get(), EOOD_SPLIT_OUT, kind, t, b.data()));
      eood_report rep;
      check(eood_full_report(a.data(), a.size(), b.data(), b.size(), tpr, 0, &rep));
      csv << fmt(t) << ',' << fmt(rep.fpr_at_tpr) << ',' << fmt(rep.auroc) << ',' << fmt(rep.aupr) << '\n';
      std::cout << "T=" << fmt(t) << "  fpr95 " << fixed6(rep.fpr_at_tpr) << "  auroc " << fixed6(rep.auroc)
                << "  aupr " << fixed6(rep.aupr) << "\n";
    }
    write_text(out, csv.str());
    r.output(out);
    r.default_manifest(out);
    r.config["temps"] = ts;
    r.config["score"] = eood_score_kind_name(kind);
    r.config["tpr"] = tpr;
  }
};

struct GdaFitCmd {
  std::string features;
  std::string format = "csv";
  std::string labels;
  double ridge = 1e-6;
  std::string model;

  void add(CLI::App* app) {
    app->add_option("--features", features, "Feature table; rows of split 'in' are fitted")->required();
    app->add_option("--format", format, "csv or raw64");
    app->add_option("--labels", labels, "Optional CSV (row,label) replacing the table labels");
    app->add_option("--ridge", ridge, "Ridge added to the covariance diagonal");
    app->add_option("--model", model, "Output GDA model JSON")->required();
  }

  void run(Run& r) {
    TablePtr t = load_table(features, parse_format(format));
    r.input(features);
    Rows in = copy_split(t.get(), EOOD_SPLIT_IN);
    if (!labels.empty()) {
      const auto values = load_scores(labels, "label", r);
      if (values.size() != in.rows()) {
        usage("--labels has " + std::to_string(values.size()) + " rows, features have " + std::to_string(in.rows()));
      }
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] != std::floor(values[i]) || values[i] < 0 || values[i] > 1e9) {
          usage("--labels row " + std::to_string(i) + " is not a class index");
        }
        in.y[i] = static_cast<std::int32_t>(values[i]);
      }
    }
    if (!all_labeled(in)) usage("every fitted row needs a label");
    eood_gda* g = nullptr;
    check(eood_gda_fit(in.x.data(), in.rows(), in.dim, in.y.data(), ridge, &g));
    GdaPtr guard(g);
    char* text = nullptr;
    check(eood_gda_to_json(g, &text));
    write_text(model, take(text) + "\n");
    r.output(model);
    r.default_manifest(model);
    r.config = {{"ridge", ridge}};
    std::cout << "classes: " << eood_gda_num_classes(g) << ", dimension: " << eood_gda_dim(g) << "\n";
  }
};

struct GdaScoreCmd {
  std::string features;
  std::string format = "csv";
  std::string model;
  std::string split = "all";
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--features", features, "Feature table")->required();
    app->add_option("--format", format, "csv or raw64");
    app->add_option("--model", model, "GDA model JSON")->required();
    app->add_option("--split", split, "all, in or out");
    app->add_option("--out", out, "Output CSV (row,energy_u,mahalanobis,neg_energy_gda)")->required();
  }

  void run(Run& r) {
    eood_gda* g = nullptr;
    check(eood_gda_from_json(read_text(model).c_str(), &g));
    GdaPtr guard(g);
    r.input(model);
    TablePtr t = load_table(features, parse_format(format));
    r.input(features);
    const std::size_t dim = eood_table_dim(t.get());
    std::vector<double> x;
    if (split == "all") {
      x.resize(eood_table_rows(t.get()) * dim);
      check(eood_table_copy_all(t.get(), x.data(), nullptr, nullptr));
    } else if (split == "in" || split == "out") {
      x = copy_split(t.get(), split == "in" ? EOOD_SPLIT_IN : EOOD_SPLIT_OUT).x;
    } else {
      usage("--split must be all, in or out");
    }
    std::ostringstream csv;
    csv << "row,energy_u,mahalanobis,neg_energy_gda\n";
    for (std::size_t i = 0; i * dim < x.size(); ++i) {
      double e = 0.0, m = 0.0;
      check(eood_gda_energy_u(g, x.data() + i * dim, dim, &e));
      check(eood_gda_mahalanobis(g, x.data() + i * dim, dim, &m));
      csv << i << ',' << fmt(e) << ',' << fmt(m) << ',' << fmt(-e) << '\n';
    }
    write_text(out, csv.str());
    r.output(out);
    r.default_manifest(out);
    r.config = {{"split", split}};
  }
};

struct FilterCmd {
  std::string model;
  std::string detector;
  std::string data;
  std::string format = "csv";
  double temp = 1.0;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--model", model, "Checkpoint")->required();
    app->add_option("--detector", detector, "Detector JSON")->required();
    app->add_option("--data", data, "Input table")->required();
    app->add_option("--format", format, "csv or raw64");
    app->add_option("--temp", temp, "Temperature for the detector score");
    app->add_option("--out", out, "Output CSV (row,prediction); -1 marks rejected rows")->required();
  }

  void run(Run& r) {
    MlpPtr net = load_model(model, r);
    eood_detector det;
    check(eood_detector_from_json(read_text(detector).c_str(), &det));
    r.input(detector);
    TablePtr t = load_table(data, parse_format(format));
    r.input(data);
    const std::size_t n = eood_table_rows(t.get());
    const std::size_t dim = eood_table_dim(t.get());
    const std::size_t k = eood_mlp_num_classes(net.get());
    std::vector<double> x(n * dim), logits(n * k);
    check(eood_table_copy_all(t.get(), x.data(), nullptr, nullptr));
    check(eood_mlp_forward_batch(net.get(), x.data(), n, dim, logits.data()));
    std::ostringstream csv;
    csv << "row,prediction\n";
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::int64_t pred = 0;
      check(eood_filter_and_predict(logits.data() + i * k, k, &det, temp, &pred));
      if (pred >= 0) ++accepted;
      csv << i << ',' << pred << '\n';
    }
    write_text(out, csv.str());
    r.output(out);
    r.default_manifest(out);
    r.config = {{"temp", temp}, {"tau", fmt(det.tau)}, {"score_kind", eood_score_kind_name(det.score_kind)}};
    std::cout << "accepted: " << accepted << " of " << n << "\n";
  }
};

int dispatch(const std::vector<std::string>& args, bool replaying);

struct ReplayCmd {
  std::string manifest;
  bool verify = false;

  void add(CLI::App* app) {
    app->add_option("manifest", manifest, "Run manifest JSON")->required();
    app->add_flag("--verify", verify, "Fail unless every output matches the recorded digest");
  }

  int run() {
    const json m = parse_json(read_text(manifest), "manifest");
    std::vector<std::string> argv;
    std::string cwd;
    try {
      argv = m.at("argv").get<std::vector<std::string>>();
      cwd = m.at("cwd").get<std::string>();
    } catch (const json::exception& e) {
      usage(std::string("manifest: ") + e.what());
    }
    const json recorded = m.value("outputs", json::array());
    const fs::path here = fs::current_path();
    std::error_code ec;
    fs::current_path(cwd, ec);
    if (ec) usage("cannot enter recorded directory '" + cwd + "'");
    const int code = dispatch(argv, true);
    int result = code;
    if (code == kExitOk && verify) {
      for (const auto& o : recorded) {
        const std::string path = o.at("path").get<std::string>();
        const std::string now = file_digest(path);
        if (now != o.at("fnv1a64").get<std::string>()) {
          std::cerr << "energy_ood: replay mismatch: " << path << "\n";
          result = kExitOther;
        }
      }
      if (result == kExitOk) std::cout << "replay verified: " << recorded.size() << " outputs identical\n";
    }
    fs::current_path(here, ec);
    return result;
  }
};

int dispatch(const std::vector<std::string>& args, bool replaying) {
  CLI::App app{"Energy-based out-of-distribution detection toolkit"};
  app.set_version_flag("--version", std::string(eood_version()));
  app.require_subcommand(1);
  std::string manifest;
  app.add_option("--manifest", manifest, "Run manifest path (default: <output>.manifest.json)");

  BenchCmd bench;
  TrainCmd pre, fine;
  LogitsCmd logits;
  ScoreCmd score;
  CalibrateCmd calibrate;
  EvaluateCmd evaluate;
  SweepCmd sweep;
  GdaFitCmd gda_fit;
  GdaScoreCmd gda_score;
  FilterCmd filter;
  ReplayCmd replay;

  auto* c_bench = app.add_subcommand("bench", "Generate the synthetic benchmark");
  bench.add(c_bench);
  auto* c_train = app.add_subcommand("train", "Pretrain or fine-tune the classifier");
  c_train->require_subcommand(1);
  auto* c_pre = c_train->add_subcommand("pretrain", "NLL-only training");
  pre.add(c_pre, false);
  auto* c_fine = c_train->add_subcommand("finetune", "Energy-bounded fine-tuning");
  fine.add(c_fine, true);
  auto* c_logits = app.add_subcommand("logits", "Write model logits for a table");
  logits.add(c_logits);
  auto* c_score = app.add_subcommand("score", "Score a logit table");
  score.add(c_score);
  auto* c_cal = app.add_subcommand("calibrate", "Calibrate a detector threshold");
  calibrate.add(c_cal);
  auto* c_eval = app.add_subcommand("evaluate", "FPR/AUROC/AUPR for two score files");
  evaluate.add(c_eval);
  auto* c_sweep = app.add_subcommand("sweep-temperature", "Metrics across temperatures");
  sweep.add(c_sweep);
  auto* c_gda = app.add_subcommand("gda", "Gaussian discriminant analysis");
  c_gda->require_subcommand(1);
  auto* c_gfit = c_gda->add_subcommand("fit", "Fit a GDA model");
  gda_fit.add(c_gfit);
  auto* c_gscore = c_gda->add_subcommand("score", "Score features with a GDA model");
  gda_score.add(c_gscore);
  auto* c_filter = app.add_subcommand("filter", "Reject OOD rows, classify the rest");
  filter.add(c_filter);
  auto* c_replay = app.add_subcommand("replay", "Re-run a command from its manifest");
  replay.add(c_replay);

  std::vector<const char*> raw{"energy_ood"};
  for (const auto& a : args) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (c_replay->parsed()) {
    if (replaying) usage("a manifest cannot replay another replay");
    return replay.run();
  }

  Run run;
  run.argv = args;
  run.manifest_path = manifest;
  const auto start = std::chrono::steady_clock::now();
  if (c_bench->parsed()) {
    run.command = "bench";
    bench.run(run);
  } else if (c_pre->parsed()) {
    run.command = "train pretrain";
    pre.run(run);
  } else if (c_fine->parsed()) {
    run.command = "train finetune";
    fine.run(run);
  } else if (c_logits->parsed()) {
    run.command = "logits";
    logits.run(run);
  } else if (c_score->parsed()) {
    run.command = "score";
    score.run(run);
  } else if (c_cal->parsed()) {
    run.command = "calibrate";
    calibrate.run(run);
  } else if (c_eval->parsed()) {
    run.command = "evaluate";
    evaluate.run(run);
  } else if (c_sweep->parsed()) {
    run.command = "sweep-temperature";
    sweep.run(run);
  } else if (c_gfit->parsed()) {
    run.command = "gda fit";
    gda_fit.run(run);
  } else if (c_gscore->parsed()) {
    run.command = "gda score";
    gda_score.run(run);
  } else if (c_filter->parsed()) {
    run.command = "filter";
    filter.run(run);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(run, seconds);
  return kExitOk;
}

void apply_thread_env() {
  const char* env = std::getenv("ENERGY_OOD_THREADS");
  if (env == nullptr || *env == '\0') return;
  unsigned n = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto res = std::from_chars(env, end, n);
  if (res.ec != std::errc() || res.ptr != end) usage(std::string("ENERGY_OOD_THREADS must be a non-negative integer, got '") + env + "'");
  eood_set_num_threads(n);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    apply_thread_env();
    return dispatch(std::vector<std::string>(argv + 1, argv + argc), false);
  } catch (const CliError& e) {
    std::cerr << "energy_ood: error: " << e.what() << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "energy_ood: error: " << e.what() << "\n";
    return kExitOther;
  }
}
