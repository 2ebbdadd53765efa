// SPDX-License-Identifier: Apache-2.0
//
// Glue between the public C interface and the C++ core. Exceptions never
// cross this boundary: each entry point maps them to an eood_status and
// records the message for eood_last_error().

#include "energy_ood/energy_ood.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/bench.hpp"
#include "core/detector.hpp"
#include "core/error.hpp"
#include "core/gda.hpp"
#include "core/metrics.hpp"
#include "core/mlp.hpp"
#include "core/parallel.hpp"
#include "core/scores.hpp"

namespace eo = energy_ood;

struct eood_table {
  eo::Table table;
};

struct eood_mlp {
  eo::MlpModel model;
};

struct eood_gda {
  eo::GdaModel model;
};

namespace {

thread_local std::string t_last_error;

eood_status map_code(eo::ErrorCode code) {
  switch (code) {
    case eo::ErrorCode::kInvalidArgument: return EOOD_ERR_INVALID_ARGUMENT;
    case eo::ErrorCode::kOutOfRange: return EOOD_ERR_OUT_OF_RANGE;
    case eo::ErrorCode::kParse: return EOOD_ERR_PARSE;
    case eo::ErrorCode::kIo: return EOOD_ERR_IO;
    case eo::ErrorCode::kNumerical: return EOOD_ERR_NUMERICAL;
  }
  return EOOD_ERR_INTERNAL;
}

template <typename F>
eood_status guarded(F&& body) {
  try {
    body();
    return EOOD_OK;
  } catch (const eo::Error& e) {
    t_last_error = e.what();
    return map_code(e.code());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return EOOD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return EOOD_ERR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown error";
    return EOOD_ERR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) eo::fail(eo::ErrorCode::kInvalidArgument, std::string(name) + " must not be NULL");
}

std::span<const double> view(const double* p, std::size_t n, const char* name) {
  if (n > 0) need(p, name);
  return std::span<const double>(p, n);
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

eo::ScoreKind to_kind(eood_score_kind k) {
  switch (k) {
    case EOOD_SCORE_NEG_ENERGY: return eo::ScoreKind::kNegEnergy;
    case EOOD_SCORE_MSP: return eo::ScoreKind::kMsp;
    case EOOD_SCORE_NEG_ENERGY_GDA: return eo::ScoreKind::kNegEnergyGda;
    case EOOD_SCORE_MAHALANOBIS: return eo::ScoreKind::kMahalanobis;
  }
  eo::fail(eo::ErrorCode::kInvalidArgument, "unknown score kind");
}

eood_score_kind from_kind(eo::ScoreKind k) {
  switch (k) {
    case eo::ScoreKind::kNegEnergy: return EOOD_SCORE_NEG_ENERGY;
    case eo::ScoreKind::kMsp: return EOOD_SCORE_MSP;
    case eo::ScoreKind::kNegEnergyGda: return EOOD_SCORE_NEG_ENERGY_GDA;
    case eo::ScoreKind::kMahalanobis: return EOOD_SCORE_MAHALANOBIS;
  }
  return EOOD_SCORE_NEG_ENERGY;
}

eo::DetectorConfig to_detector(const eood_detector* d) {
  need(d, "detector");
  eo::DetectorConfig cfg{d->tau, d->target_tpr, to_kind(d->score_kind)};
  cfg.validate();
  return cfg;
}

eood_detector from_detector(const eo::DetectorConfig& cfg) {
  return eood_detector{cfg.tau, cfg.target_tpr, from_kind(cfg.score_kind)};
}

eo::TrainConfig to_train(const eood_train_config* c) {
  need(c, "train config");
  eo::TrainConfig t;
  t.lambda = c->lambda;
  t.m_in = c->m_in;
  t.m_out = c->m_out;
  t.lr0 = c->lr0;
  t.epochs = c->epochs;
  t.batch_in = c->batch_in;
  t.batch_out = c->batch_out;
  t.seed = c->seed;
  t.temp = c->temp;
  return t;
}

eood_train_config from_train(const eo::TrainConfig& t) {
  return eood_train_config{t.lambda, t.m_in, t.m_out, t.lr0, t.epochs, t.batch_in, t.batch_out, t.seed, t.temp};
}

eo::Batch to_batch(const eood_batch* b, const char* name) {
  need(b, name);
  eo::Batch out;
  out.dim = b->dim;
  out.inputs = view(b->inputs, b->rows * b->dim, name);
  if (b->labels != nullptr) out.labels = std::span<const std::int32_t>(b->labels, b->rows);
  return out;
}

eo::Dataset to_dataset(const eood_batch* b, const char* name) {
  need(b, name);
  eo::Dataset d;
  d.dim = b->dim;
  if (b->rows * b->dim > 0) need(b->inputs, name);
  d.inputs.assign(b->inputs, b->inputs + b->rows * b->dim);
  if (b->labels != nullptr) {
    d.labels.assign(b->labels, b->labels + b->rows);
  } else {
    d.labels.assign(b->rows, eo::kNoLabel);
  }
  return d;
}

eo::ScoreSet to_set(const double* in, std::size_t n_in, const double* out, std::size_t n_out) {
  const auto a = view(in, n_in, "in_scores");
  const auto b = view(out, n_out, "out_scores");
  return eo::ScoreSet{{a.begin(), a.end()}, {b.begin(), b.end()}};
}

eo::TrainLogger to_logger(eood_train_log_fn fn, void* user) {
  if (fn == nullptr) return {};
  return [fn, user](const eo::TrainLogRow& r) {
    const eood_train_log_row row{r.epoch, r.step, r.lr, r.nll, r.energy_reg, r.total};
    fn(&row, user);
  };
}

eo::Split to_split(eood_split s) { return s == EOOD_SPLIT_OUT ? eo::Split::kOut : eo::Split::kIn; }

eo::TableFormat to_format(eood_table_format f) {
  return f == EOOD_FORMAT_RAW64 ? eo::TableFormat::kRaw64 : eo::TableFormat::kCsv;
}

void copy_dataset(const eo::Dataset& d, double* values, int32_t* labels) {
  if (!d.inputs.empty()) {
    need(values, "values");
    std::copy(d.inputs.begin(), d.inputs.end(), values);
  }
  if (labels != nullptr) std::copy(d.labels.begin(), d.labels.end(), labels);
}

}  // namespace

extern "C" {

const char* eood_version(void) { return "0.1.0"; }

const char* eood_last_error(void) { return t_last_error.c_str(); }

const char* eood_status_name(eood_status status) {
  switch (status) {
    case EOOD_OK: return "ok";
    case EOOD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EOOD_ERR_OUT_OF_RANGE: return "out of range";
    case EOOD_ERR_PARSE: return "parse error";
    case EOOD_ERR_IO: return "i/o error";
    case EOOD_ERR_NUMERICAL: return "numerical failure";
    case EOOD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void eood_free(void* ptr) { std::free(ptr); }

void eood_set_num_threads(unsigned n) { eo::set_max_threads(n); }

eood_status eood_score_kind_parse(const char* name, eood_score_kind* out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = from_kind(eo::score_kind_from_string(name));
  });
}

const char* eood_score_kind_name(eood_score_kind kind) {
  switch (kind) {
    case EOOD_SCORE_NEG_ENERGY: return "neg_energy";
    case EOOD_SCORE_MSP: return "msp";
    case EOOD_SCORE_NEG_ENERGY_GDA: return "neg_energy_gda";
    case EOOD_SCORE_MAHALANOBIS: return "mahalanobis";
  }
  return "unknown";
}

// ---- scores ---------------------------------------------------------------

eood_status eood_energy_score(const double* logits, size_t k, double temp, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::energy_score(view(logits, k, "logits"), eo::Temperature(temp));
  });
}

eood_status eood_neg_energy_score(const double* logits, size_t k, double temp, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::neg_energy_score(view(logits, k, "logits"), eo::Temperature(temp));
  });
}

eood_status eood_label_energy(const double* logits, size_t k, size_t label, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::label_energy(view(logits, k, "logits"), label);
  });
}

eood_status eood_softmax(const double* logits, size_t k, double temp, double* out_probs) {
  return guarded([&] {
    need(out_probs, "out_probs");
    eo::softmax_into(view(logits, k, "logits"), eo::Temperature(temp), std::span<double>(out_probs, k));
  });
}

eood_status eood_msp_score(const double* logits, size_t k, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::msp_score(view(logits, k, "logits"));
  });
}

eood_status eood_score_logits(const double* logits, size_t rows, size_t k, eood_score_kind kind, double temp,
                              double* out) {
  return guarded([&] {
    if (rows > 0) need(out, "out");
    const auto scores = eo::score_batch(view(logits, rows * k, "logits"), k, to_kind(kind), eo::Temperature(temp));
    std::copy(scores.begin(), scores.end(), out);
  });
}

eood_status eood_energy_logits(const double* logits, size_t rows, size_t k, double temp, double* out) {
  return guarded([&] {
    if (rows > 0) need(out, "out");
    const auto scores = eo::energy_batch(view(logits, rows * k, "logits"), k, eo::Temperature(temp));
    std::copy(scores.begin(), scores.end(), out);
  });
}

// ---- detector -------------------------------------------------------------

eood_status eood_calibrate(const double* in_scores, size_t n, double target_tpr, eood_score_kind kind,
                           eood_detector* out) {
  return guarded([&] {
    need(out, "out");
    *out = from_detector(eo::calibrate_threshold(view(in_scores, n, "in_scores"), target_tpr, to_kind(kind)));
  });
}

eood_status eood_pass_rate(const double* scores, size_t n, double tau, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::pass_rate(view(scores, n, "scores"), tau);
  });
}

eood_status eood_classify(double score, const eood_detector* det, int* label) {
  return guarded([&] {
    need(label, "label");
    *label = eo::classify(score, to_detector(det)).label;
  });
}

eood_status eood_filter_and_predict(const double* logits, size_t k, const eood_detector* det, double temp,
                                    int64_t* predicted) {
  return guarded([&] {
    need(predicted, "predicted");
    const auto r = eo::filter_and_predict(view(logits, k, "logits"), to_detector(det), eo::Temperature(temp));
    *predicted = r ? static_cast<int64_t>(*r) : -1;
  });
}

eood_status eood_detector_to_json(const eood_detector* det, char** json) {
  return guarded([&] {
    need(json, "json");
    *json = dup_string(eo::to_json(to_detector(det)));
  });
}

eood_status eood_detector_from_json(const char* json, eood_detector* out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = from_detector(eo::detector_from_json(json));
  });
}

// ---- metrics --------------------------------------------------------------

eood_status eood_fpr_at_tpr(const double* in_scores, size_t n_in, const double* out_scores, size_t n_out,
                            double q, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::fpr_at_tpr(to_set(in_scores, n_in, out_scores, n_out), q);
  });
}

eood_status eood_auroc(const double* in_scores, size_t n_in, const double* out_scores, size_t n_out,
                       double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::auroc(to_set(in_scores, n_in, out_scores, n_out));
  });
}

eood_status eood_aupr(const double* in_scores, size_t n_in, const double* out_scores, size_t n_out, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::aupr(to_set(in_scores, n_in, out_scores, n_out));
  });
}

eood_status eood_full_report(const double* in_scores, size_t n_in, const double* out_scores, size_t n_out,
                             double q, int both_orientations, eood_report* out) {
  return guarded([&] {
    need(out, "out");
    const auto r = eo::full_report(to_set(in_scores, n_in, out_scores, n_out), q, both_orientations != 0);
    *out = eood_report{r.fpr_at_tpr, r.auroc, r.aupr, r.n_in, r.n_out, r.tpr_target,
                       r.aupr_out.has_value() ? 1 : 0, r.aupr_out.value_or(0.0)};
  });
}

eood_status eood_report_to_json(const eood_report* report, char** json) {
  return guarded([&] {
    need(report, "report");
    need(json, "json");
    eo::MetricsReport r;
    r.fpr_at_tpr = report->fpr_at_tpr;
    r.auroc = report->auroc;
    r.aupr = report->aupr;
    r.n_in = report->n_in;
    r.n_out = report->n_out;
    r.tpr_target = report->tpr_target;
    if (report->has_aupr_out) r.aupr_out = report->aupr_out;
    *json = dup_string(eo::to_json(r));
  });
}

// ---- score files ----------------------------------------------------------

eood_status eood_scores_save(const char* path, const double* scores, size_t n) {
  return guarded([&] {
    need(path, "path");
    eo::save_scores(path, view(scores, n, "scores"));
  });
}

eood_status eood_scores_load(const char* path, const char* column, double** scores, size_t* n) {
  return guarded([&] {
    need(path, "path");
    need(scores, "scores");
    need(n, "n");
    const auto v = eo::load_scores(path, column ? column : "score");
    auto* buf = static_cast<double*>(std::malloc(v.size() * sizeof(double)));
    if (buf == nullptr) throw std::bad_alloc();
    std::copy(v.begin(), v.end(), buf);
    *scores = buf;
    *n = v.size();
  });
}

// ---- tables ---------------------------------------------------------------

eood_status eood_table_load(const char* path, eood_table_format format, eood_table** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new eood_table{eo::load_table(path, to_format(format))};
  });
}

eood_status eood_table_save(const eood_table* table, const char* path, eood_table_format format) {
  return guarded([&] {
    need(table, "table");
    need(path, "path");
    eo::save_table(path, table->table, to_format(format));
  });
}

void eood_table_destroy(eood_table* table) { delete table; }

size_t eood_table_dim(const eood_table* table) { return table ? table->table.dim : 0; }

size_t eood_table_rows(const eood_table* table) { return table ? table->table.rows() : 0; }

size_t eood_table_split_rows(const eood_table* table, eood_split split) {
  if (table == nullptr) return 0;
  const auto s = to_split(split);
  return static_cast<size_t>(std::count(table->table.splits.begin(), table->table.splits.end(), s));
}

eood_status eood_table_copy_split(const eood_table* table, eood_split split, double* values, int32_t* labels) {
  return guarded([&] {
    need(table, "table");
    copy_dataset(table->table.select(to_split(split)), values, labels);
  });
}

eood_status eood_table_copy_all(const eood_table* table, double* values, int32_t* labels, int32_t* splits) {
  return guarded([&] {
    need(table, "table");
    copy_dataset(table->table.all(), values, labels);
    if (splits != nullptr) {
      for (std::size_t i = 0; i < table->table.rows(); ++i) {
        splits[i] = table->table.splits[i] == eo::Split::kIn ? EOOD_SPLIT_IN : EOOD_SPLIT_OUT;
      }
    }
  });
}

eood_status eood_table_create(size_t rows, size_t dim, const double* values, const int32_t* labels,
                              const int32_t* splits, eood_table** out) {
  return guarded([&] {
    need(out, "out");
    eo::require(dim >= 1, "table dimension must be >= 1");
    eo::Table t;
    t.dim = dim;
    const auto v = view(values, rows * dim, "values");
    t.values.assign(v.begin(), v.end());
    for (double x : t.values) eo::require(std::isfinite(x), "table values must be finite");
    t.labels.assign(rows, eo::kNoLabel);
    if (labels != nullptr) t.labels.assign(labels, labels + rows);
    t.splits.assign(rows, eo::Split::kIn);
    if (splits != nullptr) {
      for (std::size_t i = 0; i < rows; ++i) {
        eo::require(splits[i] == EOOD_SPLIT_IN || splits[i] == EOOD_SPLIT_OUT, "bad split value");
        t.splits[i] = splits[i] == EOOD_SPLIT_IN ? eo::Split::kIn : eo::Split::kOut;
      }
    }
    *out = new eood_table{std::move(t)};
  });
}

eood_status eood_table_set_labels(eood_table* table, const int32_t* labels, size_t rows) {
  return guarded([&] {
    need(table, "table");
    eo::require(rows == table->table.rows(), "label count does not match table rows");
    if (rows > 0) need(labels, "labels");
    for (std::size_t i = 0; i < rows; ++i) eo::require(labels[i] >= eo::kNoLabel, "labels must be >= -1");
    table->table.labels.assign(labels, labels + rows);
  });
}

eood_status eood_bench_default_spec(char** json) {
  return guarded([&] {
    need(json, "json");
    *json = dup_string(eo::to_json(eo::BenchmarkSpec{}));
  });
}

eood_status eood_bench_generate(const char* spec_json, eood_table** train, eood_table** test,
                                char** manifest_json) {
  return guarded([&] {
    need(spec_json, "spec_json");
    const auto spec = eo::benchmark_spec_from_json(spec_json);
    auto bench = eo::generate(spec);
    // Build everything before handing out ownership.
    auto* train_handle = train ? new eood_table{eo::Table::join(bench.train_in, bench.train_out)} : nullptr;
    eood_table* test_handle = nullptr;
    try {
      test_handle = test ? new eood_table{eo::Table::join(bench.test_in, bench.test_out)} : nullptr;
      if (manifest_json) *manifest_json = dup_string(eo::benchmark_manifest_json(spec));
    } catch (...) {
      delete train_handle;
      delete test_handle;
      throw;
    }
    if (train) *train = train_handle;
    if (test) *test = test_handle;
  });
}

// ---- MLP ------------------------------------------------------------------

void eood_train_config_default(eood_train_config* cfg) {
  if (cfg != nullptr) *cfg = from_train(eo::TrainConfig{});
}

eood_status eood_train_config_from_json(const char* json, eood_train_config* cfg) {
  return guarded([&] {
    need(json, "json");
    need(cfg, "cfg");
    *cfg = from_train(eo::train_config_from_json(json, to_train(cfg)));
  });
}

eood_status eood_train_config_to_json(const eood_train_config* cfg, char** json) {
  return guarded([&] {
    need(json, "json");
    *json = dup_string(eo::to_json(to_train(cfg)));
  });
}

eood_status eood_mlp_create(const size_t* layer_sizes, size_t n_layers, uint64_t seed, eood_mlp** out) {
  return guarded([&] {
    need(out, "out");
    if (n_layers > 0) need(layer_sizes, "layer_sizes");
    eo::MlpConfig cfg{std::vector<std::size_t>(layer_sizes, layer_sizes + n_layers)};
    *out = new eood_mlp{eo::MlpModel::init(cfg, seed)};
  });
}

eood_status eood_mlp_clone(const eood_mlp* model, eood_mlp** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = new eood_mlp{model->model};
  });
}

void eood_mlp_destroy(eood_mlp* model) { delete model; }

size_t eood_mlp_num_inputs(const eood_mlp* model) { return model ? model->model.config().inputs() : 0; }

size_t eood_mlp_num_classes(const eood_mlp* model) { return model ? model->model.config().classes() : 0; }

size_t eood_mlp_num_params(const eood_mlp* model) { return model ? model->model.num_params() : 0; }

eood_status eood_mlp_get_params(const eood_mlp* model, double* out, size_t n) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    eo::require(n == model->model.num_params(), "parameter buffer has the wrong length");
    const auto flat = model->model.flat_params();
    std::copy(flat.begin(), flat.end(), out);
  });
}

eood_status eood_mlp_set_params(eood_mlp* model, const double* params, size_t n) {
  return guarded([&] {
    need(model, "model");
    model->model.set_flat_params(view(params, n, "params"));
  });
}

eood_status eood_mlp_forward(const eood_mlp* model, const double* x, size_t dim, double* logits, size_t k) {
  return guarded([&] {
    need(model, "model");
    need(logits, "logits");
    eo::require(k == model->model.config().classes(), "logit buffer length must equal K");
    const auto f = model->model.forward(view(x, dim, "x"));
    std::copy(f.begin(), f.end(), logits);
  });
}

eood_status eood_mlp_forward_batch(const eood_mlp* model, const double* x, size_t rows, size_t dim,
                                   double* logits) {
  return guarded([&] {
    need(model, "model");
    if (rows > 0) need(logits, "logits");
    const auto f = model->model.forward_batch(eo::Batch{view(x, rows * dim, "x"), {}, dim});
    std::copy(f.begin(), f.end(), logits);
  });
}

eood_status eood_mlp_accuracy(const eood_mlp* model, const eood_batch* batch, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = eo::accuracy(model->model, to_dataset(batch, "batch"));
  });
}

eood_status eood_mlp_loss(const eood_mlp* model, eood_loss_kind kind, const eood_batch* in, const eood_batch* out,
                          const eood_train_config* cfg, double* loss, double* grad, size_t grad_len) {
  return guarded([&] {
    need(model, "model");
    need(loss, "loss");
    const eo::TrainConfig tc = to_train(cfg);
    const auto& m = model->model;
    std::optional<eo::LossSpec> spec;
    switch (kind) {
      case EOOD_LOSS_NLL:
        spec.emplace(eo::NllLoss{to_batch(in, "in"), eo::Temperature(tc.temp)});
        break;
      case EOOD_LOSS_ENERGY_REG:
        spec.emplace(eo::EnergyRegLoss{to_batch(in, "in"), to_batch(out, "out"), tc.m_in, tc.m_out});
        break;
      case EOOD_LOSS_TOTAL: {
        const eo::Batch out_batch = out ? to_batch(out, "out") : eo::Batch{{}, {}, m.config().inputs()};
        spec.emplace(eo::TotalLoss{to_batch(in, "in"), out_batch, tc});
        break;
      }
      case EOOD_LOSS_OE:
        spec.emplace(eo::OeLoss{to_batch(out, "out"), eo::Temperature(tc.temp)});
        break;
      default:
        eo::fail(eo::ErrorCode::kInvalidArgument, "unknown loss kind");
    }
    *loss = eo::evaluate(m, *spec);
    if (grad != nullptr) {
      eo::require(grad_len == m.num_params(), "gradient buffer has the wrong length");
      const auto g = eo::flatten(eo::backward(m, *spec));
      std::copy(g.begin(), g.end(), grad);
    }
  });
}

eood_status eood_mlp_pretrain(eood_mlp* model, const eood_batch* in, const eood_train_config* cfg,
                              eood_train_log_fn log, void* user) {
  return guarded([&] {
    need(model, "model");
    model->model = eo::pretrain(model->model, to_dataset(in, "in"), to_train(cfg), to_logger(log, user));
  });
}

eood_status eood_mlp_finetune(eood_mlp* model, const eood_batch* in, const eood_batch* out,
                              const eood_train_config* cfg, eood_train_log_fn log, void* user) {
  return guarded([&] {
    need(model, "model");
    model->model = eo::finetune(model->model, to_dataset(in, "in"), to_dataset(out, "out"), to_train(cfg),
                                to_logger(log, user));
  });
}

eood_status eood_mlp_energy_stats(const eood_mlp* model, const eood_batch* batch, double* mean, double* stddev) {
  return guarded([&] {
    need(model, "model");
    need(mean, "mean");
    need(stddev, "stddev");
    const auto s = eo::energy_stats(model->model, to_dataset(batch, "batch"));
    *mean = s.mean;
    *stddev = s.stddev;
  });
}

eood_status eood_mlp_auto_margins(const eood_mlp* model, const eood_batch* in, const eood_batch* out, double* m_in,
                                  double* m_out) {
  return guarded([&] {
    need(model, "model");
    need(m_in, "m_in");
    need(m_out, "m_out");
    const auto s_in = eo::energy_stats(model->model, to_dataset(in, "in"));
    const auto s_out = eo::energy_stats(model->model, to_dataset(out, "out"));
    std::tie(*m_in, *m_out) = eo::margins_from_energies(s_in, s_out);
  });
}

eood_status eood_cosine_lr(size_t step, size_t total_steps, double lr0, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = eo::cosine_lr(step, total_steps, lr0);
  });
}

eood_status eood_mlp_save(const eood_mlp* model, const char* path, const eood_train_config* cfg) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    std::optional<eo::TrainConfig> tc;
    if (cfg != nullptr) tc = to_train(cfg);
    eo::save_checkpoint(path, model->model, tc);
  });
}

eood_status eood_mlp_load(const char* path, eood_mlp** out, eood_train_config* cfg, int* has_cfg) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto ckpt = eo::load_checkpoint(path);
    if (has_cfg) *has_cfg = ckpt.train_config ? 1 : 0;
    if (cfg && ckpt.train_config) *cfg = from_train(*ckpt.train_config);
    *out = new eood_mlp{std::move(ckpt.model)};
  });
}

eood_status eood_mlp_score_split(const eood_mlp* model, const eood_table* table, eood_split split,
                                 eood_score_kind kind, double temp, double* out) {
  return guarded([&] {
    need(model, "model");
    need(table, "table");
    const auto scores = eo::score_rows(model->model, table->table.select(to_split(split)), to_kind(kind),
                                       eo::Temperature(temp));
    if (!scores.empty()) need(out, "out");
    std::copy(scores.begin(), scores.end(), out);
  });
}

// ---- GDA ------------------------------------------------------------------

eood_status eood_gda_fit(const double* features, size_t rows, size_t dim, const int32_t* labels, double ridge,
                         eood_gda** out) {
  return guarded([&] {
    need(out, "out");
    if (rows > 0) need(labels, "labels");
    *out = new eood_gda{eo::fit_gda(view(features, rows * dim, "features"), dim,
                                    std::span<const std::int32_t>(labels, rows), ridge)};
  });
}

eood_status eood_gda_create(const double* means, size_t k, size_t dim, const double* covariance,
                            const double* priors, double ridge, eood_gda** out) {
  return guarded([&] {
    need(out, "out");
    const auto m = view(means, k * dim, "means");
    const auto c = view(covariance, dim * dim, "covariance");
    const auto p = view(priors, k, "priors");
    std::vector<Eigen::VectorXd> mv;
    for (std::size_t i = 0; i < k; ++i) {
      mv.push_back(Eigen::Map<const Eigen::VectorXd>(m.data() + i * dim, static_cast<Eigen::Index>(dim)));
    }
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd cov =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(c.data(), d, d);
    *out = new eood_gda{eo::GdaModel(std::move(mv), std::move(cov), {p.begin(), p.end()}, ridge)};
  });
}

void eood_gda_destroy(eood_gda* model) { delete model; }

size_t eood_gda_num_classes(const eood_gda* model) { return model ? model->model.classes() : 0; }

size_t eood_gda_dim(const eood_gda* model) { return model ? model->model.dim() : 0; }

eood_status eood_gda_posterior(const eood_gda* model, const double* x, size_t dim, double* out, size_t k) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    eo::require(k == model->model.classes(), "posterior buffer length must equal K");
    const auto p = eo::gda_posterior(model->model, view(x, dim, "x"));
    std::copy(p.begin(), p.end(), out);
  });
}

eood_status eood_gda_energy_u(const eood_gda* model, const double* x, size_t dim, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = eo::energy_u(model->model, view(x, dim, "x"));
  });
}

eood_status eood_gda_mahalanobis(const eood_gda* model, const double* x, size_t dim, double* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = eo::mahalanobis_score(model->model, view(x, dim, "x"));
  });
}

eood_status eood_gda_to_json(const eood_gda* model, char** json) {
  return guarded([&] {
    need(model, "model");
    need(json, "json");
    *json = dup_string(eo::to_json(model->model));
  });
}

eood_status eood_gda_from_json(const char* json, eood_gda** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new eood_gda{eo::gda_from_json(json)};
  });
}

}  // extern "C"
