// SPDX-License-Identifier: Apache-2.0
#include "core/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace energy_ood {

void MlpConfig::validate() const {
  require(layer_sizes.size() >= 2, "MLP needs at least an input and an output layer");
  for (std::size_t s : layer_sizes) require(s >= 1, "MLP layer sizes must be positive");
}

MlpModel::MlpModel(MlpConfig config, std::vector<Layer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  require(layers_.size() == config_.layer_sizes.size() - 1, "layer count does not match config");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(config_.layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(config_.layer_sizes[l + 1]);
    require(layers_[l].weight.rows() == fan_out && layers_[l].weight.cols() == fan_in &&
                layers_[l].bias.size() == fan_out,
            "layer " + std::to_string(l) + " shape does not match config");
    require(layers_[l].weight.allFinite() && layers_[l].bias.allFinite(),
            "layer " + std::to_string(l) + " has non-finite parameters");
  }
}

MlpModel MlpModel::init(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed, Stream::kInit);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(config.layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(config.layer_sizes[l + 1]);
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = rng.uniform(-a, a);
    }
    layers.push_back(std::move(layer));
  }
  return MlpModel(config, std::move(layers));
}

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

// Pre-activations per layer; activations are recomputed from them.
struct Trace {
  std::vector<Eigen::VectorXd> z;
};

Eigen::VectorXd forward_trace(const std::vector<Layer>& layers, std::span<const double> x, Trace* trace) {
  Eigen::VectorXd h = as_vector(x);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd z = layers[l].weight * h + layers[l].bias;
    if (l + 1 < layers.size()) {
      h = z.cwiseMax(0.0);
    } else {
      h = z;
    }
    if (trace) trace->z.push_back(std::move(z));
  }
  return h;
}

void check_input(const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.config().inputs()) {
    fail(ErrorCode::kInvalidArgument, "input has dimension " + std::to_string(x.size()) +
                                          ", model expects " + std::to_string(model.config().inputs()));
  }
}

void check_batch(const MlpModel& model, const Batch& b, bool need_labels, const char* what) {
  require(b.dim == model.config().inputs(), std::string(what) + ": dimension mismatch");
  require(b.rows() >= 1, std::string(what) + " must not be empty");
  require(b.inputs.size() == b.rows() * b.dim, std::string(what) + ": ragged inputs");
  if (need_labels) {
    require(b.labels.size() == b.rows(), std::string(what) + " needs one label per row");
    for (std::int32_t y : b.labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= model.config().classes()) {
        fail(ErrorCode::kOutOfRange, std::string(what) + ": label " + std::to_string(y) + " out of range");
      }
    }
  }
}

// Backpropagates dL/dlogits for one sample into grads.
void backprop(const std::vector<Layer>& layers, std::span<const double> x, const Trace& trace,
              Eigen::VectorXd delta, Gradients& grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l == 0) {
      grads[0].weight.noalias() += delta * as_vector(x).transpose();
    } else {
      grads[l].weight.noalias() += delta * trace.z[l - 1].cwiseMax(0.0).transpose();
    }
    grads[l].bias += delta;
    if (l > 0) {
      Eigen::VectorXd back = layers[l].weight.transpose() * delta;
      // ReLU subgradient at 0 is 0.
      delta = back.cwiseProduct((trace.z[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
}

// Per-sample loss term. Returns the term and, when dlogits is non-null, its
// gradient with respect to the logits.
using SampleLoss = std::function<double(std::size_t row, const Eigen::VectorXd& logits, Eigen::VectorXd* dlogits)>;

// Sums per-sample terms scaled by `scale` in row order.
double accumulate(const MlpModel& model, const Batch& batch, double scale, const SampleLoss& term,
                  Gradients* grads) {
  double total = 0.0;
  Eigen::VectorXd dlogits;
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const auto x = batch.row(i);
    if (grads) {
      Trace trace;
      const Eigen::VectorXd logits = forward_trace(model.layers(), x, &trace);
      total += term(i, logits, &dlogits);
      backprop(model.layers(), x, trace, scale * dlogits, *grads);
    } else {
      total += term(i, forward_trace(model.layers(), x, nullptr), nullptr);
    }
  }
  return scale * total;
}

// logsumexp(f / T) * T and softmax(f / T).
double lse_and_softmax(const Eigen::VectorXd& f, double t, Eigen::VectorXd* p) {
  const double m = f.maxCoeff();
  Eigen::VectorXd e = ((f.array() - m) / t).exp().matrix();
  const double s = e.sum();
  if (p) *p = e / s;
  return m + t * std::log(s);
}

SampleLoss nll_term(const Batch& b, double t) {
  return [&b, t](std::size_t i, const Eigen::VectorXd& f, Eigen::VectorXd* d) {
    const auto y = static_cast<Eigen::Index>(b.labels[i]);
    Eigen::VectorXd p;
    const double lse = lse_and_softmax(f, t, d ? &p : nullptr);
    if (d) {
      p(y) -= 1.0;
      *d = p / t;
    }
    return (lse - f(y)) / t;
  };
}

// max(0, E - m_in)^2 with E = -logsumexp(f).
SampleLoss reg_in_term(double m_in) {
  return [m_in](std::size_t, const Eigen::VectorXd& f, Eigen::VectorXd* d) {
    Eigen::VectorXd p;
    const double energy = -lse_and_softmax(f, 1.0, d ? &p : nullptr);
    const double h = std::max(0.0, energy - m_in);
    if (d) *d = -2.0 * h * p;
    return h * h;
  };
}

// max(0, m_out - E)^2.
SampleLoss reg_out_term(double m_out) {
  return [m_out](std::size_t, const Eigen::VectorXd& f, Eigen::VectorXd* d) {
    Eigen::VectorXd p;
    const double energy = -lse_and_softmax(f, 1.0, d ? &p : nullptr);
    const double h = std::max(0.0, m_out - energy);
    if (d) *d = 2.0 * h * p;
    return h * h;
  };
}

// Cross-entropy from uniform to softmax(f / T).
SampleLoss oe_term(double t) {
  return [t](std::size_t, const Eigen::VectorXd& f, Eigen::VectorXd* d) {
    const double k = static_cast<double>(f.size());
    Eigen::VectorXd p;
    const double lse = lse_and_softmax(f, t, d ? &p : nullptr);
    if (d) *d = (p.array() - 1.0 / k).matrix() / t;
    return (lse - f.mean()) / t;
  };
}

double inv_rows(const Batch& b) { return 1.0 / static_cast<double>(b.rows()); }

struct Evaluator {
  const MlpModel& model;
  Gradients* grads;

  double operator()(const NllLoss& l) const {
    check_batch(model, l.batch, true, "nll batch");
    return accumulate(model, l.batch, inv_rows(l.batch), nll_term(l.batch, l.temp.value()), grads);
  }

  double operator()(const EnergyRegLoss& l) const {
    check_batch(model, l.in_batch, false, "in batch");
    check_batch(model, l.out_batch, false, "out batch");
    return accumulate(model, l.in_batch, inv_rows(l.in_batch), reg_in_term(l.m_in), grads) +
           accumulate(model, l.out_batch, inv_rows(l.out_batch), reg_out_term(l.m_out), grads);
  }

  double operator()(const TotalLoss& l) const {
    l.cfg.validate();
    check_batch(model, l.in_batch, true, "in batch");
    const double lambda = l.cfg.lambda;
    const auto nll = nll_term(l.in_batch, l.cfg.temp);
    if (lambda == 0.0) return accumulate(model, l.in_batch, inv_rows(l.in_batch), nll, grads);
    check_batch(model, l.out_batch, false, "out batch");
    // In-distribution rows carry both terms, so their logit gradients are
    // combined before a single backward pass.
    const auto reg_in = reg_in_term(l.cfg.m_in);
    const SampleLoss combined = [&](std::size_t i, const Eigen::VectorXd& f, Eigen::VectorXd* d) {
      Eigen::VectorXd d_reg;
      const double a = nll(i, f, d);
      const double b = reg_in(i, f, d ? &d_reg : nullptr);
      if (d) *d += lambda * d_reg;
      return a + lambda * b;
    };
    return accumulate(model, l.in_batch, inv_rows(l.in_batch), combined, grads) +
           accumulate(model, l.out_batch, lambda * inv_rows(l.out_batch), reg_out_term(l.cfg.m_out), grads);
  }

  double operator()(const OeLoss& l) const {
    check_batch(model, l.out_batch, false, "outlier batch");
    return accumulate(model, l.out_batch, inv_rows(l.out_batch), oe_term(l.temp.value()), grads);
  }

  double operator()(const LabelEnergyLoss& l) const {
    check_input(model, l.x);
    if (l.label >= model.config().classes()) {
      fail(ErrorCode::kOutOfRange, "label " + std::to_string(l.label) + " out of range");
    }
    const Batch one{l.x, {}, l.x.size()};
    const auto y = static_cast<Eigen::Index>(l.label);
    const SampleLoss term = [y](std::size_t, const Eigen::VectorXd& f, Eigen::VectorXd* d) {
      if (d) {
        *d = Eigen::VectorXd::Zero(f.size());
        (*d)(y) = -1.0;
      }
      return -f(y);
    };
    return accumulate(model, one, 1.0, term, grads);
  }
};

}  // namespace

std::vector<double> MlpModel::forward(std::span<const double> x) const {
  check_input(*this, x);
  const Eigen::VectorXd out = forward_trace(layers_, x, nullptr);
  return std::vector<double>(out.data(), out.data() + out.size());
}

std::vector<double> MlpModel::forward_batch(const Batch& batch) const {
  require(batch.dim == config_.inputs(), "batch dimension does not match model input");
  const std::size_t k = config_.classes();
  std::vector<double> out(batch.rows() * k);
  parallel_for(batch.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const Eigen::VectorXd f = forward_trace(layers_, batch.row(r), nullptr);
      std::copy(f.data(), f.data() + f.size(), out.begin() + static_cast<std::ptrdiff_t>(r * k));
    }
  });
  return out;
}

std::size_t MlpModel::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> flatten(const Gradients& grads) {
  std::vector<double> flat;
  for (const auto& l : grads) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat.push_back(l.weight(r, c));
    }
    flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return flat;
}

std::vector<double> MlpModel::flat_params() const { return flatten(layers_); }

void MlpModel::set_flat_params(std::span<const double> flat) {
  require(flat.size() == num_params(), "flat parameter vector has the wrong length");
  for (double v : flat) require(std::isfinite(v), "parameters must be finite");
  std::size_t i = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[i++];
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat[i++];
  }
}

void TrainConfig::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0");
  require(std::isfinite(m_in) && std::isfinite(m_out), "margins must be finite");
  require(m_in <= m_out, "m_in must not exceed m_out");
  require(std::isfinite(lr0) && lr0 > 0.0, "lr0 must be > 0");
  require(batch_in >= 1 && batch_out >= 1, "batch sizes must be >= 1");
  require(std::isfinite(temp) && temp > 0.0, "temperature must be > 0");
}

double nll_loss(const MlpModel& model, const Batch& batch, Temperature temp) {
  return evaluate(model, NllLoss{batch, temp});
}

double energy_reg_loss(const MlpModel& model, const Batch& in_batch, const Batch& out_batch,
                       double m_in, double m_out) {
  return evaluate(model, EnergyRegLoss{in_batch, out_batch, m_in, m_out});
}

double total_loss(const MlpModel& model, const Batch& in_batch, const Batch& out_batch,
                  const TrainConfig& cfg) {
  return evaluate(model, TotalLoss{in_batch, out_batch, cfg});
}

double oe_loss(const MlpModel& model, const Batch& out_batch, Temperature temp) {
  return evaluate(model, OeLoss{out_batch, temp});
}

double evaluate(const MlpModel& model, const LossSpec& loss) {
  return std::visit(Evaluator{model, nullptr}, loss);
}

Gradients zeros_like(const MlpModel& model) {
  Gradients g;
  for (const auto& l : model.layers()) {
    g.push_back(Layer{Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                      Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

Gradients backward(const MlpModel& model, const LossSpec& loss) {
  Gradients grads = zeros_like(model);
  std::visit(Evaluator{model, &grads}, loss);
  return grads;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  require(total_steps >= 1, "total_steps must be >= 1");
  if (step > total_steps) {
    fail(ErrorCode::kOutOfRange, "step " + std::to_string(step) + " exceeds total " + std::to_string(total_steps));
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

struct Gathered {
  std::vector<double> inputs;
  std::vector<std::int32_t> labels;
};

void gather(const Dataset& data, std::span<const std::size_t> idx, Gathered& out) {
  out.inputs.clear();
  out.labels.clear();
  for (std::size_t i : idx) {
    const auto r = data.row(i);
    out.inputs.insert(out.inputs.end(), r.begin(), r.end());
    if (!data.labels.empty()) out.labels.push_back(data.labels[i]);
  }
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Endless shuffled pass over outlier rows.
class CyclingSampler {
 public:
  CyclingSampler(std::size_t n, Rng& rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    shuffle(order_, rng_);
  }
  void next(std::size_t count, std::vector<std::size_t>& out) {
    out.clear();
    while (out.size() < count) {
      if (pos_ == order_.size()) {
        shuffle(order_, rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng& rng_;
};

bool all_finite(const Gradients& g) {
  for (const auto& l : g) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

MlpModel train(MlpModel model, const Dataset& in_data, const Dataset* out_data, const TrainConfig& cfg,
               const TrainLogger& log) {
  cfg.validate();
  in_data.validate();
  require(in_data.rows() >= 1, "in-distribution training data is empty");
  require(in_data.labeled(), "in-distribution training data must be fully labeled");
  require(in_data.dim == model.config().inputs(), "training data dimension does not match model");
  const bool use_outliers = out_data != nullptr && cfg.lambda > 0.0;
  if (use_outliers) {
    out_data->validate();
    require(out_data->rows() >= 1, "outlier training data is empty");
    require(out_data->dim == model.config().inputs(), "outlier data dimension does not match model");
  }
  if (cfg.epochs == 0) return model;

  const std::size_t n_in = in_data.rows();
  const std::size_t steps_per_epoch = (n_in + cfg.batch_in - 1) / cfg.batch_in;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;

  Rng rng(cfg.seed, Stream::kShuffle);
  std::vector<std::size_t> order(n_in);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::optional<CyclingSampler> out_sampler;
  if (use_outliers) out_sampler.emplace(out_data->rows(), rng);

  Gathered in_rows;
  Gathered out_rows;
  std::vector<std::size_t> out_idx;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < n_in; start += cfg.batch_in, ++step) {
      const std::size_t count = std::min(cfg.batch_in, n_in - start);
      gather(in_data, std::span<const std::size_t>(order).subspan(start, count), in_rows);
      const Batch in_batch{in_rows.inputs, in_rows.labels, in_data.dim};
      Batch out_batch{{}, {}, in_data.dim};
      if (use_outliers) {
        out_sampler->next(cfg.batch_out, out_idx);
        gather(*out_data, out_idx, out_rows);
        out_batch.inputs = out_rows.inputs;
      }

      TrainLogRow row;
      row.epoch = epoch;
      row.step = step;
      row.lr = cosine_lr(step, total_steps, cfg.lr0);
      row.nll = nll_loss(model, in_batch, Temperature(cfg.temp));
      row.energy_reg = use_outliers ? energy_reg_loss(model, in_batch, out_batch, cfg.m_in, cfg.m_out) : 0.0;
      row.total = row.nll + cfg.lambda * row.energy_reg;
      if (!std::isfinite(row.total)) {
        fail(ErrorCode::kNumerical, "training diverged at step " + std::to_string(step) + " (loss not finite)");
      }

      TrainConfig step_cfg = cfg;
      if (!use_outliers) step_cfg.lambda = 0.0;
      const Gradients g = backward(model, TotalLoss{in_batch, out_batch, step_cfg});
      if (!all_finite(g)) {
        fail(ErrorCode::kNumerical, "training diverged at step " + std::to_string(step) + " (gradient not finite)");
      }
      auto& layers = model.mutable_layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight -= row.lr * g[l].weight;
        layers[l].bias -= row.lr * g[l].bias;
      }
      if (log) log(row);
    }
  }
  for (const auto& l : model.layers()) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      fail(ErrorCode::kNumerical, "training diverged (parameters not finite)");
    }
  }
  return model;
}

}  // namespace

MlpModel finetune(MlpModel model, const Dataset& in_data, const Dataset& out_data,
                  const TrainConfig& cfg, const TrainLogger& log) {
  return train(std::move(model), in_data, &out_data, cfg, log);
}

MlpModel pretrain(MlpModel model, const Dataset& in_data, const TrainConfig& cfg, const TrainLogger& log) {
  TrainConfig nll_only = cfg;
  nll_only.lambda = 0.0;
  return train(std::move(model), in_data, nullptr, nll_only, log);
}

double accuracy(const MlpModel& model, const Dataset& data) {
  require(data.labeled() && data.rows() >= 1, "accuracy needs labeled, non-empty data");
  const std::vector<double> logits = model.forward_batch(as_batch(data));
  const std::size_t k = model.config().classes();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto row = std::span<const double>(logits).subspan(i * k, k);
    if (argmax(row) == static_cast<std::size_t>(data.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows());
}

EnergyStats energy_stats(const MlpModel& model, const Dataset& data) {
  require(data.rows() >= 1, "energy statistics need at least one row");
  const std::vector<double> e = energy_batch(model.forward_batch(as_batch(data)), model.config().classes(),
                                             Temperature(1.0));
  const double n = static_cast<double>(e.size());
  const double mean = std::accumulate(e.begin(), e.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : e) ss += (v - mean) * (v - mean);
  return EnergyStats{mean, std::sqrt(ss / n)};
}

std::pair<double, double> margins_from_energies(const EnergyStats& in, const EnergyStats& out) {
  double m_in = in.mean - in.stddev;
  double m_out = out.mean + out.stddev;
  if (m_in > m_out) m_in = m_out = 0.5 * (m_in + m_out);
  return {m_in, m_out};
}

// ---------------------------------------------------------------------------
// Serialization

std::string to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["lambda"] = cfg.lambda;
  j["m_in"] = cfg.m_in;
  j["m_out"] = cfg.m_out;
  j["lr0"] = cfg.lr0;
  j["epochs"] = cfg.epochs;
  j["batch_in"] = cfg.batch_in;
  j["batch_out"] = cfg.batch_out;
  j["seed"] = cfg.seed;
  j["temp"] = cfg.temp;
  return j.dump(2);
}

namespace {

TrainConfig train_config_from(const nlohmann::json& j, TrainConfig cfg = {}) {
  try {
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.m_in = j.value("m_in", cfg.m_in);
    cfg.m_out = j.value("m_out", cfg.m_out);
    cfg.lr0 = j.value("lr0", cfg.lr0);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_in = j.value("batch_in", cfg.batch_in);
    cfg.batch_out = j.value("batch_out", cfg.batch_out);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.temp = j.value("temp", cfg.temp);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("train config: ") + e.what());
  }
  return cfg;
}

constexpr char kMagic[8] = {'E', 'O', 'O', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) fail(ErrorCode::kParse, "checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  pos += static_cast<std::size_t>(bytes);
  return v;
}

}  // namespace

TrainConfig train_config_from_json(std::string_view text, const TrainConfig& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("train config JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kParse, "train config JSON must be an object");
  return train_config_from(j, base);
}

void save_checkpoint(const std::string& path, const MlpModel& model, const std::optional<TrainConfig>& cfg) {
  nlohmann::ordered_json header;
  header["layer_sizes"] = model.config().layer_sizes;
  header["layout"] = "per layer: weight row-major (fan_out x fan_in), then bias; float64 little-endian";
  header["train_config"] = cfg ? nlohmann::ordered_json::parse(to_json(*cfg)) : nlohmann::ordered_json();
  const std::string text = header.dump();

  std::string blob(kMagic, sizeof(kMagic));
  put_le(blob, kCheckpointVersion, 4);
  put_le(blob, text.size(), 8);
  blob += text;
  for (double v : model.flat_params()) put_le(blob, std::bit_cast<std::uint64_t>(v), 8);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!f) fail(ErrorCode::kIo, "failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  const std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kMagic) || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::kParse, "'" + path + "' is not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le(blob, pos, 4);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kParse, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le(blob, pos, 8);
  if (pos + header_len > blob.size()) fail(ErrorCode::kParse, "checkpoint header truncated");
  nlohmann::json header;
  MlpConfig config;
  std::optional<TrainConfig> cfg;
  try {
    header = nlohmann::json::parse(blob.substr(pos, header_len));
    config.layer_sizes = header.at("layer_sizes").get<std::vector<std::size_t>>();
    if (!header.at("train_config").is_null()) cfg = train_config_from(header.at("train_config"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("checkpoint header: ") + e.what());
  }
  pos += header_len;
  config.validate();
  MlpModel model = MlpModel::init(config, 0);
  std::vector<double> flat(model.num_params());
  for (double& v : flat) v = std::bit_cast<double>(get_le(blob, pos, 8));
  if (pos != blob.size()) fail(ErrorCode::kParse, "checkpoint has trailing bytes");
  model.set_flat_params(flat);
  return Checkpoint{std::move(model), cfg};
}

}  // namespace energy_ood
