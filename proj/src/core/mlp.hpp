// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "core/dataset.hpp"
#include "core/scores.hpp"

namespace energy_ood {

// [d_in, h_1, ..., K]; hidden layers use ReLU, the output layer is affine.
struct MlpConfig {
  std::vector<std::size_t> layer_sizes;

  void validate() const;
  std::size_t inputs() const { return layer_sizes.front(); }
  std::size_t classes() const { return layer_sizes.back(); }
};

struct Layer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;
};

// Same shape as the model parameters.
using Gradients = std::vector<Layer>;

class MlpModel {
 public:
  MlpModel(MlpConfig config, std::vector<Layer> layers);

  // Glorot-uniform weights, zero biases, deterministic in (config, seed).
  static MlpModel init(const MlpConfig& config, std::uint64_t seed);

  const MlpConfig& config() const { return config_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;
  // Logits for every row, row-major rows x K.
  std::vector<double> forward_batch(const Batch& batch) const;

  std::size_t num_params() const;
  // Per layer: weight row-major, then bias.
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);

 private:
  MlpConfig config_;
  std::vector<Layer> layers_;
};

struct TrainConfig {
  double lambda = 0.1;
  double m_in = -23.0;
  double m_out = -5.0;
  double lr0 = 0.001;
  std::size_t epochs = 10;
  std::size_t batch_in = 128;
  std::size_t batch_out = 256;
  std::uint64_t seed = 0;
  double temp = 1.0;

  void validate() const;
};

double nll_loss(const MlpModel& model, const Batch& batch, Temperature temp);
double energy_reg_loss(const MlpModel& model, const Batch& in_batch, const Batch& out_batch,
                       double m_in, double m_out);
double total_loss(const MlpModel& model, const Batch& in_batch, const Batch& out_batch,
                  const TrainConfig& cfg);
double oe_loss(const MlpModel& model, const Batch& out_batch, Temperature temp);

struct NllLoss {
  Batch batch;
  Temperature temp;
};
struct EnergyRegLoss {
  Batch in_batch;
  Batch out_batch;
  double m_in = 0.0;
  double m_out = 0.0;
};
struct TotalLoss {
  Batch in_batch;
  Batch out_batch;
  TrainConfig cfg;
};
struct OeLoss {
  Batch out_batch;
  Temperature temp;
};
// E(x, y) = -f_y(x) for a single input.
struct LabelEnergyLoss {
  std::span<const double> x;
  std::size_t label = 0;
};
using LossSpec = std::variant<NllLoss, EnergyRegLoss, TotalLoss, OeLoss, LabelEnergyLoss>;

double evaluate(const MlpModel& model, const LossSpec& loss);
Gradients backward(const MlpModel& model, const LossSpec& loss);

Gradients zeros_like(const MlpModel& model);
std::vector<double> flatten(const Gradients& grads);

// lr0 * (1 + cos(pi * step / total_steps)) / 2, no restarts.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

struct TrainLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double nll = 0.0;
  double energy_reg = 0.0;
  double total = 0.0;
};
using TrainLogger = std::function<void(const TrainLogRow&)>;

// Plain SGD on nll + lambda * energy_reg with cosine decay. Each step draws
// batch_in labeled rows (per-epoch shuffle) and batch_out outlier rows
// (cycling shuffle). Throws kNumerical if the loss stops being finite.
MlpModel finetune(MlpModel model, const Dataset& in_data, const Dataset& out_data,
                  const TrainConfig& cfg, const TrainLogger& log = {});

// NLL-only training on in-distribution data.
MlpModel pretrain(MlpModel model, const Dataset& in_data, const TrainConfig& cfg,
                  const TrainLogger& log = {});

double accuracy(const MlpModel& model, const Dataset& data);

// Mean and population standard deviation of E(x) at T = 1 over all rows.
struct EnergyStats {
  double mean = 0.0;
  double stddev = 0.0;
};
EnergyStats energy_stats(const MlpModel& model, const Dataset& data);

// m_in = mean in-energy - 1 std, m_out = mean out-energy + 1 std. When that
// gives m_in > m_out both collapse to their midpoint.
std::pair<double, double> margins_from_energies(const EnergyStats& in, const EnergyStats& out);

// Checkpoint container: "EOODCKPT", u32 version, u64 header length, JSON
// header {layer_sizes, train_config}, then little-endian float64 parameters.
struct Checkpoint {
  MlpModel model;
  std::optional<TrainConfig> train_config;
};
void save_checkpoint(const std::string& path, const MlpModel& model,
                     const std::optional<TrainConfig>& cfg);
Checkpoint load_checkpoint(const std::string& path);

std::string to_json(const TrainConfig& cfg);
// Keys absent from the JSON keep their values from `base`.
TrainConfig train_config_from_json(std::string_view text, const TrainConfig& base = {});

}  // namespace energy_ood
