#pragma once

// Sparse autoencoder (sigmoid encoder, linear decoder) for one-class detection,
// and the reconstruction-error threshold tau = mean + 3.5 * std.

#include <vector>

#include "hideprint/learn/model.hpp"
#include "json.hpp"

namespace hideprint::learn {

struct AutoencoderConfig {
  int input_size = 64 * 64;
  int hidden_units = 64;
  double sparsity_coefficient = 0.5;  // weight of the KL sparsity term
  double sparsity_target = 0.05;      // desired mean hidden activation
  double l2_coefficient = 0.01;       // 0.5 * l2 * sum(w^2), weights only
  TrainConfig train{OptimizerKind::Adam, 1e-3, 0.9, 0.9, 0.999, 1e-8, 16, 150, 150, 5, 0.5};

  void validate() const;
};

class SparseAutoencoder : public Model {
 public:
  SparseAutoencoder(const AutoencoderConfig& cfg, Rng& rng);
  explicit SparseAutoencoder(const AutoencoderConfig& cfg);

  std::string kind() const override { return "sparse-autoencoder"; }
  std::size_t input_size() const override { return std::size_t(cfg_.input_size); }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  /// Mean reconstruction MSE + L2 + sparsity penalty over the batch.
  double loss(const Dataset& data, std::span<const std::size_t> rows,
              std::span<double> grad) const override;

  /// Per-row reconstruction MSE (mean over input elements), no regularisers.
  std::vector<double> reconstruction_mse(const Dataset& data) const;
  std::vector<double> reconstruct(std::span<const double> input) const;

  const AutoencoderConfig& config() const { return cfg_; }

 private:
  AutoencoderConfig cfg_;
  std::vector<double> params_;
};

struct ThresholdModel {
  double tau = 0.0;
  double train_mse_mean = 0.0;
  double train_mse_std = 0.0;  // sample standard deviation (n - 1)

  static constexpr double kStdMultiplier = 3.5;
  /// tau = mean + 3.5 * sample std. A single value gives std 0.
  static ThresholdModel from_mse(std::span<const double> mse);
};

enum class Decision { Legitimate, Anomaly };

struct OneClassResult {
  Decision decision = Decision::Anomaly;
  double mse = 0.0;
};

/// Legitimate iff mse < tau.
OneClassResult one_class_decide(const SparseAutoencoder& ae, const ThresholdModel& threshold,
                                std::span<const double> image);

struct AutoencoderTrainResult {
  ThresholdModel threshold;
  std::vector<double> validation_mse;
  std::vector<double> train_loss;
  int epochs = 0;
};

/// Trains on `train` (single device) for max_epochs and fits the threshold on
/// the reconstruction MSE of `validation`.
AutoencoderTrainResult train_autoencoder(SparseAutoencoder& ae, const Dataset& train,
                                         const Dataset& validation, Rng& rng);

nlohmann::json to_json(const AutoencoderConfig& cfg);
AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j);

}  // namespace hideprint::learn
