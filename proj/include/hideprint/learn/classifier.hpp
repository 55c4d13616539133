#pragma once

// Compact multiclass classifiers. The image model is an optional conv stage
// (filters x kernel^2, ReLU, max-pool) followed by ReLU dense layers and a
// softmax output. The raw-IQ model runs a 1-D convolution over interleaved
// I/Q, global max pooling and a softmax layer.

#include <vector>

#include "hideprint/learn/model.hpp"
#include "json.hpp"

namespace hideprint::learn {

struct ClassifierConfig {
  int input_side = 64;
  int num_classes = 10;
  int conv_filters = 8;  // 0 disables the conv stage
  int conv_kernel = 5;
  int pool = 2;
  std::vector<int> hidden_widths{128};
  TrainConfig train;

  void validate() const;
};

class ImageClassifier : public Classifier {
 public:
  ImageClassifier(const ClassifierConfig& cfg, Rng& rng);
  /// Zero-initialised network of the right shape, for loading checkpoints.
  explicit ImageClassifier(const ClassifierConfig& cfg);

  std::string kind() const override { return "image-classifier"; }
  std::size_t input_size() const override;
  int num_classes() const override { return cfg_.num_classes; }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  double loss(const Dataset& data, std::span<const std::size_t> rows,
              std::span<double> grad) const override;
  std::vector<double> predict_proba(const Dataset& data,
                                    std::span<const std::size_t> rows) const override;

  /// Activations of the last hidden layer, rows x width (feature export for PCA).
  std::vector<double> embed(const Dataset& data, std::span<const std::size_t> rows) const;

  const ClassifierConfig& config() const { return cfg_; }

 private:
  struct Layout;
  struct Pass;
  void forward(const Dataset& data, std::span<const std::size_t> rows, Pass& pass) const;

  ClassifierConfig cfg_;
  std::vector<double> params_;
};

struct RawIqConfig {
  int chunk_symbols = 10'000;
  int num_classes = 10;
  int filters = 8;
  int kernel = 3;
  TrainConfig train{OptimizerKind::Adam, 0.01, 0.9, 0.9, 0.999, 1e-8, 32, 300, 20, 5, 0.5};

  void validate() const;
};

/// Input rows hold I0, Q0, I1, Q1, ... for chunk_symbols symbols.
class RawIqClassifier : public Classifier {
 public:
  RawIqClassifier(const RawIqConfig& cfg, Rng& rng);
  explicit RawIqClassifier(const RawIqConfig& cfg);

  std::string kind() const override { return "rawiq-classifier"; }
  std::size_t input_size() const override { return 2 * std::size_t(cfg_.chunk_symbols); }
  int num_classes() const override { return cfg_.num_classes; }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  double loss(const Dataset& data, std::span<const std::size_t> rows,
              std::span<double> grad) const override;
  std::vector<double> predict_proba(const Dataset& data,
                                    std::span<const std::size_t> rows) const override;

  const RawIqConfig& config() const { return cfg_; }

 private:
  RawIqConfig cfg_;
  std::vector<double> params_;
};

/// Interleaves a chunk of complex symbols into a raw-IQ input row.
std::vector<double> interleave_iq(std::span<const Complex> chunk);

nlohmann::json to_json(const ClassifierConfig& cfg);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RawIqConfig& cfg);
RawIqConfig rawiq_config_from_json(const nlohmann::json& j);

}  // namespace hideprint::learn
