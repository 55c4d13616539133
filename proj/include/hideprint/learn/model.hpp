#pragma once

// Shared plumbing for the from-scratch models: a flat labelled dataset, the
// Model interface (flat parameter vector + loss/gradient), optimisers, the
// early-stopping training loop and the finite-difference gradient check.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hideprint/common.hpp"
#include "json.hpp"

namespace hideprint::learn {

/// Row-major feature matrix with integer labels (label -1 when unlabelled).
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
  void add(std::span<const double> features, int label);
  Dataset subset(std::span<const std::size_t> rows) const;
  int num_labels() const;  // 1 + max label
};

/// Stratified split of the row indices into consecutive fractions (e.g. 0.6,
/// 0.2, 0.2). Rows are shuffled within each label; the last part takes the rest.
std::vector<std::vector<std::size_t>> stratified_split(const Dataset& data,
                                                       std::span<const double> fractions, Rng& rng);

class Model {
 public:
  virtual ~Model() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;
  /// Mean loss over `rows` of `data`. When `grad` is non-empty it is
  /// overwritten with dLoss/dparameters.
  virtual double loss(const Dataset& data, std::span<const std::size_t> rows,
                      std::span<double> grad) const = 0;
};

class Classifier : public Model {
 public:
  virtual int num_classes() const = 0;
  /// Class probabilities, rows.size() x num_classes, row-major.
  virtual std::vector<double> predict_proba(const Dataset& data,
                                            std::span<const std::size_t> rows) const = 0;

  std::vector<double> predict(std::span<const double> input) const;
  std::vector<int> classify(const Dataset& data) const;
  double accuracy(const Dataset& data) const;
};

/// y = W x + b with squared loss 0.5 * |y - t|^2 against a one-hot target of
/// the label. Exactly quadratic, used to validate the gradient checker.
class LinearModel : public Model {
 public:
  LinearModel(std::size_t inputs, std::size_t outputs, Rng& rng);
  std::string kind() const override { return "linear"; }
  std::size_t input_size() const override { return inputs_; }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }
  double loss(const Dataset& data, std::span<const std::size_t> rows,
              std::span<double> grad) const override;

 private:
  std::size_t inputs_, outputs_;
  std::vector<double> params_;
};

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_epsilon = 1e-8;
  int batch_size = 16;
  int max_epochs = 60;
  int min_epochs = 10;
  int early_stop_window = 5;          // validation evaluations
  double early_stop_variance = 0.5;   // sample variance of accuracy in percentage points^2

  void validate() const;
};

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::size_t parameters);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  TrainConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// True when the last `window` accuracies (fractions) have a sample variance,
/// in percentage points squared, below `threshold`.
bool early_stop_reached(std::span<const double> accuracies, int window, double threshold);

struct TrainResult {
  int epochs = 0;
  bool early_stopped = false;
  std::vector<double> train_loss;
  std::vector<double> validation_accuracy;
};

/// Minibatch training with per-epoch validation and the variance early stop.
/// Throws ValidationError when fewer than two classes are present and
/// RuntimeFailure when the loss stops being finite.
TrainResult train_classifier(Classifier& model, const Dataset& train, const Dataset& validation,
                             const TrainConfig& cfg, Rng& rng);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences against the analytic gradient on up to `max_params`
/// coordinates (all when the model is smaller; otherwise a seeded sample).
/// Relative error per coordinate: |a - n| / max(|a| + |n|, floor).
GradientCheckResult gradient_check(Model& model, const Dataset& batch, std::size_t max_params,
                                   std::uint64_t seed, double step = 1e-4, double floor = 1e-8);

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

}  // namespace hideprint::learn
