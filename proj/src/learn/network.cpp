#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hideprint/learn/model.hpp"

namespace hideprint::learn {

void Dataset::add(std::span<const double> features, int label) {
  if (dim == 0 && y.empty()) dim = features.size();
  if (features.size() != dim) throw ValidationError("Dataset::add: feature size mismatch");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(label);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.dim = dim;
  out.x.reserve(rows.size() * dim);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto f = row(r);
    out.x.insert(out.x.end(), f.begin(), f.end());
    out.y.push_back(y[r]);
  }
  return out;
}

int Dataset::num_labels() const {
  int m = -1;
  for (int v : y) m = std::max(m, v);
  return m + 1;
}

std::vector<std::vector<std::size_t>> stratified_split(const Dataset& data,
                                                       std::span<const double> fractions, Rng& rng) {
  if (fractions.empty()) throw ValidationError("stratified_split: no fractions");
  std::vector<std::vector<std::size_t>> parts(fractions.size());
  const int labels = data.num_labels();
  for (int c = -1; c < labels; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.y[i] == c) rows.push_back(i);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t start = 0;
    double cum = 0.0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
      cum += fractions[p];
      const std::size_t end = p + 1 == fractions.size()
                                  ? rows.size()
                                  : std::min(rows.size(), std::size_t(std::llround(cum * double(rows.size()))));
      parts[p].insert(parts[p].end(), rows.begin() + std::ptrdiff_t(start), rows.begin() + std::ptrdiff_t(end));
      start = std::max(start, end);
    }
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

std::vector<double> Classifier::predict(std::span<const double> input) const {
  if (input.size() != input_size()) throw ValidationError("predict: input shape mismatch");
  Dataset d;
  d.add(input, -1);
  const std::size_t row = 0;
  return predict_proba(d, {&row, 1});
}

std::vector<int> Classifier::classify(const Dataset& data) const {
  std::vector<int> out(data.size());
  constexpr std::size_t kBlock = 64;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += kBlock) {
    rows.resize(std::min(kBlock, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto p = predict_proba(data, rows);
    const auto c = std::size_t(num_classes());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto first = p.begin() + std::ptrdiff_t(r * c);
      out[start + r] = int(std::max_element(first, first + std::ptrdiff_t(c)) - first);
    }
  }
  return out;
}

double Classifier::accuracy(const Dataset& data) const {
  if (data.size() == 0) throw ValidationError("accuracy: empty dataset");
  const auto pred = classify(data);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.y[i];
  return double(hit) / double(pred.size());
}

LinearModel::LinearModel(std::size_t inputs, std::size_t outputs, Rng& rng)
    : inputs_(inputs), outputs_(outputs), params_(outputs * (inputs + 1)) {
  std::normal_distribution<double> d(0.0, 0.1);
  for (double& p : params_) p = d(rng);
}

double LinearModel::loss(const Dataset& data, std::span<const std::size_t> rows,
                         std::span<double> grad) const {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t bias = outputs_ * inputs_;
  double total = 0.0;
  const double inv = 1.0 / double(rows.size());
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    for (std::size_t o = 0; o < outputs_; ++o) {
      double y = params_[bias + o];
      for (std::size_t i = 0; i < inputs_; ++i) y += params_[o * inputs_ + i] * x[i];
      const double e = y - (int(o) == data.y[r] ? 1.0 : 0.0);
      total += 0.5 * e * e;
      if (grad.empty()) continue;
      for (std::size_t i = 0; i < inputs_; ++i) grad[o * inputs_ + i] += e * x[i] * inv;
      grad[bias + o] += e * inv;
    }
  }
  return total * inv;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("train: momentum must be in [0, 1)");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ValidationError("train: max_epochs must be >= 1");
  if (min_epochs < 0 || min_epochs > max_epochs)
    throw ValidationError("train: min_epochs must be in [0, max_epochs]");
  if (early_stop_window < 2) throw ValidationError("train: early_stop_window must be >= 2");
  if (!(early_stop_variance >= 0.0)) throw ValidationError("train: early_stop_variance must be >= 0");
}

Optimizer::Optimizer(const TrainConfig& cfg, std::size_t parameters)
    : cfg_(cfg), m_(parameters, 0.0), v_(cfg.optimizer == OptimizerKind::Adam ? parameters : 0, 0.0) {}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  const std::size_t n = params.size();
  if (cfg_.optimizer == OptimizerKind::Sgd) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      m_[i] = cfg_.momentum * m_[i] - cfg_.learning_rate * grad[i];
      params[i] += m_[i];
    }
    return;
  }
  ++t_;
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, double(t_)), c2 = 1.0 - std::pow(b2, double(t_));
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.adam_epsilon);
  }
}

bool early_stop_reached(std::span<const double> accuracies, int window, double threshold) {
  if (window < 2 || accuracies.size() < std::size_t(window)) return false;
  const auto tail = accuracies.subspan(accuracies.size() - std::size_t(window));
  double mean = 0.0;
  for (double a : tail) mean += 100.0 * a;
  mean /= double(window);
  double var = 0.0;
  for (double a : tail) var += (100.0 * a - mean) * (100.0 * a - mean);
  var /= double(window - 1);
  return var < threshold;
}

TrainResult train_classifier(Classifier& model, const Dataset& train, const Dataset& validation,
                             const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (train.size() == 0 || validation.size() == 0)
    throw ValidationError("train_classifier: empty train or validation set");
  if (train.dim != model.input_size() || validation.dim != model.input_size())
    throw ValidationError("train_classifier: input shape mismatch");
  {
    std::vector<int> labels(train.y);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    if (labels.size() < 2) throw ValidationError("train_classifier: need at least two classes");
    if (labels.front() < 0 || labels.back() >= model.num_classes())
      throw ValidationError("train_classifier: label out of range");
  }

  Optimizer opt(cfg, model.parameters().size());
  std::vector<double> grad(model.parameters().size());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t len = std::min(std::size_t(cfg.batch_size), order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      const double l = model.loss(train, batch, grad);
      if (!std::isfinite(l)) {
        std::ostringstream msg;
        msg << model.kind() << " training diverged at epoch " << epoch << " (lr "
            << cfg.learning_rate << ", batch " << cfg.batch_size << ", optimizer "
            << to_string(cfg.optimizer) << ")";
        throw RuntimeFailure(msg.str());
      }
      epoch_loss += l * double(len);
      opt.step(model.parameters(), grad);
    }
    result.train_loss.push_back(epoch_loss / double(order.size()));
    result.validation_accuracy.push_back(model.accuracy(validation));
    result.epochs = epoch + 1;
    if (result.epochs >= cfg.min_epochs &&
        early_stop_reached(result.validation_accuracy, cfg.early_stop_window, cfg.early_stop_variance)) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

GradientCheckResult gradient_check(Model& model, const Dataset& batch, std::size_t max_params,
                                   std::uint64_t seed, double step, double floor) {
  if (batch.size() == 0) throw ValidationError("gradient_check: empty batch");
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  auto params = model.parameters();
  std::vector<double> analytic(params.size());
  model.loss(batch, rows, analytic);

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > max_params) {
    Rng rng = make_rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_params);
    std::sort(coords.begin(), coords.end());
  }

  GradientCheckResult r;
  for (std::size_t c : coords) {
    const double saved = params[c];
    params[c] = saved + step;
    const double up = model.loss(batch, rows, {});
    params[c] = saved - step;
    const double down = model.loss(batch, rows, {});
    params[c] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double rel = std::abs(analytic[c] - numeric) /
                       std::max(std::abs(analytic[c]) + std::abs(numeric), floor);
    r.max_relative_error = std::max(r.max_relative_error, rel);
    ++r.checked;
  }
  return r;
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ValidationError("unknown optimizer '" + name + "'");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"optimizer", to_string(c.optimizer)},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"min_epochs", c.min_epochs},
          {"early_stop_window", c.early_stop_window},
          {"early_stop_variance", c.early_stop_variance}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ValidationError("train config must be an object");
  if (j.contains("optimizer")) c.optimizer = optimizer_kind_from_string(j.at("optimizer").get<std::string>());
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.momentum = j.value("momentum", c.momentum);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.min_epochs = j.value("min_epochs", c.min_epochs);
  c.early_stop_window = j.value("early_stop_window", c.early_stop_window);
  c.early_stop_variance = j.value("early_stop_variance", c.early_stop_variance);
  c.validate();
  return c;
}

}  // namespace hideprint::learn
