#include "hideprint/learn/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hideprint/kernels.hpp"

namespace hideprint::learn {

namespace k = hideprint::kernels;

void AutoencoderConfig::validate() const {
  if (input_size < 1) throw ValidationError("autoencoder: input_size must be >= 1");
  if (hidden_units < 1) throw ValidationError("autoencoder: hidden_units must be >= 1");
  if (!(sparsity_coefficient >= 0.0)) throw ValidationError("autoencoder: sparsity_coefficient must be >= 0");
  if (!(sparsity_target > 0.0 && sparsity_target < 1.0))
    throw ValidationError("autoencoder: sparsity_target must be in (0, 1)");
  if (!(l2_coefficient >= 0.0)) throw ValidationError("autoencoder: l2_coefficient must be >= 0");
  train.validate();
}

namespace {

struct AeLayout {
  std::size_t w1, b1, w2, b2, total;
  explicit AeLayout(const AutoencoderConfig& c) {
    const std::size_t d = std::size_t(c.input_size), h = std::size_t(c.hidden_units);
    w1 = 0;
    b1 = h * d;
    w2 = b1 + h;
    b2 = w2 + d * h;
    total = b2 + d;
  }
};

struct AePass {
  std::vector<double> input, hidden, output;
};

void ae_forward(const AutoencoderConfig& c, std::span<const double> p, const Dataset& data,
                std::span<const std::size_t> rows, AePass& pass) {
  const int d = c.input_size, h = c.hidden_units, batch = int(rows.size());
  if (data.dim != std::size_t(d)) throw ValidationError("autoencoder: input shape mismatch");
  const AeLayout L(c);
  pass.input.resize(rows.size() * std::size_t(d));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = data.row(rows[r]);
    std::copy(src.begin(), src.end(), pass.input.begin() + std::ptrdiff_t(r * std::size_t(d)));
  }
  pass.hidden.resize(rows.size() * std::size_t(h));
  k::omp::dense_forward(p.subspan(L.w1, std::size_t(h) * d), p.subspan(L.b1, std::size_t(h)), pass.input,
                        pass.hidden, batch, d, h);
  for (double& v : pass.hidden) v = 1.0 / (1.0 + std::exp(-v));
  pass.output.resize(pass.input.size());
  k::omp::dense_forward(p.subspan(L.w2, std::size_t(d) * h), p.subspan(L.b2, std::size_t(d)), pass.hidden,
                        pass.output, batch, h, d);
}

}  // namespace

SparseAutoencoder::SparseAutoencoder(const AutoencoderConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  params_.assign(AeLayout(cfg_).total, 0.0);
}

SparseAutoencoder::SparseAutoencoder(const AutoencoderConfig& cfg, Rng& rng) : SparseAutoencoder(cfg) {
  const AeLayout L(cfg_);
  const double limit = std::sqrt(6.0 / double(cfg_.input_size + cfg_.hidden_units));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (std::size_t i = L.w1; i < L.b1; ++i) params_[i] = u(rng);
  for (std::size_t i = L.w2; i < L.b2; ++i) params_[i] = u(rng);
}

double SparseAutoencoder::loss(const Dataset& data, std::span<const std::size_t> rows,
                               std::span<double> grad) const {
  if (rows.empty()) throw ValidationError("autoencoder: empty batch");
  const AeLayout L(cfg_);
  const std::span<const double> p(params_);
  AePass pass;
  ae_forward(cfg_, p, data, rows, pass);
  const int d = cfg_.input_size, h = cfg_.hidden_units, batch = int(rows.size());
  const double B = double(batch), D = double(d);

  double mse = 0.0;
  std::vector<double> dout(pass.output.size());
  for (std::size_t i = 0; i < dout.size(); ++i) {
    const double e = pass.output[i] - pass.input[i];
    mse += e * e;
    dout[i] = 2.0 * e / (B * D);
  }
  mse /= B * D;

  double l2 = 0.0;
  for (std::size_t i = L.w1; i < L.b1; ++i) l2 += p[i] * p[i];
  for (std::size_t i = L.w2; i < L.b2; ++i) l2 += p[i] * p[i];
  l2 *= 0.5 * cfg_.l2_coefficient;

  const double rho = cfg_.sparsity_target;
  std::vector<double> rho_hat(std::size_t(h), 0.0);
  for (int b = 0; b < batch; ++b)
    for (int j = 0; j < h; ++j) rho_hat[std::size_t(j)] += pass.hidden[std::size_t(b) * h + j] / B;
  double kl = 0.0;
  for (double& r : rho_hat) {
    r = std::clamp(r, 1e-12, 1.0 - 1e-12);
    kl += rho * std::log(rho / r) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - r));
  }
  const double total = mse + l2 + cfg_.sparsity_coefficient * kl;
  if (grad.empty()) return total;

  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> dhidden(pass.hidden.size());
  k::omp::dense_backward(p.subspan(L.w2, std::size_t(d) * h), pass.hidden, dout,
                         grad.subspan(L.w2, std::size_t(d) * h), grad.subspan(L.b2, std::size_t(d)), dhidden,
                         batch, h, d);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < h; ++j) {
      const std::size_t idx = std::size_t(b) * h + j;
      const double r = rho_hat[std::size_t(j)];
      const double dkl = cfg_.sparsity_coefficient * (-rho / r + (1.0 - rho) / (1.0 - r)) / B;
      const double a = pass.hidden[idx];
      dhidden[idx] = (dhidden[idx] + dkl) * a * (1.0 - a);
    }
  }
  k::omp::dense_backward(p.subspan(L.w1, std::size_t(h) * d), pass.input, dhidden,
                         grad.subspan(L.w1, std::size_t(h) * d), grad.subspan(L.b1, std::size_t(h)), {}, batch,
                         d, h);
  for (std::size_t i = L.w1; i < L.b1; ++i) grad[i] += cfg_.l2_coefficient * p[i];
  for (std::size_t i = L.w2; i < L.b2; ++i) grad[i] += cfg_.l2_coefficient * p[i];
  return total;
}

std::vector<double> SparseAutoencoder::reconstruction_mse(const Dataset& data) const {
  std::vector<double> out(data.size());
  constexpr std::size_t kBlock = 64;
  std::vector<std::size_t> rows;
  AePass pass;
  const std::size_t d = std::size_t(cfg_.input_size);
  for (std::size_t start = 0; start < data.size(); start += kBlock) {
    rows.resize(std::min(kBlock, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    ae_forward(cfg_, params_, data, rows, pass);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double e = pass.output[r * d + i] - pass.input[r * d + i];
        s += e * e;
      }
      out[start + r] = s / double(d);
    }
  }
  return out;
}

std::vector<double> SparseAutoencoder::reconstruct(std::span<const double> input) const {
  Dataset d;
  d.add(input, -1);
  const std::size_t row = 0;
  AePass pass;
  ae_forward(cfg_, params_, d, {&row, 1}, pass);
  return pass.output;
}

ThresholdModel ThresholdModel::from_mse(std::span<const double> mse) {
  if (mse.empty()) throw ValidationError("threshold: no MSE values");
  ThresholdModel t;
  const double n = double(mse.size());
  t.train_mse_mean = std::accumulate(mse.begin(), mse.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : mse) ss += (v - t.train_mse_mean) * (v - t.train_mse_mean);
  t.train_mse_std = mse.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  t.tau = t.train_mse_mean + kStdMultiplier * t.train_mse_std;
  return t;
}

OneClassResult one_class_decide(const SparseAutoencoder& ae, const ThresholdModel& threshold,
                                std::span<const double> image) {
  if (image.size() != ae.input_size()) throw ValidationError("one_class_decide: input shape mismatch");
  Dataset d;
  d.add(image, -1);
  OneClassResult r;
  r.mse = ae.reconstruction_mse(d)[0];
  r.decision = r.mse < threshold.tau ? Decision::Legitimate : Decision::Anomaly;
  return r;
}

AutoencoderTrainResult train_autoencoder(SparseAutoencoder& ae, const Dataset& train,
                                         const Dataset& validation, Rng& rng) {
  const TrainConfig& cfg = ae.config().train;
  if (train.size() == 0 || validation.size() == 0)
    throw ValidationError("train_autoencoder: empty train or validation set");
  Optimizer opt(cfg, ae.parameters().size());
  std::vector<double> grad(ae.parameters().size());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  AutoencoderTrainResult result;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t len = std::min(std::size_t(cfg.batch_size), order.size() - start);
      const double l = ae.loss(train, {order.data() + start, len}, grad);
      if (!std::isfinite(l))
        throw RuntimeFailure("autoencoder training diverged at epoch " + std::to_string(epoch) +
                             " (lr " + std::to_string(cfg.learning_rate) + ")");
      epoch_loss += l * double(len);
      opt.step(ae.parameters(), grad);
    }
    result.train_loss.push_back(epoch_loss / double(order.size()));
    result.epochs = epoch + 1;
  }
  result.validation_mse = ae.reconstruction_mse(validation);
  result.threshold = ThresholdModel::from_mse(result.validation_mse);
  return result;
}

nlohmann::json to_json(const AutoencoderConfig& c) {
  return {{"input_size", c.input_size},
          {"hidden_units", c.hidden_units},
          {"sparsity_coefficient", c.sparsity_coefficient},
          {"sparsity_target", c.sparsity_target},
          {"l2_coefficient", c.l2_coefficient},
          {"train", to_json(c.train)}};
}

AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("autoencoder config must be an object");
  AutoencoderConfig c;
  c.input_size = j.value("input_size", c.input_size);
  c.hidden_units = j.value("hidden_units", c.hidden_units);
  c.sparsity_coefficient = j.value("sparsity_coefficient", c.sparsity_coefficient);
  c.sparsity_target = j.value("sparsity_target", c.sparsity_target);
  c.l2_coefficient = j.value("l2_coefficient", c.l2_coefficient);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  c.validate();
  return c;
}

}  // namespace hideprint::learn
