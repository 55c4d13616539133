#include "hideprint/learn/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hideprint/kernels.hpp"

namespace hideprint::learn {

namespace k = hideprint::kernels;

namespace {

void gather(const Dataset& data, std::span<const std::size_t> rows, std::vector<double>& out) {
  out.resize(rows.size() * data.dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = data.row(rows[r]);
    std::copy(src.begin(), src.end(), out.begin() + std::ptrdiff_t(r * data.dim));
  }
}

// In-place softmax over each row; returns the mean cross-entropy against
// `labels` (ignored when empty) and turns rows into (p - onehot) / batch.
double softmax_rows(std::vector<double>& z, std::size_t classes, std::span<const int> labels,
                    bool to_gradient) {
  const std::size_t batch = z.size() / classes;
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = z.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(row[c] - mx);
    const double log_sum = mx + std::log(sum);
    if (!labels.empty()) loss += log_sum - row[labels[b]];
    for (std::size_t c = 0; c < classes; ++c) row[c] = std::exp(row[c] - log_sum);
    if (to_gradient) {
      row[labels[b]] -= 1.0;
      for (std::size_t c = 0; c < classes; ++c) row[c] /= double(batch);
    }
  }
  return labels.empty() ? 0.0 : loss / double(batch);
}

void fill_normal(std::span<double> v, double stddev, Rng& rng) {
  std::normal_distribution<double> d(0.0, stddev);
  for (double& x : v) x = d(rng);
}

}  // namespace

void ClassifierConfig::validate() const {
  if (input_side < 4) throw ValidationError("classifier: input_side must be >= 4");
  if (num_classes < 2) throw ValidationError("classifier: num_classes must be >= 2");
  if (conv_filters < 0) throw ValidationError("classifier: conv_filters must be >= 0");
  if (conv_filters > 0) {
    if (conv_kernel < 1 || conv_kernel > input_side)
      throw ValidationError("classifier: conv_kernel must fit the input");
    if (pool < 1 || (input_side - conv_kernel + 1) / pool < 1)
      throw ValidationError("classifier: pool must fit the conv output");
  }
  for (int w : hidden_widths)
    if (w < 1) throw ValidationError("classifier: hidden widths must be >= 1");
  train.validate();
}

// Offsets of every parameter block inside the flat vector.
struct ImageClassifier::Layout {
  k::ConvShape conv;
  int pooled_side = 0;
  std::size_t conv_w = 0, conv_b = 0;
  std::vector<int> widths;  // dense layer inputs/outputs: widths[0] -> ... -> classes
  std::vector<std::size_t> dense_w, dense_b;
  std::size_t total = 0;

  explicit Layout(const ClassifierConfig& cfg, int batch = 1) {
    int features = cfg.input_side * cfg.input_side;
    if (cfg.conv_filters > 0) {
      conv = {batch, 1, cfg.input_side, cfg.input_side, cfg.conv_filters, cfg.conv_kernel, cfg.conv_kernel};
      pooled_side = conv.out_h() / cfg.pool;
      conv_w = 0;
      conv_b = conv.weight_size();
      total = conv_b + std::size_t(cfg.conv_filters);
      features = cfg.conv_filters * pooled_side * pooled_side;
    }
    widths.push_back(features);
    for (int w : cfg.hidden_widths) widths.push_back(w);
    widths.push_back(cfg.num_classes);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      dense_w.push_back(total);
      total += std::size_t(widths[l]) * widths[l + 1];
      dense_b.push_back(total);
      total += std::size_t(widths[l + 1]);
    }
  }
};

struct ImageClassifier::Pass {
  std::vector<double> input;
  std::vector<double> conv_out;              // pre-activation
  std::vector<std::size_t> pool_arg;         // index into conv_out per pooled unit
  std::vector<std::vector<double>> act;      // act[0] = dense input; act[l+1] = layer l output
};

ImageClassifier::ImageClassifier(const ClassifierConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  params_.assign(Layout(cfg_).total, 0.0);
}

ImageClassifier::ImageClassifier(const ClassifierConfig& cfg, Rng& rng) : ImageClassifier(cfg) {
  const Layout L(cfg_);
  std::span<double> p(params_);
  if (cfg_.conv_filters > 0) {
    const double fan_in = double(cfg_.conv_kernel * cfg_.conv_kernel);
    fill_normal(p.subspan(L.conv_w, L.conv.weight_size()), std::sqrt(2.0 / fan_in), rng);
    std::fill_n(p.begin() + std::ptrdiff_t(L.conv_b), cfg_.conv_filters, 0.01);
  }
  const std::size_t layers = L.dense_w.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n = std::size_t(L.widths[l]) * L.widths[l + 1];
    const bool last = l + 1 == layers;
    // Small output layer: an untrained model predicts a near-uniform vector.
    const double stddev = last ? 0.1 / std::sqrt(double(L.widths[l])) : std::sqrt(2.0 / L.widths[l]);
    fill_normal(p.subspan(L.dense_w[l], n), stddev, rng);
    std::fill_n(p.begin() + std::ptrdiff_t(L.dense_b[l]), L.widths[l + 1], last ? 0.0 : 0.01);
  }
}

std::size_t ImageClassifier::input_size() const {
  return std::size_t(cfg_.input_side) * cfg_.input_side;
}

void ImageClassifier::forward(const Dataset& data, std::span<const std::size_t> rows,
                              Pass& pass) const {
  if (data.dim != input_size()) throw ValidationError("image classifier: input shape mismatch");
  const int batch = int(rows.size());
  const Layout L(cfg_, batch);
  const std::span<const double> p(params_);
  gather(data, rows, pass.input);
  pass.act.assign(L.widths.size(), {});

  if (cfg_.conv_filters > 0) {
    pass.conv_out.resize(std::size_t(batch) * L.conv.out_size());
    k::omp::conv2d_forward(L.conv, p.subspan(L.conv_w, L.conv.weight_size()),
                           p.subspan(L.conv_b, std::size_t(cfg_.conv_filters)), pass.input, pass.conv_out);
    const int ps = L.pooled_side, oh = L.conv.out_h(), ow = L.conv.out_w(), pool = cfg_.pool;
    const std::size_t per = std::size_t(cfg_.conv_filters) * ps * ps;
    auto& pooled = pass.act[0];
    pooled.resize(std::size_t(batch) * per);
    pass.pool_arg.resize(pooled.size());
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < batch; ++b) {
      for (int f = 0; f < cfg_.conv_filters; ++f) {
        const std::size_t plane = std::size_t(b) * L.conv.out_size() + std::size_t(f) * oh * ow;
        for (int py = 0; py < ps; ++py) {
          for (int px = 0; px < ps; ++px) {
            std::size_t best = plane + std::size_t(py * pool) * ow + std::size_t(px * pool);
            for (int dy = 0; dy < pool; ++dy)
              for (int dx = 0; dx < pool; ++dx) {
                const std::size_t idx = plane + std::size_t(py * pool + dy) * ow + std::size_t(px * pool + dx);
                if (pass.conv_out[idx] > pass.conv_out[best]) best = idx;
              }
            const std::size_t out = std::size_t(b) * per + (std::size_t(f) * ps + py) * ps + px;
            pass.pool_arg[out] = best;
            pooled[out] = std::max(0.0, pass.conv_out[best]);
          }
        }
      }
    }
  } else {
    pass.act[0] = pass.input;
  }

  const std::size_t layers = L.dense_w.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = L.widths[l], out = L.widths[l + 1];
    auto& y = pass.act[l + 1];
    y.resize(std::size_t(batch) * out);
    k::omp::dense_forward(p.subspan(L.dense_w[l], std::size_t(in) * out), p.subspan(L.dense_b[l], std::size_t(out)),
                          pass.act[l], y, batch, in, out);
    if (l + 1 < layers)
      for (double& v : y) v = std::max(0.0, v);
  }
}

double ImageClassifier::loss(const Dataset& data, std::span<const std::size_t> rows,
                             std::span<double> grad) const {
  if (rows.empty()) throw ValidationError("image classifier: empty batch");
  Pass pass;
  forward(data, rows, pass);
  std::vector<int> labels(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    labels[r] = data.y[rows[r]];
    if (labels[r] < 0 || labels[r] >= cfg_.num_classes)
      throw ValidationError("image classifier: label out of range");
  }
  std::vector<double> delta = pass.act.back();
  const double loss = softmax_rows(delta, std::size_t(cfg_.num_classes), labels, !grad.empty());
  if (grad.empty()) return loss;

  std::fill(grad.begin(), grad.end(), 0.0);
  const int batch = int(rows.size());
  const Layout L(cfg_, batch);
  const std::span<const double> p(params_);
  for (std::size_t l = L.dense_w.size(); l-- > 0;) {
    const int in = L.widths[l], out = L.widths[l + 1];
    const bool need_dx = l > 0 || cfg_.conv_filters > 0;
    std::vector<double> dx(need_dx ? std::size_t(batch) * in : 0);
    k::omp::dense_backward(p.subspan(L.dense_w[l], std::size_t(in) * out), pass.act[l], delta,
                           grad.subspan(L.dense_w[l], std::size_t(in) * out),
                           grad.subspan(L.dense_b[l], std::size_t(out)), dx, batch, in, out);
    if (!need_dx) break;
    // ReLU derivative (pooled units carry the ReLU of the conv stage too).
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (pass.act[l][i] <= 0.0) dx[i] = 0.0;
    delta = std::move(dx);
  }
  if (cfg_.conv_filters > 0) {
    std::vector<double> dconv(pass.conv_out.size(), 0.0);
    for (std::size_t i = 0; i < delta.size(); ++i) dconv[pass.pool_arg[i]] += delta[i];
    k::omp::conv2d_backward(L.conv, pass.input, dconv, grad.subspan(L.conv_w, L.conv.weight_size()),
                            grad.subspan(L.conv_b, std::size_t(cfg_.conv_filters)));
  }
  return loss;
}

std::vector<double> ImageClassifier::predict_proba(const Dataset& data,
                                                   std::span<const std::size_t> rows) const {
  Pass pass;
  forward(data, rows, pass);
  std::vector<double> z = pass.act.back();
  softmax_rows(z, std::size_t(cfg_.num_classes), {}, false);
  return z;
}

std::vector<double> ImageClassifier::embed(const Dataset& data,
                                           std::span<const std::size_t> rows) const {
  Pass pass;
  forward(data, rows, pass);
  return pass.act[pass.act.size() - 2];
}

void RawIqConfig::validate() const {
  if (chunk_symbols < 2) throw ValidationError("rawiq: chunk_symbols must be >= 2");
  if (num_classes < 2) throw ValidationError("rawiq: num_classes must be >= 2");
  if (filters < 1) throw ValidationError("rawiq: filters must be >= 1");
  if (kernel < 1 || kernel > chunk_symbols) throw ValidationError("rawiq: kernel must fit the chunk");
  train.validate();
}

namespace {

struct RawLayout {
  k::ConvShape conv;
  std::size_t conv_w, conv_b, dense_w, dense_b, total;

  RawLayout(const RawIqConfig& cfg, int batch) {
    conv = {batch, 2, 1, cfg.chunk_symbols, cfg.filters, 1, cfg.kernel};
    conv_w = 0;
    conv_b = conv.weight_size();
    dense_w = conv_b + std::size_t(cfg.filters);
    dense_b = dense_w + std::size_t(cfg.filters) * cfg.num_classes;
    total = dense_b + std::size_t(cfg.num_classes);
  }
};

struct RawPass {
  std::vector<double> planar;  // [b][channel][symbol]
  std::vector<double> conv_out;
  std::vector<std::size_t> arg;  // argmax position per (b, f)
  std::vector<double> pooled;
  std::vector<double> logits;
};

void raw_forward(const RawIqConfig& cfg, std::span<const double> p, const Dataset& data,
                 std::span<const std::size_t> rows, RawPass& pass) {
  const int batch = int(rows.size());
  const RawLayout L(cfg, batch);
  const std::size_t n = std::size_t(cfg.chunk_symbols);
  if (data.dim != 2 * n) throw ValidationError("rawiq classifier: input shape mismatch");
  pass.planar.resize(std::size_t(batch) * 2 * n);
  for (int b = 0; b < batch; ++b) {
    const auto src = data.row(rows[std::size_t(b)]);
    double* dst = pass.planar.data() + std::size_t(b) * 2 * n;
    for (std::size_t s = 0; s < n; ++s) {
      dst[s] = src[2 * s];
      dst[n + s] = src[2 * s + 1];
    }
  }
  pass.conv_out.resize(std::size_t(batch) * L.conv.out_size());
  k::omp::conv2d_forward(L.conv, p.subspan(L.conv_w, L.conv.weight_size()),
                         p.subspan(L.conv_b, std::size_t(cfg.filters)), pass.planar, pass.conv_out);
  const std::size_t ow = std::size_t(L.conv.out_w());
  pass.arg.resize(std::size_t(batch) * cfg.filters);
  pass.pooled.resize(pass.arg.size());
  for (std::size_t bf = 0; bf < pass.arg.size(); ++bf) {
    const double* plane = pass.conv_out.data() + bf * ow;
    const std::size_t a = std::size_t(std::max_element(plane, plane + ow) - plane);
    pass.arg[bf] = bf * ow + a;
    pass.pooled[bf] = std::max(0.0, plane[a]);
  }
  pass.logits.resize(std::size_t(batch) * cfg.num_classes);
  k::omp::dense_forward(p.subspan(L.dense_w, std::size_t(cfg.filters) * cfg.num_classes),
                        p.subspan(L.dense_b, std::size_t(cfg.num_classes)), pass.pooled, pass.logits,
                        batch, cfg.filters, cfg.num_classes);
}

}  // namespace

RawIqClassifier::RawIqClassifier(const RawIqConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  params_.assign(RawLayout(cfg_, 1).total, 0.0);
}

RawIqClassifier::RawIqClassifier(const RawIqConfig& cfg, Rng& rng) : RawIqClassifier(cfg) {
  const RawLayout L(cfg_, 1);
  std::span<double> p(params_);
  fill_normal(p.subspan(L.conv_w, L.conv.weight_size()), std::sqrt(2.0 / (2.0 * cfg_.kernel)), rng);
  std::fill_n(p.begin() + std::ptrdiff_t(L.conv_b), cfg_.filters, 0.01);
  fill_normal(p.subspan(L.dense_w, std::size_t(cfg_.filters) * cfg_.num_classes),
              0.1 / std::sqrt(double(cfg_.filters)), rng);
}

double RawIqClassifier::loss(const Dataset& data, std::span<const std::size_t> rows,
                             std::span<double> grad) const {
  if (rows.empty()) throw ValidationError("rawiq classifier: empty batch");
  RawPass pass;
  raw_forward(cfg_, params_, data, rows, pass);
  std::vector<int> labels(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    labels[r] = data.y[rows[r]];
    if (labels[r] < 0 || labels[r] >= cfg_.num_classes)
      throw ValidationError("rawiq classifier: label out of range");
  }
  std::vector<double> delta = pass.logits;
  const double loss = softmax_rows(delta, std::size_t(cfg_.num_classes), labels, !grad.empty());
  if (grad.empty()) return loss;

  std::fill(grad.begin(), grad.end(), 0.0);
  const int batch = int(rows.size());
  const RawLayout L(cfg_, batch);
  const std::span<const double> p(params_);
  std::vector<double> dpooled(pass.pooled.size());
  k::omp::dense_backward(p.subspan(L.dense_w, std::size_t(cfg_.filters) * cfg_.num_classes), pass.pooled,
                         delta, grad.subspan(L.dense_w, std::size_t(cfg_.filters) * cfg_.num_classes),
                         grad.subspan(L.dense_b, std::size_t(cfg_.num_classes)), dpooled, batch,
                         cfg_.filters, cfg_.num_classes);
  std::vector<double> dconv(pass.conv_out.size(), 0.0);
  for (std::size_t i = 0; i < dpooled.size(); ++i)
    if (pass.pooled[i] > 0.0) dconv[pass.arg[i]] = dpooled[i];
  k::omp::conv2d_backward(L.conv, pass.planar, dconv, grad.subspan(L.conv_w, L.conv.weight_size()),
                          grad.subspan(L.conv_b, std::size_t(cfg_.filters)));
  return loss;
}

std::vector<double> RawIqClassifier::predict_proba(const Dataset& data,
                                                   std::span<const std::size_t> rows) const {
  RawPass pass;
  raw_forward(cfg_, params_, data, rows, pass);
  softmax_rows(pass.logits, std::size_t(cfg_.num_classes), {}, false);
  return pass.logits;
}

std::vector<double> interleave_iq(std::span<const Complex> chunk) {
  std::vector<double> out(2 * chunk.size());
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    out[2 * i] = chunk[i].real();
    out[2 * i + 1] = chunk[i].imag();
  }
  return out;
}

nlohmann::json to_json(const ClassifierConfig& c) {
  return {{"input_side", c.input_side},     {"num_classes", c.num_classes},
          {"conv_filters", c.conv_filters}, {"conv_kernel", c.conv_kernel},
          {"pool", c.pool},                 {"hidden_widths", c.hidden_widths},
          {"train", to_json(c.train)}};
}

ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("classifier config must be an object");
  ClassifierConfig c;
  c.input_side = j.value("input_side", c.input_side);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.conv_filters = j.value("conv_filters", c.conv_filters);
  c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
  c.pool = j.value("pool", c.pool);
  c.hidden_widths = j.value("hidden_widths", c.hidden_widths);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  c.validate();
  return c;
}

nlohmann::json to_json(const RawIqConfig& c) {
  return {{"chunk_symbols", c.chunk_symbols}, {"num_classes", c.num_classes},
          {"filters", c.filters},             {"kernel", c.kernel},
          {"train", to_json(c.train)}};
}

RawIqConfig rawiq_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("rawiq config must be an object");
  RawIqConfig c;
  c.chunk_symbols = j.value("chunk_symbols", c.chunk_symbols);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.filters = j.value("filters", c.filters);
  c.kernel = j.value("kernel", c.kernel);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"), c.train);
  c.validate();
  return c;
}

}  // namespace hideprint::learn
