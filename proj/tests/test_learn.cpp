#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "hideprint/imaging.hpp"
#include "hideprint/learn/autoencoder.hpp"
#include "hideprint/learn/checkpoint.hpp"
#include "hideprint/learn/classifier.hpp"
#include "hideprint/learn/metrics.hpp"
#include "hideprint/rfchain.hpp"

using namespace hideprint;
using namespace hideprint::learn;

namespace {

ClassifierConfig small_classifier(int classes) {
  ClassifierConfig cfg;
  cfg.input_side = 16;
  cfg.num_classes = classes;
  cfg.conv_filters = 4;
  cfg.conv_kernel = 3;
  cfg.hidden_widths = {32};
  return cfg;
}

// Gaussian blob of intensity on a side x side grid.
std::vector<double> blob_image(int side, double cx, double cy, Rng& rng) {
  std::normal_distribution<double> jitter(0.0, 0.5);
  const double x0 = cx + jitter(rng), y0 = cy + jitter(rng);
  std::vector<double> img(std::size_t(side) * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      img[std::size_t(r) * side + c] = std::exp(-((c - x0) * (c - x0) + (r - y0) * (r - y0)) / 8.0);
  return img;
}

Dataset blobs(int per_class, Rng& rng) {
  Dataset d;
  for (int i = 0; i < per_class; ++i) {
    d.add(blob_image(16, 4, 4, rng), 0);
    d.add(blob_image(16, 11, 11, rng), 1);
  }
  return d;
}

Dataset random_rows(std::size_t dim, int rows, int classes, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, classes - 1);
  Dataset d;
  std::vector<double> x(dim);
  for (int r = 0; r < rows; ++r) {
    for (auto& v : x) v = u(rng);
    d.add(x, label(rng));
  }
  return d;
}

std::vector<std::size_t> all_rows(const Dataset& d) {
  std::vector<std::size_t> r(d.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Fingerprint images of one synthetic transmitter at 16x16.
Dataset device_images(double strength, int count, std::uint64_t seed) {
  rfchain::ModulationConfig mod;
  imaging::ImagingConfig icfg;
  icfg.image_side = 16;
  icfg.chunk_size = 5000;
  Rng rng = make_rng(seed);
  const auto fp = rfchain::make_fingerprint(0, 7, strength);
  auto s = rfchain::apply_fingerprint(rfchain::modulate(rfchain::byte_counter_bits(icfg.chunk_size * count), mod), fp, rng);
  s = rfchain::inject_noise(s, {rfchain::NoiseKind::Gaussian, 0.01}, rng);
  Dataset d;
  for (const auto& img : imaging::images_from_samples(s.symbols, icfg, {}))
    d.add(imaging::normalized_pixels(img, icfg.pixel_cap), 0);
  return d;
}

}  // namespace

TEST_CASE("threshold rule tau = mean + 3.5 sample std") {
  const std::vector<double> same{0.2, 0.2, 0.2, 0.2};
  CHECK(ThresholdModel::from_mse(same).tau == 0.2);
  const std::vector<double> three{1.0, 2.0, 3.0};
  const auto t = ThresholdModel::from_mse(three);
  CHECK(t.train_mse_mean == 2.0);
  CHECK(t.train_mse_std == 1.0);
  CHECK(t.tau == 5.5);

  Rng rng = make_rng(1);
  std::exponential_distribution<double> e(10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(std::size_t(2 + trial));
    for (auto& x : v) x = e(rng);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / double(v.size() - 1));
    const auto m = ThresholdModel::from_mse(v);
    REQUIRE(m.train_mse_mean == doctest::Approx(mean).epsilon(1e-12));
    REQUIRE(m.train_mse_std == doctest::Approx(sd).epsilon(1e-12));
    REQUIRE(m.tau == m.train_mse_mean + 3.5 * m.train_mse_std);
  }
  CHECK(ThresholdModel::from_mse(std::vector<double>{0.7}).tau == 0.7);
}

TEST_CASE("one-class decision is strict at tau") {
  AutoencoderConfig cfg;
  cfg.input_size = 16;
  SparseAutoencoder ae(cfg);  // zero weights reconstruct 0
  std::vector<double> x(16, 0.5);
  const double mse = 0.25;
  ThresholdModel t;
  t.tau = mse;
  const auto at = one_class_decide(ae, t, x);
  CHECK(at.mse == doctest::Approx(mse));
  CHECK(at.decision == Decision::Anomaly);
  t.tau = std::nextafter(at.mse, 1.0);
  CHECK(one_class_decide(ae, t, x).decision == Decision::Legitimate);
}

TEST_CASE("autoencoder accepts its device and rejects a 10x fingerprint") {
  const auto train = device_images(0.04, 40, 2), val = device_images(0.04, 20, 3);
  const auto replay = device_images(0.04, 20, 4), strong = device_images(0.4, 20, 5);
  AutoencoderConfig cfg;
  cfg.input_size = 256;
  cfg.train.max_epochs = 60;
  cfg.train.min_epochs = 60;
  Rng rng = make_rng(6);
  SparseAutoencoder ae(cfg, rng);
  const auto res = train_autoencoder(ae, train, val, rng);
  CHECK(res.threshold.tau == res.threshold.train_mse_mean + 3.5 * res.threshold.train_mse_std);
  int accepted = 0, rejected = 0;
  for (std::size_t i = 0; i < replay.size(); ++i)
    accepted += one_class_decide(ae, res.threshold, replay.row(i)).decision == Decision::Legitimate;
  for (std::size_t i = 0; i < strong.size(); ++i)
    rejected += one_class_decide(ae, res.threshold, strong.row(i)).decision == Decision::Anomaly;
  CHECK(accepted >= 19);
  CHECK(rejected == int(strong.size()));
}

TEST_CASE("classifier separates two blobs perfectly") {
  Rng rng = make_rng(7);
  const auto train = blobs(40, rng), val = blobs(10, rng), test = blobs(20, rng);
  ImageClassifier model(small_classifier(2), rng);
  train_classifier(model, train, val, model.config().train, rng);
  CHECK(model.accuracy(test) == 1.0);
}

TEST_CASE("untrained 10-class model: simplex, near uniform, chance accuracy") {
  Rng rng = make_rng(8);
  ImageClassifier model(small_classifier(10), rng);
  const auto data = random_rows(model.input_size(), 500, 10, rng);
  const auto p = model.predict_proba(data, all_rows(data));
  double max_p = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    double s = 0.0;
    for (int c = 0; c < 10; ++c) {
      const double v = p[r * 10 + c];
      REQUIRE(v >= 0.0);
      s += v;
      max_p = std::max(max_p, v);
    }
    REQUIRE(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(max_p < 0.5);
  // Labels are independent of the inputs: binomial(500, 0.1) within 4 SE.
  CHECK(std::abs(model.accuracy(data) - 0.1) < 4.0 * std::sqrt(0.09 / 500.0));
  std::vector<double> wrong(model.input_size() + 1);
  CHECK_THROWS_AS(model.predict(wrong), ValidationError);
}

TEST_CASE("overfit model memorises a small batch") {
  Rng rng = make_rng(9);
  auto cfg = small_classifier(4);
  cfg.train.max_epochs = 300;
  cfg.train.min_epochs = 100;
  ImageClassifier model(cfg, rng);
  const auto data = random_rows(model.input_size(), 8, 4, rng);
  train_classifier(model, data, data, cfg.train, rng);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = model.predict(data.row(i));
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == data.y[i]);
  }
}

TEST_CASE("training is deterministic and rejects one-class sets") {
  Rng a = make_rng(10), b = make_rng(10);
  Rng data_rng = make_rng(11);
  const auto train = blobs(10, data_rng), val = blobs(5, data_rng);
  ImageClassifier ma(small_classifier(2), a), mb(small_classifier(2), b);
  train_classifier(ma, train, val, ma.config().train, a);
  train_classifier(mb, train, val, mb.config().train, b);
  CHECK(std::equal(ma.parameters().begin(), ma.parameters().end(), mb.parameters().begin()));

  Dataset one;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.y[i] == 0) one.add(train.row(i), 0);
  CHECK_THROWS_AS(train_classifier(ma, one, one, ma.config().train, a), ValidationError);
}

TEST_CASE("raw-IQ classifier on shuffled labels is at chance") {
  Rng rng = make_rng(12);
  RawIqConfig cfg;
  cfg.chunk_symbols = 64;
  cfg.train.max_epochs = 30;
  RawIqClassifier model(cfg, rng);
  const auto train = random_rows(model.input_size(), 400, 10, rng);
  const auto val = random_rows(model.input_size(), 200, 10, rng);
  const auto test = random_rows(model.input_size(), 1000, 10, rng);
  train_classifier(model, train, val, cfg.train, rng);
  CHECK(std::abs(model.accuracy(test) - 0.1) < 4.0 * std::sqrt(0.09 / 1000.0));

  const std::vector<Complex> chunk{Complex(1, 2), Complex(3, 4)};
  CHECK(interleave_iq(chunk) == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("gradient checks") {
  Rng rng = make_rng(13);
  LinearModel linear(6, 3, rng);
  CHECK(gradient_check(linear, random_rows(6, 5, 3, rng), 1000, 1).max_relative_error < 1e-8);

  ImageClassifier clf(small_classifier(10), rng);
  const auto r1 = gradient_check(clf, random_rows(clf.input_size(), 4, 10, rng), 500, 2);
  CHECK(r1.checked == 500);
  CHECK(r1.max_relative_error < 1e-4);

  RawIqConfig rc;
  rc.chunk_symbols = 32;
  RawIqClassifier raw(rc, rng);
  const auto r2 = gradient_check(raw, random_rows(raw.input_size(), 4, 10, rng), 100'000, 3);
  CHECK(r2.checked == raw.parameters().size());
  CHECK(r2.max_relative_error < 1e-4);

  AutoencoderConfig ac;
  ac.input_size = 64;
  ac.hidden_units = 16;
  SparseAutoencoder ae(ac, rng);
  const auto r3 = gradient_check(ae, random_rows(64, 4, 1, rng), 100'000, 4);
  CHECK(r3.checked == ae.parameters().size());
  CHECK(r3.max_relative_error < 1e-4);
}

TEST_CASE("early stop on the variance of the last five accuracies") {
  CHECK(early_stop_reached(std::vector<double>{0.5, 0.9, 0.9, 0.9, 0.9, 0.9}, 5, 0.5));
  CHECK_FALSE(early_stop_reached(std::vector<double>{0.9, 0.9, 0.9, 0.9}, 5, 0.5));
  // Percentage points: 90, 91, 90, 91, 90 has sample variance 0.3.
  CHECK(early_stop_reached(std::vector<double>{0.90, 0.91, 0.90, 0.91, 0.90}, 5, 0.5));
  // 90, 92, 90, 92, 90 has sample variance 1.2.
  CHECK_FALSE(early_stop_reached(std::vector<double>{0.90, 0.92, 0.90, 0.92, 0.90}, 5, 0.5));
}

TEST_CASE("confusion matrix and rates") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2, 2};
  const auto perfect = evaluate(truth, truth, 3);
  CHECK(perfect.accuracy == 1.0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(perfect.confusion.at(a, b) == (a == b ? perfect.confusion.row_sum(a) : 0));
  for (double v : perfect.fpr) CHECK(v == 0.0);
  for (double v : perfect.fnr) CHECK(v == 0.0);

  const std::vector<int> pred{0, 1, 1, 1, 2, 0, 2};
  const auto r = evaluate(truth, pred, 3);
  CHECK(r.confusion.row_sum(0) == 2);
  CHECK(r.confusion.row_sum(2) == 3);
  CHECK(r.confusion.total() == truth.size());
  CHECK(r.accuracy == doctest::Approx(5.0 / 7.0));
  // Class 0: FN 1 of 2, FP 1 of 5 negatives.
  CHECK(r.fnr[0] == doctest::Approx(0.5));
  CHECK(r.fpr[0] == doctest::Approx(0.2));
  CHECK_THROWS_AS(evaluate(std::vector<int>{}, std::vector<int>{}, 3), ValidationError);
}

TEST_CASE("ROC: separable, random and monotone") {
  Rng rng = make_rng(14);
  std::normal_distribution<double> tiny(0.0, 1e-3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 4000;
  std::vector<double> good(n), random(n);
  std::unique_ptr<bool[]> lab(new bool[n]);
  for (std::size_t i = 0; i < n; ++i) {
    lab[i] = i % 2 == 0;
    good[i] = (lab[i] ? 1.0 : 0.0) + tiny(rng);
    random[i] = u(rng);
  }
  const std::span<const bool> positive(lab.get(), n);
  const auto g = roc_curve(good, positive);
  CHECK(g.auc == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.best.tpr - g.best.fpr == doctest::Approx(1.0));
  const auto r = roc_curve(random, positive);
  // AUC standard error for n/2 positives and negatives under H0.
  const double se = std::sqrt((n + 1.0) / (12.0 * (n / 2.0) * (n / 2.0)));
  CHECK(std::abs(r.auc - 0.5) < 4.0 * se);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    REQUIRE(r.points[i].fpr >= r.points[i - 1].fpr);
    REQUIRE(r.points[i].tpr >= r.points[i - 1].tpr);
  }
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.back().tpr == 1.0);
}

TEST_CASE("PCA: plane, isotropic cloud, separated clusters") {
  Rng rng = make_rng(15);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t d = 10, n = 20'000;
  std::vector<double> plane(n * d), iso(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = g(rng), b = g(rng);
    for (std::size_t j = 0; j < d; ++j) {
      plane[i * d + j] = a * std::cos(double(j)) + 3.0 * b * std::sin(double(j) * 0.7);
      iso[i * d + j] = g(rng);
    }
  }
  const auto p = pca_project(plane, n, d);
  CHECK(p.explained[0] + p.explained[1] == doctest::Approx(1.0).epsilon(1e-9));
  const auto q = pca_project(iso, n, d);
  CHECK(q.explained[0] + q.explained[1] == doctest::Approx(2.0 / d).epsilon(0.1));

  std::vector<double> two(400 * d);
  std::vector<int> labels(400);
  for (std::size_t i = 0; i < 400; ++i) {
    labels[i] = int(i % 2);
    for (std::size_t j = 0; j < d; ++j) two[i * d + j] = 0.3 * g(rng) + (labels[i] ? 3.0 : 0.0);
  }
  CHECK(silhouette(pca_project(two, 400, d), labels) > 0.5);

  std::vector<double> line(3 * d, 0.0);
  for (std::size_t i = 0; i < 3; ++i) line[i * d] = double(i);
  const auto l = pca_project(line, 3, d);
  for (double y : l.y) CHECK(y == doctest::Approx(0.0));
}

TEST_CASE("stratified split keeps label proportions") {
  Rng rng = make_rng(16);
  Dataset d;
  for (int i = 0; i < 100; ++i) d.add(std::vector<double>{double(i)}, i % 4);
  const std::vector<double> fr{0.6, 0.2, 0.2};
  const auto parts = stratified_split(d, fr, rng);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].size() == 60);
  CHECK(parts[1].size() == 20);
  CHECK(parts[2].size() == 20);
  std::vector<std::size_t> all;
  for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
}

TEST_CASE("checkpoint round trip and corrupt file") {
  const auto dir = std::filesystem::temp_directory_path() / "hideprint_ckpt_test";
  std::filesystem::create_directories(dir);
  Checkpoint c;
  c.config = {{"kind", "linear"}, {"n", 3}};
  c.seed = 0xdeadbeefcafeULL;
  c.parameters = {1.5, -2.25, 1e-300};
  save_checkpoint(dir / "a.hpck", c);
  const auto back = load_checkpoint(dir / "a.hpck");
  CHECK(back.config == c.config);
  CHECK(back.seed == c.seed);
  CHECK(back.parameters == c.parameters);

  {
    std::ofstream os(dir / "bad.hpck", std::ios::binary);
    os << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.hpck"), ValidationError);
  std::filesystem::remove_all(dir);
}
