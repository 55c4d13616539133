#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <numeric>

#include "hideprint/receiver.hpp"
#include "hideprint/rfchain.hpp"

using namespace hideprint;
using namespace hideprint::rfchain;

namespace {

struct Moments {
  double mean = 0.0, var = 0.0, excess_kurtosis = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  const double n = double(v.size());
  for (double x : v) m.mean += x;
  m.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - m.mean) * (x - m.mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  m.var = m2;
  m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  return m;
}

SymbolStream unit_symbols(std::size_t n) {
  ModulationConfig cfg;
  cfg.tx_amplitude = 1.0;
  return modulate(byte_counter_bits(n), cfg);
}

// Chi-square 99% bounds on the sample variance of n normal draws.
}  // namespace

TEST_CASE("modulate maps 0 to +a and 1 to -a") {
  ModulationConfig cfg;
  const std::vector<std::uint8_t> bits{0, 1, 0};
  const auto s = modulate(bits, cfg);
  REQUIRE(s.size() == 3);
  CHECK(s.symbols[0] == Complex(0.7, 0.0));
  CHECK(s.symbols[1] == Complex(-0.7, 0.0));
  CHECK(s.symbols[2] == Complex(0.7, 0.0));

  const std::vector<std::uint8_t> zeros(64, 0);
  for (auto x : modulate(zeros, cfg).symbols) CHECK(x == Complex(0.7, 0.0));
  CHECK_THROWS_AS(modulate(std::vector<std::uint8_t>{}, cfg), ValidationError);
}

TEST_CASE("byte counter repeats every 2048 bits") {
  const auto bits = byte_counter_bits(3 * 2048);
  for (std::size_t k = 0; k < 2048; ++k) {
    REQUIRE(bits[k] == bits[k + 2048]);
    REQUIRE(bits[k] == bits[k + 4096]);
  }
  // Byte 5 = 00000101.
  const std::vector<std::uint8_t> byte5(bits.begin() + 40, bits.begin() + 48);
  CHECK(byte5 == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1, 0, 1});
  bool shorter_period = false;
  for (std::size_t p = 8; p < 2048; p += 8)
    shorter_period = shorter_period || std::equal(bits.begin(), bits.begin() + 2048, bits.begin() + p);
  CHECK_FALSE(shorter_period);
}

TEST_CASE("modulate then demap recovers the bits") {
  const auto bits = byte_counter_bits(8192);
  const auto s = modulate(bits, ModulationConfig{});
  for (std::size_t k = 0; k < bits.size(); ++k) REQUIRE((s.symbols[k].real() < 0.0 ? 1 : 0) == bits[k]);
  CHECK(receiver::demap_and_ber(s, bits) == 0.0);
}

TEST_CASE("make_fingerprint is deterministic and device specific") {
  const auto a = make_fingerprint(3, 42, 0.005), b = make_fingerprint(3, 42, 0.005);
  CHECK(a.parameter_vector() == b.parameter_vector());
  const auto c = make_fingerprint(4, 42, 0.005);
  const auto pa = a.parameter_vector(), pc = c.parameter_vector();
  REQUIRE(pa.size() == pc.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] != pc[i]);
  CHECK_THROWS_AS(make_fingerprint(0, 1, 0.0), ValidationError);
}

TEST_CASE("fingerprint RMS displacement tracks strength") {
  const auto x = unit_symbols(100'000);
  for (double strength : {0.005, 0.04}) {
    for (int dev : {0, 3, 7}) {
      const auto fp = make_fingerprint(dev, 42, strength);
      CHECK(expected_rms_displacement(fp) == doctest::Approx(strength).epsilon(1e-6));
      Rng rng = make_rng(99);
      const auto y = apply_fingerprint(x, fp, rng);
      double ss = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) ss += std::norm(y.symbols[k] - x.symbols[k]);
      const double rms = std::sqrt(ss / double(x.size()));
      CHECK(rms >= 0.8 * strength);
      CHECK(rms <= 1.2 * strength);
    }
  }
}

TEST_CASE("fingerprint amplitude deviation at strength 0.005") {
  const auto x = unit_symbols(100'000);
  const auto fp = make_fingerprint(3, 42, 0.005);
  Rng rng = make_rng(5);
  const auto y = apply_fingerprint(x, fp, rng);
  std::vector<double> eps(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) eps[k] = std::abs(y.symbols[k]) - 1.0;
  const double sd = std::sqrt(moments(eps).var);
  CHECK(sd >= 0.003);
  CHECK(sd <= 0.007);
}

TEST_CASE("zero fingerprint is the identity, pure static phase is a rotation") {
  const auto x = unit_symbols(5000);
  DeviceFingerprint zero;
  Rng rng = make_rng(1);
  CHECK(apply_fingerprint(x, zero, rng).symbols == x.symbols);

  DeviceFingerprint rot;
  rot.static_phase = std::numbers::pi / 16;
  const auto y = apply_fingerprint(x, rot, rng);
  for (std::size_t k = 0; k < x.size(); ++k) {
    REQUIRE(std::abs(std::arg(y.symbols[k] / x.symbols[k]) - std::numbers::pi / 16) < 1e-12);
    REQUIRE(std::abs(std::abs(y.symbols[k]) - 1.0) < 1e-12);
  }
}

TEST_CASE("apply_fingerprint is reproducible and devices have distinct centroids") {
  const auto x = unit_symbols(20'000);
  const auto fa = make_fingerprint(0, 7, 0.04), fb = make_fingerprint(1, 7, 0.04);
  Rng r1 = make_rng(11), r2 = make_rng(11);
  CHECK(apply_fingerprint(x, fa, r1).symbols == apply_fingerprint(x, fa, r2).symbols);

  auto centroid = [&](const DeviceFingerprint& fp) {
    Rng r = make_rng(12);
    const auto y = apply_fingerprint(x, fp, r);
    Complex c = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (x.symbols[k].real() > 0) c += y.symbols[k];
    return c / double(x.size() / 2);
  };
  CHECK(std::abs(centroid(fa) - centroid(fb)) > 1e-3);
}

TEST_CASE("inject_noise: zero sigma and None are bit-exact identities") {
  const auto x = unit_symbols(1000);
  Rng a = make_rng(3), b = make_rng(3);
  CHECK(inject_noise(x, {NoiseKind::Gaussian, 0.0}, a).symbols == x.symbols);
  CHECK(inject_noise(x, {NoiseKind::None, 0.05}, a).symbols == x.symbols);
  // No rng draws were consumed.
  CHECK(a() == b());
}

TEST_CASE("Gaussian injection variance within chi-square bounds") {
  const std::size_t n = 100'000;
  const auto x = unit_symbols(n);
  Rng rng = make_rng(17);
  const auto y = inject_noise(x, {NoiseKind::Gaussian, 0.05}, rng);
  std::vector<double> di(n), dq(n);
  for (std::size_t k = 0; k < n; ++k) {
    di[k] = y.symbols[k].real() - x.symbols[k].real();
    dq[k] = y.symbols[k].imag() - x.symbols[k].imag();
  }
  for (const auto& d : {di, dq}) {
    const double v = moments(d).var;
    CHECK(v >= 0.00240);
    CHECK(v <= 0.00260);
  }
}

TEST_CASE("every noise kind has zero mean and variance sigma^2") {
  const std::size_t n = 200'000;
  for (auto kind : {NoiseKind::Gaussian, NoiseKind::Impulse, NoiseKind::Laplacian, NoiseKind::Uniform}) {
    CAPTURE(to_string(kind));
    Rng rng = make_rng(23);
    const double sigma = 0.02;
    const auto v = sample_noise(kind, sigma, n, rng);
    const auto m = moments(v);
    // Variance estimator std: sigma^2 sqrt((kurtosis - 1) / n), kurtosis = excess + 3.
    const double excess = kind == NoiseKind::Impulse ? 3.0 / kImpulseProbability - 3.0
                          : kind == NoiseKind::Laplacian ? 3.0
                          : kind == NoiseKind::Uniform   ? -1.2
                                                         : 0.0;
    const double var_se = sigma * sigma * std::sqrt((excess + 2.0) / double(n));
    CHECK(std::abs(m.var - sigma * sigma) <= 3.0 * var_se);
    CHECK(std::abs(m.mean) <= 4.0 * sigma / std::sqrt(double(n)));
  }
}

TEST_CASE("noise shapes: uniform support, Laplacian kurtosis, impulse density") {
  const std::size_t n = 200'000;
  const double sigma = 0.02;
  Rng rng = make_rng(29);

  const auto u = sample_noise(NoiseKind::Uniform, sigma, n, rng);
  const auto [umin, umax] = std::minmax_element(u.begin(), u.end());
  CHECK(*umin >= -sigma * std::sqrt(3.0));
  CHECK(*umax <= sigma * std::sqrt(3.0));
  CHECK(*umax > 0.99 * sigma * std::sqrt(3.0));

  const auto l = sample_noise(NoiseKind::Laplacian, sigma, n, rng);
  CHECK(moments(l).excess_kurtosis == doctest::Approx(3.0).epsilon(0.1));
  // Laplace(b): E|x| = b = sigma / sqrt2.
  double mean_abs = 0.0;
  for (double x : l) mean_abs += std::abs(x);
  CHECK(mean_abs / double(n) == doctest::Approx(sigma / std::sqrt(2.0)).epsilon(0.01));

  const auto im = sample_noise(NoiseKind::Impulse, sigma, n, rng);
  const double nonzero = double(std::count_if(im.begin(), im.end(), [](double x) { return x != 0.0; })) / double(n);
  const double se = std::sqrt(kImpulseProbability * (1 - kImpulseProbability) / double(n));
  CHECK(std::abs(nonzero - kImpulseProbability) <= 3.0 * se);

  CHECK(sample_noise(NoiseKind::None, sigma, 10, rng) == std::vector<double>(10, 0.0));
  CHECK_THROWS_AS(sample_noise(NoiseKind::Gaussian, sigma, 0, rng), ValidationError);
  CHECK_THROWS_AS(NoiseSpec({NoiseKind::Gaussian, -1.0}).validate(), ValidationError);
}

TEST_CASE("noise kind names round-trip") {
  for (auto kind : {NoiseKind::None, NoiseKind::Gaussian, NoiseKind::Impulse, NoiseKind::Laplacian, NoiseKind::Uniform})
    CHECK(noise_kind_from_string(to_string(kind)) == kind);
  CHECK_THROWS_AS(noise_kind_from_string("pink"), ValidationError);
}

TEST_CASE("RRC taps are unit energy and symmetric") {
  ModulationConfig cfg;
  const auto taps = rrc_taps(cfg);
  REQUIRE(taps.size() == std::size_t(cfg.rrc_span_symbols * cfg.samples_per_symbol + 1));
  CHECK(std::inner_product(taps.begin(), taps.end(), taps.begin(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < taps.size(); ++i) CHECK(taps[i] == doctest::Approx(taps[taps.size() - 1 - i]));
  CHECK(group_delay_samples(cfg) == (taps.size() - 1) / 2);

  // Closed-form peak h(0) = (1 - b + 4b/pi) / sqrt(T), renormalised.
  const double b = cfg.rrc_rolloff;
  std::vector<double> oracle(taps.size());
  const double sps = cfg.samples_per_symbol;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double t = (double(i) - double(group_delay_samples(cfg))) / sps;
    if (t == 0.0) {
      oracle[i] = 1.0 - b + 4.0 * b / std::numbers::pi;
    } else if (std::abs(std::abs(4.0 * b * t) - 1.0) < 1e-12) {
      oracle[i] = b / std::sqrt(2.0) *
                  ((1 + 2 / std::numbers::pi) * std::sin(std::numbers::pi / (4 * b)) +
                   (1 - 2 / std::numbers::pi) * std::cos(std::numbers::pi / (4 * b)));
    } else {
      const double pt = std::numbers::pi * t;
      oracle[i] = (std::sin(pt * (1 - b)) + 4 * b * t * std::cos(pt * (1 + b))) / (pt * (1 - 16 * b * b * t * t));
    }
  }
  const double e = std::sqrt(std::inner_product(oracle.begin(), oracle.end(), oracle.begin(), 0.0));
  for (std::size_t i = 0; i < taps.size(); ++i) CHECK(taps[i] == doctest::Approx(oracle[i] / e).epsilon(1e-9));
}

TEST_CASE("pulse_shape: impulse response, rate and zero ISI") {
  ModulationConfig cfg;
  SymbolStream one;
  one.symbols = {Complex(1.0, 0.0)};
  const auto frame = pulse_shape(one, cfg);
  const auto taps = rrc_taps(cfg);
  REQUIRE(frame.size() == taps.size() + std::size_t(cfg.samples_per_symbol) - 1);
  for (std::size_t i = 0; i < taps.size(); ++i) CHECK(frame.samples[i].real() == doctest::Approx(taps[i]));
  for (std::size_t i = taps.size(); i < frame.size(); ++i) CHECK(frame.samples[i] == Complex{});
  CHECK(frame.sample_rate == doctest::Approx(1e6));

  SymbolStream alt;
  for (int k = 0; k < 400; ++k) alt.symbols.emplace_back(k % 2 ? -1.0 : 1.0, 0.0);
  const auto tx = pulse_shape(alt, cfg);
  const auto rx = receiver::matched_filter(tx, cfg);
  const std::size_t delay = 2 * group_delay_samples(cfg);
  for (std::size_t k = 0; k < alt.size(); ++k) {
    const auto v = rx.samples[delay + k * std::size_t(cfg.samples_per_symbol)];
    REQUIRE((v.real() > 0) == (alt.symbols[k].real() > 0));
    // Raised-cosine cascade: within truncation ISI of the ideal.
    REQUIRE(std::abs(v.real() - alt.symbols[k].real()) < 0.05);
  }
}

TEST_CASE("modulation config validation") {
  ModulationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.samples_per_symbol = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.symbol_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.rrc_span_symbols = 4;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
