#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "hideprint/kernels.hpp"
#include "support.hpp"

using namespace hideprint;
using namespace hideprint::receiver;

namespace {

IQFrame constant_frame(std::size_t n, double amplitude) {
  IQFrame f;
  f.sample_rate = 1e6;
  // Alternating BPSK-like signs at constant modulus.
  for (std::size_t k = 0; k < n; ++k) f.samples.emplace_back(k % 3 ? amplitude : -amplitude, 0.0);
  return f;
}

double mean_abs(const IQFrame& f, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t k = from; k < to; ++k) s += std::abs(f.samples[k]);
  return s / double(to - from);
}

SymbolStream bpsk(std::size_t n, double amplitude = 1.0) {
  rfchain::ModulationConfig mod;
  mod.tx_amplitude = amplitude;
  return rfchain::modulate(rfchain::byte_counter_bits(n), mod);
}

}  // namespace

TEST_CASE("AGC reaches the target from a small input") {
  SyncConfig cfg;
  const auto out = agc(constant_frame(100'000, 0.1), cfg);
  const double a = mean_abs(out, 90'000, 100'000);
  CHECK(a >= 0.98);
  CHECK(a <= 1.02);
}

TEST_CASE("AGC leaves an input at target unchanged") {
  SyncConfig cfg;
  const auto in = constant_frame(5000, 1.0);
  const auto out = agc(in, cfg);
  for (std::size_t k = 0; k < in.size(); ++k) REQUIRE(std::abs(out.samples[k] - in.samples[k]) < 1e-9);
}

TEST_CASE("AGC reconverges after an amplitude step within the settling bound") {
  SyncConfig cfg;
  auto in = constant_frame(200'000, 0.5);
  const std::size_t step_at = 50'000;
  for (std::size_t k = step_at; k < in.size(); ++k) in.samples[k] *= 2.0;
  const auto out = agc(in, cfg);
  const std::size_t settle = agc_settling_samples(2.0, cfg);
  CHECK(settle > 0);
  REQUIRE(step_at + settle < in.size());
  CHECK(std::abs(out.samples[step_at]) > 1.9);
  for (std::size_t k = step_at + settle; k < in.size(); ++k)
    REQUIRE(std::abs(std::abs(out.samples[k]) - 1.0) <= 0.02);
  // Mean-dynamics oracle: the error is still above 2% shortly before the bound.
  CHECK(std::abs(out.samples[step_at + settle * 9 / 10]) > 1.02);
}

TEST_CASE("AGC steady state is invariant to input scale") {
  SyncConfig cfg;
  const auto frame = rfchain::pulse_shape(bpsk(20'000), rfchain::ModulationConfig{});
  const auto ref = agc(frame, cfg);
  for (double c : {1e-3, 0.37, 25.0}) {
    IQFrame scaled = frame;
    for (auto& x : scaled.samples) x *= c;
    const auto out = agc(scaled, cfg);
    for (std::size_t k = 0; k < out.size(); k += 97) REQUIRE(std::abs(out.samples[k] - ref.samples[k]) < 1e-9);
  }
  IQFrame zero;
  zero.samples.assign(100, Complex{});
  CHECK_THROWS_AS(agc(zero, cfg), ValidationError);
}

TEST_CASE("Costas with no offset passes the input through") {
  SyncConfig cfg;
  IQFrame f;
  f.sample_rate = 1e6;
  f.samples = bpsk(5000).symbols;
  CHECK(costas_bpsk(f, cfg).samples == f.samples);
}

TEST_CASE("Costas removes a static pi/8 offset") {
  SyncConfig cfg;
  IQFrame f;
  f.sample_rate = 1e6;
  Rng rng = make_rng(4);
  std::normal_distribution<double> g(0.0, 0.05);
  for (auto s : bpsk(20'000).symbols) f.samples.push_back(s * std::polar(1.0, std::numbers::pi / 8) + Complex(g(rng), g(rng)));
  const auto out = costas_bpsk(f, cfg);
  // Phase estimate: half the angle of the mean squared sample.
  Complex m2 = 0.0;
  for (std::size_t k = 10'000; k < out.size(); ++k) m2 += out.samples[k] * out.samples[k];
  CHECK(std::abs(0.5 * std::arg(m2)) < 0.02);
}

TEST_CASE("Costas and Gardner are deterministic") {
  SyncConfig cfg;
  const auto frame = rfchain::pulse_shape(bpsk(5000), rfchain::ModulationConfig{});
  CHECK(costas_bpsk(frame, cfg).samples == costas_bpsk(frame, cfg).samples);
  const rfchain::ModulationConfig mod;
  CHECK(receive(frame, mod, cfg).symbols == receive(frame, mod, cfg).symbols);
}

TEST_CASE("TX/RX RRC cascade matches the direct tap autocorrelation") {
  rfchain::ModulationConfig mod;
  IQFrame impulse;
  impulse.sample_rate = 1e6;
  impulse.samples = rfchain::pulse_shape(SymbolStream{{Complex(1.0, 0.0)}}, mod).samples;
  const auto h = matched_filter(impulse, mod);
  const auto taps = rfchain::rrc_taps(mod);
  const std::size_t centre = 2 * rfchain::group_delay_samples(mod);
  const auto autocorr = [&](std::ptrdiff_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i < taps.size(); ++i) {
      const auto j = std::ptrdiff_t(i) + lag;
      if (j >= 0 && j < std::ptrdiff_t(taps.size())) acc += taps[i] * taps[std::size_t(j)];
    }
    return acc;
  };
  CHECK(h.samples[centre].real() == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t k = 1; k * mod.samples_per_symbol <= centre; ++k) {
    CAPTURE(k);
    const auto lag = std::ptrdiff_t(k * mod.samples_per_symbol);
    CHECK(h.samples[centre + std::size_t(lag)].real() == doctest::Approx(autocorr(lag)).epsilon(1e-9));
    CHECK(h.samples[centre - std::size_t(lag)].real() == doctest::Approx(autocorr(-lag)).epsilon(1e-9));
    // Truncation to 11 symbols leaves only a small residual at the symbol instants.
    CHECK(std::abs(autocorr(lag)) < 1e-2);
  }
}

TEST_CASE("matched filter scales white noise power by the tap energy") {
  rfchain::ModulationConfig mod;
  Rng rng = make_rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  IQFrame f;
  f.sample_rate = 1e6;
  for (int k = 0; k < 400'000; ++k) f.samples.emplace_back(g(rng), g(rng));
  const auto out = matched_filter(f, mod);
  const std::size_t edge = rfchain::rrc_taps(mod).size();
  const std::span<const Complex> interior(out.samples.data() + edge, f.size() - edge);
  CHECK(mean_power(interior) == doctest::Approx(mean_power(f.samples)).epsilon(0.01));
}

TEST_CASE("Gardner on a perfectly timed input returns the decimated input") {
  SyncConfig cfg;
  IQFrame f;
  f.sample_rate = 5e5;
  const auto s = bpsk(4000);
  for (std::size_t k = 0; k < s.size(); ++k) {
    f.samples.push_back(s.symbols[k]);
    const Complex next = k + 1 < s.size() ? s.symbols[k + 1] : s.symbols[k];
    f.samples.push_back(0.5 * (s.symbols[k] + next));
  }
  const auto out = gardner_sync(f, cfg);
  REQUIRE(out.size() == s.size());
  for (std::size_t k = 0; k < s.size(); ++k) REQUIRE(std::abs(out.symbols[k] - s.symbols[k]) < 1e-9);

  IQFrame tiny;
  tiny.samples.assign(10, Complex(1.0, 0.0));
  CHECK_THROWS_AS(gardner_sync(tiny, cfg), ValidationError);
}

TEST_CASE("Gardner settles within 5% of a symbol for fractional offsets") {
  rfchain::ModulationConfig mod;
  SyncConfig cfg;
  for (double offset : {0.0, 0.25, 0.3, 0.5}) {
    CAPTURE(offset);
    channel::ChannelConfig ch = channel::ChannelConfig::identity();
    ch.kind = channel::LinkKind::Wireless;
    ch.multipath_taps = channel::delayed_taps({}, offset * mod.samples_per_symbol);
    Rng rng = make_rng(7);
    const auto rx = channel::propagate(rfchain::pulse_shape(bpsk(20'000), mod), ch, rng);
    const std::vector<double> taps = rfchain::rrc_taps(mod);
    IQFrame filtered;
    filtered.samples.resize(kernels::fir_output_length(rx.size(), taps.size(), 2));
    kernels::serial::fir_decimate(rx.samples, taps, 2, filtered.samples);
    const auto trace = gardner_sync_traced(filtered, cfg);
    // Ideal strobes at (2 * group delay + offset * sps) / 2 + 2k samples of the 2-sps stream.
    const double ideal = (2.0 * double(rfchain::group_delay_samples(mod)) + offset * mod.samples_per_symbol) / 2.0;
    const std::size_t settle = gardner_settling_symbols(cfg) * 2;
    REQUIRE(trace.strobe_times.size() > settle + 100);
    for (std::size_t i = settle; i < trace.strobe_times.size() - 20; ++i) {
      const double e = std::remainder(trace.strobe_times[i] - ideal, 2.0) / 2.0;
      REQUIRE(std::abs(e) < 0.05);
    }
  }
}

TEST_CASE("end-to-end link: clean at 20 dB with CFO and timing offset") {
  testing::LinkSetup s;
  s.cfo_hz = 200.0;
  s.timing_offset_symbols = 0.3;
  const auto r = testing::run_link(s);
  CHECK(r.bits >= 100'000);
  CHECK(r.ber == 0.0);
}

TEST_CASE("end-to-end link: half-symbol offset with injected noise") {
  testing::LinkSetup s;
  s.timing_offset_symbols = 0.5;
  s.noise = {rfchain::NoiseKind::Gaussian, 0.05};
  s.phase_offset = 2.0;
  const auto r = testing::run_link(s);
  CHECK(r.bits >= 100'000);
  CHECK(r.ber == 0.0);
}

TEST_CASE("demap_and_ber against a cyclic reference") {
  const auto ref = rfchain::byte_counter_bits(2048);
  const std::size_t n = 100'000;
  auto s = bpsk(n);
  CHECK(demap_and_ber(s, ref) == 0.0);

  SymbolStream shifted;
  shifted.symbols.assign(s.symbols.begin() + 77, s.symbols.end());
  const auto d = demap_and_ber_detailed(shifted, ref);
  CHECK(d.ber == 0.0);
  CHECK(d.lag == 77);

  auto inv = s;
  for (auto& x : inv.symbols) x = -x;
  const auto r = demap_and_ber_detailed(inv, ref);
  CHECK(r.ber == 0.0);
  CHECK(r.inverted);

  s.symbols[54'321] = -s.symbols[54'321];
  CHECK(demap_and_ber(s, ref) == doctest::Approx(1e-5));

  SymbolStream junk;
  Rng rng = make_rng(8);
  std::bernoulli_distribution coin;
  for (int k = 0; k < 5000; ++k) junk.symbols.emplace_back(coin(rng) ? 1.0 : -1.0, 0.0);
  CHECK_THROWS_AS(demap_and_ber(junk, ref), RuntimeFailure);
}

TEST_CASE("sync config validation") {
  SyncConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.costas_loop_bw = 0.2;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.gardner_loop_bw = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.sps_in = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
