#include "hideprint/channel.hpp"

#include <cmath>
#include <numbers>

namespace hideprint::channel {

std::string_view to_string(LinkKind kind) {
  return kind == LinkKind::Wired ? "wired" : "wireless";
}

LinkKind link_kind_from_string(std::string_view name) {
  if (name == "wired") return LinkKind::Wired;
  if (name == "wireless") return LinkKind::Wireless;
  throw ValidationError("unknown link kind '" + std::string(name) + "'");
}

ChannelConfig ChannelConfig::wired(std::optional<double> snr_db) {
  ChannelConfig c;
  c.kind = LinkKind::Wired;
  c.awgn_snr_db = snr_db;
  return c;
}

ChannelConfig ChannelConfig::wireless(Rng& rng, std::optional<double> snr_db) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  ChannelConfig c;
  c.kind = LinkKind::Wireless;
  c.awgn_snr_db = snr_db;
  c.cfo_hz = 200.0;
  c.fading_coherence = 50'000.0;
  c.multipath_taps = normalized_taps({
      {0.0, std::polar(1.0, phase(rng))},
      {2.0, std::polar(std::pow(10.0, -10.0 / 20.0), phase(rng))},
      {5.0, std::polar(std::pow(10.0, -15.0 / 20.0), phase(rng))},
  });
  return c;
}

ChannelConfig ChannelConfig::identity() {
  ChannelConfig c;
  c.attenuation_db = 0.0;
  return c;
}

void ChannelConfig::validate() const {
  if (!(attenuation_db >= 0.0)) throw ValidationError("channel: attenuation_db must be >= 0");
  if (kind == LinkKind::Wired && !multipath_taps.empty())
    throw ValidationError("channel: wired links carry no multipath taps");
  if (!multipath_taps.empty()) {
    double energy = 0.0;
    for (const auto& t : multipath_taps) {
      if (!(t.delay_samples >= 0.0)) throw ValidationError("channel: tap delays must be >= 0");
      energy += std::norm(t.gain);
    }
    if (std::abs(energy - 1.0) > 1e-9) throw ValidationError("channel: tap energy must be 1");
  }
  if (!(fading_coherence >= 0.0)) throw ValidationError("channel: fading_coherence must be >= 0");
  if (awgn_snr_db && !std::isfinite(*awgn_snr_db))
    throw ValidationError("channel: awgn_snr_db must be finite");
}

std::vector<MultipathTap> normalized_taps(std::vector<MultipathTap> taps) {
  double energy = 0.0;
  for (const auto& t : taps) energy += std::norm(t.gain);
  if (!(energy > 0.0)) throw ValidationError("channel: taps carry no energy");
  const double k = 1.0 / std::sqrt(energy);
  for (auto& t : taps) t.gain *= k;
  return taps;
}

std::vector<MultipathTap> delayed_taps(std::vector<MultipathTap> taps, double offset) {
  if (taps.empty()) taps.push_back({});
  for (auto& t : taps) t.delay_samples += offset;
  return taps;
}

namespace {

constexpr int kSincHalfWidth = 8;

// Windowed-sinc fractional delay: out[n] = in(n - delay). Integer delays are exact.
void add_delayed(std::span<const Complex> in, double delay, std::span<const Complex> gain,
                 std::span<Complex> out) {
  const auto whole = static_cast<std::ptrdiff_t>(std::floor(delay));
  const double frac = delay - double(whole);
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  if (frac == 0.0) {
    for (std::ptrdiff_t k = whole; k < n; ++k) out[k] += gain[k] * in[k - whole];
    return;
  }
  // h[j] for taps at in[n - whole - j], j in [-W+1, W]
  std::vector<double> h;
  for (int j = -kSincHalfWidth + 1; j <= kSincHalfWidth; ++j) {
    const double x = double(j) - frac;
    const double sinc = std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double u = (x + kSincHalfWidth) / (2.0 * kSincHalfWidth);  // Blackman window over [-W, W]
    const double win = 0.42 - 0.5 * std::cos(2 * std::numbers::pi * u) + 0.08 * std::cos(4 * std::numbers::pi * u);
    h.push_back(sinc * win);
  }
  double dc = 0.0;
  for (double v : h) dc += v;
  for (double& v : h) v /= dc;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (int j = -kSincHalfWidth + 1; j <= kSincHalfWidth; ++j) {
      const std::ptrdiff_t src = k - whole - j;
      if (src >= 0 && src < n) acc += h[std::size_t(j + kSincHalfWidth - 1)] * in[src];
    }
    out[k] += gain[k] * acc;
  }
}

// Tap gain trajectory: the nominal gain plus a low-pass complex Gaussian
// wander with roughly `coherence` samples of memory and 10 % relative spread.
std::vector<Complex> tap_trajectory(Complex nominal, std::size_t n, double coherence, Rng& rng) {
  std::vector<Complex> g(n, nominal);
  if (coherence <= 0.0) return g;
  const double a = std::exp(-1.0 / coherence);
  const double spread = 0.1 * std::abs(nominal);
  std::normal_distribution<double> d(0.0, spread * std::sqrt((1.0 - a * a) / 2.0));
  std::normal_distribution<double> start(0.0, spread / std::numbers::sqrt2);
  Complex z{start(rng), start(rng)};
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = nominal + z;
    z = a * z + Complex{d(rng), d(rng)};
  }
  return g;
}

}  // namespace

IQFrame propagate(const IQFrame& frame, const ChannelConfig& cfg, Rng& rng) {
  frame.validate();
  cfg.validate();
  IQFrame out;
  out.sample_rate = frame.sample_rate;
  const std::size_t n = frame.size();
  const double amp = std::pow(10.0, -cfg.attenuation_db / 20.0);

  if (cfg.multipath_taps.empty()) {
    out.samples = frame.samples;
    if (amp != 1.0)
      for (Complex& s : out.samples) s *= amp;
  } else {
    out.samples.assign(n, Complex{0.0, 0.0});
    for (const auto& tap : cfg.multipath_taps) {
      const std::vector<Complex> g = tap_trajectory(tap.gain * amp, n, cfg.fading_coherence, rng);
      add_delayed(frame.samples, tap.delay_samples, g, out.samples);
    }
  }

  if (cfg.cfo_hz != 0.0 || cfg.phase_offset != 0.0) {
    const double step = 2.0 * std::numbers::pi * cfg.cfo_hz / frame.sample_rate;
    for (std::size_t k = 0; k < n; ++k)
      out.samples[k] *= std::polar(1.0, std::fma(step, double(k), cfg.phase_offset));
  }

  if (cfg.awgn_snr_db) {
    const double noise_power = mean_power(out.samples) / std::pow(10.0, *cfg.awgn_snr_db / 10.0);
    std::normal_distribution<double> d(0.0, std::sqrt(noise_power / 2.0));
    for (Complex& s : out.samples) s += Complex{d(rng), d(rng)};
  }
  return out;
}

double measure_snr(const IQFrame& received, const IQFrame& reference_clean) {
  if (received.size() != reference_clean.size() || received.size() == 0)
    throw ValidationError("measure_snr: frames must be non-empty and of equal length");
  double signal = 0.0, residual = 0.0;
  for (std::size_t k = 0; k < received.size(); ++k) {
    signal += std::norm(reference_clean.samples[k]);
    residual += std::norm(received.samples[k] - reference_clean.samples[k]);
  }
  if (residual == 0.0) return kInfiniteSnr;
  return 10.0 * std::log10(signal / residual);
}

double analytic_snr_drop_db(double sigma, double channel_noise_power) {
  return 10.0 * std::log10(1.0 + 2.0 * sigma * sigma / channel_noise_power);
}

}  // namespace hideprint::channel
