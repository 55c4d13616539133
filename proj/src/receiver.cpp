#include "hideprint/receiver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "hideprint/kernels.hpp"

namespace hideprint::receiver {

void SyncConfig::validate() const {
  if (!(agc_target > 0.0)) throw ValidationError("sync: agc_target must be > 0");
  if (!(agc_rate > 0.0 && agc_rate < 1.0)) throw ValidationError("sync: agc_rate must be in (0, 1)");
  if (!(costas_loop_bw > 0.0 && costas_loop_bw <= 0.1))
    throw ValidationError("sync: costas_loop_bw must be in (0, 0.1]");
  if (!(gardner_loop_bw > 0.0 && gardner_loop_bw <= 0.1))
    throw ValidationError("sync: gardner_loop_bw must be in (0, 0.1]");
  if (sps_in < 2) throw ValidationError("sync: sps_in must be >= 2");
}

IQFrame agc(const IQFrame& frame, const SyncConfig& cfg) {
  cfg.validate();
  frame.validate();
  if (mean_power(frame.samples) == 0.0) throw ValidationError("agc: all-zero frame");

  const std::size_t head = std::min<std::size_t>(256, frame.size());
  double mean_amp = 0.0;
  for (std::size_t k = 0; k < head; ++k) mean_amp += std::abs(frame.samples[k]);
  mean_amp /= double(head);
  double log_gain = mean_amp > 0.0 ? std::log(cfg.agc_target / mean_amp) : 0.0;

  IQFrame out;
  out.sample_rate = frame.sample_rate;
  out.samples.resize(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const Complex y = frame.samples[k] * std::exp(log_gain);
    out.samples[k] = y;
    log_gain += cfg.agc_rate * (cfg.agc_target - std::abs(y)) / cfg.agc_target;
  }
  return out;
}

std::size_t agc_settling_samples(double ratio, const SyncConfig& cfg, double tol) {
  // Mean log-error dynamics: d(delta)/dn = -rate (e^delta - 1), which
  // integrates to n = (F(delta0) - F(delta1)) / rate, F(d) = ln|1 - e^-d|.
  const double d0 = std::log(ratio);
  const double d1 = std::copysign(std::log1p(tol), d0);
  if (std::abs(d0) <= std::abs(d1)) return 0;
  const auto F = [](double d) { return std::log(std::abs(1.0 - std::exp(-d))); };
  return static_cast<std::size_t>(std::ceil((F(d0) - F(d1)) / cfg.agc_rate));
}

namespace {

struct LoopGains {
  double proportional, integral;
};

// Second-order loop, damping 1/sqrt(2), for a detector of unit gain `kd`.
LoopGains loop_gains(double bw, double kd) {
  const double zeta = 1.0 / std::numbers::sqrt2;
  const double theta = bw / (zeta + 1.0 / (4.0 * zeta));
  const double d = 1.0 + 2.0 * zeta * theta + theta * theta;
  return {4.0 * zeta * theta / (d * kd), 4.0 * theta * theta / (d * kd)};
}

}  // namespace

IQFrame costas_bpsk(const IQFrame& frame, const SyncConfig& cfg) {
  cfg.validate();
  frame.validate();
  const LoopGains g = loop_gains(cfg.costas_loop_bw, 1.0);
  const double scale = 1.0 / (cfg.agc_target * cfg.agc_target);
  constexpr double kMaxFreq = 0.25;  // rad/sample
  double phase = 0.0, freq = 0.0;
  IQFrame out;
  out.sample_rate = frame.sample_rate;
  out.samples.resize(frame.size());
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const Complex y = frame.samples[k] * std::polar(1.0, -phase);
    out.samples[k] = y;
    const double err = std::clamp(y.real() * y.imag() * scale, -1.0, 1.0);
    freq = std::clamp(freq + g.integral * err, -kMaxFreq, kMaxFreq);
    phase += freq + g.proportional * err;
    if (phase > std::numbers::pi) phase -= 2.0 * std::numbers::pi;
    if (phase < -std::numbers::pi) phase += 2.0 * std::numbers::pi;
  }
  return out;
}

IQFrame matched_filter(const IQFrame& frame, const rfchain::ModulationConfig& cfg) {
  frame.validate();
  const std::vector<double> taps = rfchain::rrc_taps(cfg);
  IQFrame out;
  out.sample_rate = frame.sample_rate;
  out.samples.resize(kernels::fir_output_length(frame.size(), taps.size(), 1));
  kernels::omp::fir_decimate(frame.samples, taps, 1, out.samples);
  return out;
}

namespace {

constexpr int kPhases = 128;
constexpr int kHalf = 8;  // taps at offsets -kHalf+1 .. kHalf

using Bank = std::array<std::array<double, 2 * kHalf>, kPhases + 1>;

// bank[p][k + kHalf - 1] weights x[i + k] for the time i + p / kPhases.
const Bank& interpolator_bank() {
  static const Bank bank = [] {
    Bank b{};
    for (int p = 0; p <= kPhases; ++p) {
      const double mu = double(p) / kPhases;
      double dc = 0.0;
      for (int k = -kHalf + 1; k <= kHalf; ++k) {
        const double x = mu - double(k);
        double v;
        if (p == 0 || p == kPhases) {
          v = (k == (p == 0 ? 0 : 1)) ? 1.0 : 0.0;
        } else {
          const double sinc = std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
          const double u = (x + kHalf) / (2.0 * kHalf);
          const double win = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * u) +
                             0.08 * std::cos(4.0 * std::numbers::pi * u);
          v = sinc * win;
        }
        b[p][k + kHalf - 1] = v;
        dc += v;
      }
      for (double& v : b[p]) v /= dc;
    }
    return b;
  }();
  return bank;
}

Complex interpolate(std::span<const Complex> x, double t) {
  const double fl = std::floor(t);
  const auto i = static_cast<std::ptrdiff_t>(fl);
  const int p = static_cast<int>(std::lround((t - fl) * kPhases));
  const auto& taps = interpolator_bank()[p];
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  double re = 0.0, im = 0.0;
  for (int k = -kHalf + 1; k <= kHalf; ++k) {
    const std::ptrdiff_t src = i + k;
    if (src < 0 || src >= n) continue;
    const double w = taps[k + kHalf - 1];
    re += w * x[src].real();
    im += w * x[src].imag();
  }
  return {re, im};
}

// Slope of the power-normalised Gardner S-curve for raised-cosine pulses
// with rolloff 0.35, per symbol of timing error.
constexpr double kGardnerDetectorGain = 1.07;

}  // namespace

std::size_t gardner_settling_symbols(const SyncConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(4.0 / cfg.gardner_loop_bw));
}

GardnerTrace gardner_sync_traced(const IQFrame& frame, const SyncConfig& cfg) {
  cfg.validate();
  frame.validate();
  const double sps = cfg.sps_in;
  if (frame.size() < gardner_settling_symbols(cfg) * std::size_t(cfg.sps_in))
    throw ValidationError("gardner_sync: frame shorter than the loop settling length");

  const LoopGains g = loop_gains(cfg.gardner_loop_bw, kGardnerDetectorGain);
  const std::span<const Complex> x = frame.samples;
  const double last = double(frame.size() - 1);

  GardnerTrace trace;
  trace.symbols.symbols.reserve(frame.size() / cfg.sps_in + 1);
  trace.strobe_times.reserve(frame.size() / cfg.sps_in + 1);

  // Detector normalisation starts from the mean power of the frame head, so
  // the filter ramp-up at the start cannot inflate the first errors.
  double power = mean_power(x.subspan(0, std::min<std::size_t>(x.size(), 1024)));
  double t = 0.0, integrator = 0.0;
  Complex prev{0.0, 0.0};
  bool have_prev = false;
  while (t <= last) {
    const Complex cur = interpolate(x, t);
    power = 0.99 * power + 0.01 * std::norm(cur);
    double step = 0.0;
    if (have_prev && power > 0.0) {
      const Complex mid = interpolate(x, t - 0.5 * sps);
      const double err = std::real((prev - cur) * std::conj(mid)) / power;
      integrator += g.integral * err;
      step = g.proportional * err + integrator;
    }
    trace.symbols.symbols.push_back(cur);
    trace.strobe_times.push_back(t);
    prev = cur;
    have_prev = true;
    t += sps * (1.0 + std::clamp(step, -0.5, 0.5));
  }
  return trace;
}

SymbolStream gardner_sync(const IQFrame& frame, const SyncConfig& cfg) {
  return gardner_sync_traced(frame, cfg).symbols;
}

SymbolStream receive(const IQFrame& frame, const rfchain::ModulationConfig& mod,
                     const SyncConfig& sync) {
  sync.validate();
  mod.validate();
  if (mod.samples_per_symbol % sync.sps_in != 0)
    throw ValidationError("receive: samples_per_symbol must be a multiple of sps_in");
  const IQFrame levelled = agc(frame, sync);
  const IQFrame derotated = costas_bpsk(levelled, sync);

  const std::vector<double> taps = rfchain::rrc_taps(mod);
  const std::size_t decim = std::size_t(mod.samples_per_symbol / sync.sps_in);
  IQFrame filtered;
  filtered.sample_rate = frame.sample_rate / double(decim);
  filtered.samples.resize(kernels::fir_output_length(derotated.size(), taps.size(), decim));
  kernels::omp::fir_decimate(derotated.samples, taps, decim, filtered.samples);
  return gardner_sync(filtered, sync);
}

BerResult demap_and_ber_detailed(const SymbolStream& symbols,
                                 std::span<const std::uint8_t> reference_bits) {
  if (symbols.size() == 0 || reference_bits.empty())
    throw ValidationError("demap_and_ber: empty input");
  const std::size_t n = symbols.size();
  const std::size_t period = reference_bits.size();
  std::vector<int> rx(n);
  for (std::size_t i = 0; i < n; ++i) rx[i] = symbols.symbols[i].real() < 0.0 ? -1 : 1;
  std::vector<int> ref(period);
  for (std::size_t i = 0; i < period; ++i) ref[i] = reference_bits[i] ? -1 : 1;

  const std::size_t window = std::min<std::size_t>(n, 4096);
  long best = 0;
  std::size_t best_lag = 0;
  for (std::size_t lag = 0; lag < period; ++lag) {
    long c = 0;
    for (std::size_t i = 0; i < window; ++i) c += rx[i] * ref[(i + lag) % period];
    if (std::labs(c) > std::labs(best)) {
      best = c;
      best_lag = lag;
    }
  }
  BerResult r;
  r.lag = best_lag;
  r.inverted = best < 0;
  r.correlation = double(std::labs(best)) / double(window);
  if (r.correlation < 0.5)
    throw RuntimeFailure("demap_and_ber: alignment correlation below threshold");
  std::size_t errors = 0;
  const int polarity = r.inverted ? -1 : 1;
  for (std::size_t i = 0; i < n; ++i)
    if (polarity * rx[i] != ref[(i + best_lag) % period]) ++errors;
  r.ber = double(errors) / double(n);
  return r;
}

double demap_and_ber(const SymbolStream& symbols, std::span<const std::uint8_t> reference_bits) {
  return demap_and_ber_detailed(symbols, reference_bits).ber;
}

}  // namespace hideprint::receiver
