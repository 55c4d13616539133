#include "hideprint/rfchain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hideprint/kernels.hpp"

namespace hideprint::rfchain {

void ModulationConfig::validate() const {
  if (!(symbol_rate > 0.0)) throw ValidationError("modulation: symbol_rate must be > 0");
  if (samples_per_symbol < 2) throw ValidationError("modulation: samples_per_symbol must be >= 2");
  if (!(rrc_rolloff > 0.0 && rrc_rolloff <= 1.0))
    throw ValidationError("modulation: rrc_rolloff must be in (0, 1]");
  if (rrc_span_symbols < 6) throw ValidationError("modulation: rrc_span_symbols must be >= 6");
  if ((rrc_span_symbols * samples_per_symbol) % 2 != 0)
    throw ValidationError("modulation: rrc_span_symbols * samples_per_symbol must be even");
  if (!(tx_amplitude > 0.0)) throw ValidationError("modulation: tx_amplitude must be > 0");
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Impulse: return "impulse";
    case NoiseKind::Laplacian: return "laplacian";
    case NoiseKind::Uniform: return "uniform";
  }
  throw ValidationError("unknown noise kind");
}

NoiseKind noise_kind_from_string(std::string_view name) {
  for (NoiseKind k : {NoiseKind::None, NoiseKind::Gaussian, NoiseKind::Impulse,
                      NoiseKind::Laplacian, NoiseKind::Uniform})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown noise kind '" + std::string(name) + "'");
}

void NoiseSpec::validate() const {
  (void)to_string(kind);
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw ValidationError("noise: sigma must be finite and >= 0");
}

std::vector<double> DeviceFingerprint::parameter_vector() const {
  return {gain_imbalance, quadrature_skew, dc_offset.real(), dc_offset.imag(),
          static_phase,   amam_cubic,      phase_noise_std};
}

namespace {

// Fingerprinted version of x before the phase walk and DC offset.
Complex static_distortion(Complex x, const DeviceFingerprint& fp) {
  const double g = fp.gain_imbalance, q = fp.quadrature_skew;
  const Complex iq{(1.0 + 0.5 * g) * x.real(),
                   (1.0 - 0.5 * g) * (x.imag() * std::cos(q) + x.real() * std::sin(q))};
  const Complex amam = iq + fp.amam_cubic * std::norm(iq) * iq;
  return amam * std::polar(1.0, fp.static_phase);
}

double stationary_phase_variance(double increment_std) {
  return increment_std * increment_std / (1.0 - kPhaseNoiseLeak * kPhaseNoiseLeak);
}

DeviceFingerprint scaled(const DeviceFingerprint& raw, double k) {
  DeviceFingerprint fp = raw;
  fp.gain_imbalance *= k;
  fp.quadrature_skew *= k;
  fp.dc_offset *= k;
  fp.static_phase *= k;
  fp.amam_cubic *= k;
  fp.phase_noise_std *= k;
  return fp;
}

}  // namespace

double expected_rms_displacement(const DeviceFingerprint& fp) {
  const double coherence = std::exp(-0.5 * stationary_phase_variance(fp.phase_noise_std));
  double acc = 0.0;
  for (double s : {1.0, -1.0}) {
    const Complex y0 = static_distortion(Complex{s, 0.0}, fp);
    const Complex offset = fp.dc_offset - s;
    acc += std::norm(y0) + std::norm(offset) + 2.0 * coherence * std::real(y0 * std::conj(offset));
  }
  return std::sqrt(std::max(acc / 2.0, 0.0));
}

DeviceFingerprint make_fingerprint(int device_id, std::uint64_t calibration_seed,
                                   double strength) {
  if (!(strength > 0.0)) throw ValidationError("make_fingerprint: strength must be > 0");
  if (device_id < 0) throw ValidationError("make_fingerprint: device_id must be >= 0");

  // The LO-leakage phase of the pool follows a golden-ratio sequence over the
  // half circle (mirroring folds d and -d together) from a per-pool offset.
  Rng pool_rng = make_rng(derive_seed(calibration_seed, {0x706f6f6cULL}));
  const double pool_offset = std::uniform_real_distribution<double>(0.0, 1.0)(pool_rng);

  Rng rng = make_rng(derive_seed(calibration_seed, {0x66707274ULL, std::uint64_t(device_id)}));
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  const double turn = std::fmod(pool_offset + golden * device_id + 0.05 * sym(rng), 1.0);
  const double dc_angle = std::numbers::pi * (turn < 0.0 ? turn + 1.0 : turn);
  const double dc_mag = 0.6 + 0.4 * unit(rng);

  DeviceFingerprint raw;
  raw.device_id = device_id;
  raw.dc_offset = std::polar(dc_mag, dc_angle);
  raw.gain_imbalance = 0.3 * sym(rng);
  raw.quadrature_skew = 0.2 * sym(rng);
  raw.static_phase = 0.2 * sym(rng);
  raw.amam_cubic = 0.3 * sym(rng);
  raw.phase_noise_std = 0.05 + 0.1 * unit(rng);

  // RMS displacement grows monotonically with the common scale in the small
  // impairment regime; bracket and bisect.
  double lo = 0.0, hi = strength;
  while (expected_rms_displacement(scaled(raw, hi)) < strength) {
    hi *= 2.0;
    if (hi > 1e6) throw ValidationError("make_fingerprint: strength out of range");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_rms_displacement(scaled(raw, mid)) < strength ? lo : hi) = mid;
  }
  return scaled(raw, 0.5 * (lo + hi));
}

std::vector<std::uint8_t> byte_counter_bits(std::size_t count) {
  std::vector<std::uint8_t> bits(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t byte = (k / 8) % 256;
    bits[k] = static_cast<std::uint8_t>((byte >> (7 - k % 8)) & 1U);
  }
  return bits;
}

SymbolStream modulate(std::span<const std::uint8_t> bits, const ModulationConfig& cfg) {
  if (bits.empty()) throw ValidationError("modulate: empty bit sequence");
  SymbolStream out;
  out.symbols.reserve(bits.size());
  for (std::uint8_t b : bits)
    out.symbols.emplace_back(b ? -cfg.tx_amplitude : cfg.tx_amplitude, 0.0);
  return out;
}

SymbolStream apply_fingerprint(const SymbolStream& s, const DeviceFingerprint& fp, Rng& rng) {
  SymbolStream out;
  out.symbols.resize(s.size());
  const bool walk = fp.phase_noise_std > 0.0;
  std::normal_distribution<double> increment(0.0, walk ? fp.phase_noise_std : 1.0);
  double psi = 0.0;
  if (walk) {
    std::normal_distribution<double> start(0.0, std::sqrt(stationary_phase_variance(fp.phase_noise_std)));
    psi = start(rng);
  }
  for (std::size_t n = 0; n < s.size(); ++n) {
    Complex y = static_distortion(s.symbols[n], fp);
    if (walk) {
      y *= std::polar(1.0, psi);
      psi = kPhaseNoiseLeak * psi + increment(rng);
    }
    out.symbols[n] = y + fp.dc_offset;
  }
  return out;
}

std::vector<double> sample_noise(NoiseKind kind, double sigma, std::size_t n, Rng& rng) {
  if (n == 0) throw ValidationError("sample_noise: n must be >= 1");
  if (!(sigma >= 0.0)) throw ValidationError("sample_noise: sigma must be >= 0");
  std::vector<double> v(n, 0.0);
  switch (kind) {
    case NoiseKind::None:
      break;
    case NoiseKind::Gaussian: {
      std::normal_distribution<double> d(0.0, sigma);
      for (double& x : v) x = d(rng);
      break;
    }
    case NoiseKind::Uniform: {
      const double a = sigma * std::sqrt(3.0);
      std::uniform_real_distribution<double> d(-a, a);
      for (double& x : v) x = d(rng);
      break;
    }
    case NoiseKind::Laplacian: {
      const double b = sigma / std::numbers::sqrt2;
      std::exponential_distribution<double> mag(1.0 / b);
      std::bernoulli_distribution sign(0.5);
      for (double& x : v) {
        const double m = mag(rng);
        x = sign(rng) ? m : -m;
      }
      break;
    }
    case NoiseKind::Impulse: {
      std::bernoulli_distribution hit(kImpulseProbability);
      std::normal_distribution<double> d(0.0, sigma / std::sqrt(kImpulseProbability));
      for (double& x : v) x = hit(rng) ? d(rng) : 0.0;
      break;
    }
    default:
      throw ValidationError("sample_noise: unknown noise kind");
  }
  return v;
}

SymbolStream inject_noise(const SymbolStream& s, const NoiseSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.is_identity() || s.size() == 0) return s;
  const std::vector<double> v = sample_noise(spec.kind, spec.sigma, 2 * s.size(), rng);
  SymbolStream out = s;
  for (std::size_t k = 0; k < s.size(); ++k) out.symbols[k] += Complex{v[2 * k], v[2 * k + 1]};
  return out;
}

std::vector<double> rrc_taps(const ModulationConfig& cfg) {
  cfg.validate();
  const int sps = cfg.samples_per_symbol;
  const std::size_t L = std::size_t(cfg.rrc_span_symbols) * sps + 1;
  const double beta = cfg.rrc_rolloff;
  const double pi = std::numbers::pi;
  const double centre = 0.5 * double(L - 1);
  std::vector<double> h(L);
  for (std::size_t k = 0; k < L; ++k) {
    const double t = (double(k) - centre) / sps;  // in symbol periods
    if (std::abs(t) < 1e-12) {
      h[k] = 1.0 - beta + 4.0 * beta / pi;
    } else if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
      h[k] = beta / std::numbers::sqrt2 *
             ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) +
              (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
    } else {
      const double num = std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
      const double den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
      h[k] = num / den;
    }
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double norm = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= norm;
  return h;
}

IQFrame pulse_shape(const SymbolStream& s, const ModulationConfig& cfg) {
  if (s.size() == 0) throw ValidationError("pulse_shape: empty symbol stream");
  const std::vector<double> taps = rrc_taps(cfg);
  const std::size_t sps = std::size_t(cfg.samples_per_symbol);
  IQFrame out;
  out.sample_rate = cfg.sample_rate();
  out.samples.resize(s.size() * sps + taps.size() - 1);
  kernels::omp::upsample_fir(s.symbols, taps, sps, out.samples);
  return out;
}

}  // namespace hideprint::rfchain
