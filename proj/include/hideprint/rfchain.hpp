#pragma once

// Transmitter side: BPSK mapping, synthetic hardware fingerprints, injected
// obfuscation noise and root-raised-cosine pulse shaping.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hideprint/common.hpp"

namespace hideprint::rfchain {

struct ModulationConfig {
  double symbol_rate = 250'000.0;  // symbols/s
  int samples_per_symbol = 4;
  double rrc_rolloff = 0.35;
  int rrc_span_symbols = 11;
  double tx_amplitude = 0.7;
  // Carrier is annotation only; everything runs at complex baseband.
  double carrier_hz = 900e6;

  double sample_rate() const { return symbol_rate * samples_per_symbol; }
  void validate() const;
};

enum class NoiseKind { None, Gaussian, Impulse, Laplacian, Uniform };

std::string_view to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(std::string_view name);

/// Probability of an impulse in the Bernoulli-Gaussian impulse model.
inline constexpr double kImpulseProbability = 0.05;

struct NoiseSpec {
  NoiseKind kind = NoiseKind::None;
  double sigma = 0.0;  // per-axis standard deviation

  bool is_identity() const { return kind == NoiseKind::None || sigma == 0.0; }
  void validate() const;
};

/// Per-device transmitter impairments. Applied to a symbol x as
///   iq  = (1 + g/2) Re x + j (1 - g/2) (Im x cos q + Re x sin q)
///   y   = iq (1 + c |iq|^2) exp(j (theta + psi_n)) + dc
/// where psi_n is a leaky random walk with increment std `phase_noise_std`.
struct DeviceFingerprint {
  int device_id = 0;
  double gain_imbalance = 0.0;   // g
  double quadrature_skew = 0.0;  // q, radians
  Complex dc_offset{0.0, 0.0};
  double static_phase = 0.0;     // theta, radians
  double amam_cubic = 0.0;       // c
  double phase_noise_std = 0.0;  // radians per symbol

  std::vector<double> parameter_vector() const;
};

/// Leak factor of the phase-noise walk: psi_n = leak * psi_{n-1} + e_n.
inline constexpr double kPhaseNoiseLeak = 0.9;

/// Expected RMS displacement of fingerprinted ideal symbols +-1 from +-1,
/// with the phase walk at its stationary distribution.
double expected_rms_displacement(const DeviceFingerprint& fp);

/// Deterministic synthetic fingerprint for a device. Raw impairments are drawn
/// from a stream keyed by (device_id, calibration_seed) and then scaled so the
/// expected RMS displacement equals `strength`.
DeviceFingerprint make_fingerprint(int device_id, std::uint64_t calibration_seed,
                                   double strength);

/// Repeating byte counter 0, 1, ..., 255, 0, ... unpacked MSB first.
std::vector<std::uint8_t> byte_counter_bits(std::size_t count);

/// Bit 0 -> +amplitude, bit 1 -> -amplitude.
SymbolStream modulate(std::span<const std::uint8_t> bits, const ModulationConfig& cfg);

SymbolStream apply_fingerprint(const SymbolStream& s, const DeviceFingerprint& fp, Rng& rng);

/// Zero-mean samples with standard deviation sigma.
///   Gaussian  N(0, sigma^2)
///   Uniform   U[-sigma sqrt3, +sigma sqrt3]
///   Laplacian scale sigma / sqrt2
///   Impulse   Bernoulli(0.05) x N(0, sigma^2 / 0.05)
///   None      zeros
std::vector<double> sample_noise(NoiseKind kind, double sigma, std::size_t n, Rng& rng);

/// Adds independent noise to I and Q. Identity (no rng draws) when spec is.
SymbolStream inject_noise(const SymbolStream& s, const NoiseSpec& spec, Rng& rng);

/// Unit-energy RRC taps, span * sps + 1 long, symmetric about the centre.
std::vector<double> rrc_taps(const ModulationConfig& cfg);

/// Upsamples by samples_per_symbol and filters with rrc_taps. The output is the
/// full convolution (n*sps + L - 1 samples), so symbol k peaks at sample
/// k*sps + group_delay_samples(cfg).
IQFrame pulse_shape(const SymbolStream& s, const ModulationConfig& cfg);

inline std::size_t group_delay_samples(const ModulationConfig& cfg) {
  return std::size_t(cfg.rrc_span_symbols) * cfg.samples_per_symbol / 2;
}

}  // namespace hideprint::rfchain
