#pragma once

// Receiver chain: AGC -> Costas carrier recovery -> RRC matched filter ->
// Gardner symbol synchronisation, plus bit demapping and BER against the
// known transmitted sequence.

#include <cstdint>
#include <span>
#include <vector>

#include "hideprint/common.hpp"
#include "hideprint/rfchain.hpp"

namespace hideprint::receiver {

struct SyncConfig {
  double agc_target = 1.0;
  double agc_rate = 1e-4;        // log-gain step per sample per unit relative error
  double costas_loop_bw = 0.01;  // normalised to the sample rate
  double gardner_loop_bw = 0.005;  // normalised to the symbol rate
  int sps_in = 2;                // samples per symbol handed to the Gardner loop

  void validate() const;
};

/// Feedback AGC with a log-domain gain. The initial gain is set from the mean
/// amplitude of the first 256 samples.
IQFrame agc(const IQFrame& frame, const SyncConfig& cfg);

/// Samples needed for the AGC to bring a relative amplitude error `ratio`
/// (output/target right after a step) back within `tol`.
std::size_t agc_settling_samples(double ratio, const SyncConfig& cfg, double tol = 0.02);

/// Second-order BPSK Costas loop (I*Q detector). Deterministic; locks modulo pi.
IQFrame costas_bpsk(const IQFrame& frame, const SyncConfig& cfg);

/// Full convolution with the transmit RRC taps, at the input rate.
IQFrame matched_filter(const IQFrame& frame, const rfchain::ModulationConfig& cfg);

/// Symbols a Gardner loop needs before its timing estimate is trusted.
std::size_t gardner_settling_symbols(const SyncConfig& cfg);

struct GardnerTrace {
  SymbolStream symbols;
  std::vector<double> strobe_times;  // input-sample time of each output symbol
};

/// Gardner timing recovery with a 128-phase windowed-sinc interpolator bank.
/// Input at cfg.sps_in samples per symbol; the first strobe is at sample 0.
GardnerTrace gardner_sync_traced(const IQFrame& frame, const SyncConfig& cfg);
SymbolStream gardner_sync(const IQFrame& frame, const SyncConfig& cfg);

/// Complete chain from received samples (at modulation sample rate) to symbols.
SymbolStream receive(const IQFrame& frame, const rfchain::ModulationConfig& mod,
                     const SyncConfig& sync);

struct BerResult {
  double ber = 0.0;
  std::size_t lag = 0;       // reference index of symbols[0]
  bool inverted = false;     // BPSK pi ambiguity resolved by flipping
  double correlation = 0.0;  // normalised |correlation| at the chosen lag
};

/// Demaps (Re < 0 -> 1) and aligns against a cyclic reference bit sequence.
/// The lag and polarity maximising |correlation| over the first 4096 symbols
/// are used; throws RuntimeFailure when that correlation is below 0.5.
BerResult demap_and_ber_detailed(const SymbolStream& symbols,
                                 std::span<const std::uint8_t> reference_bits);
double demap_and_ber(const SymbolStream& symbols, std::span<const std::uint8_t> reference_bits);

}  // namespace hideprint::receiver
