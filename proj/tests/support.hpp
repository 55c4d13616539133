#pragma once

// Shared helpers for the test binaries.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hideprint/channel.hpp"
#include "hideprint/receiver.hpp"
#include "hideprint/rfchain.hpp"

namespace hideprint::testing {

struct LinkRun {
  double ber = 1.0;
  std::size_t bits = 0;
  bool inverted = false;
};

struct LinkSetup {
  rfchain::NoiseSpec noise;
  double snr_db = 20.0;
  double cfo_hz = 0.0;
  double timing_offset_symbols = 0.0;
  double phase_offset = 0.0;
  std::size_t symbols = 110'000;
  std::size_t settle = 2500;
  std::uint64_t seed = 1;
  double strength = 0.04;
};

// modulate -> fingerprint -> inject -> shape -> channel -> receive -> BER
// against the cyclic byte counter, after dropping the loop transients.
inline LinkRun run_link(const LinkSetup& s) {
  rfchain::ModulationConfig mod;
  receiver::SyncConfig sync;
  Rng rng = make_rng(s.seed);
  const auto bits = rfchain::byte_counter_bits(s.symbols);
  const auto fp = rfchain::make_fingerprint(0, 7, s.strength);
  auto sym = rfchain::apply_fingerprint(rfchain::modulate(bits, mod), fp, rng);
  sym = rfchain::inject_noise(sym, s.noise, rng);

  channel::ChannelConfig ch;
  ch.kind = channel::LinkKind::Wireless;
  ch.multipath_taps = channel::delayed_taps({}, s.timing_offset_symbols * mod.samples_per_symbol);
  ch.awgn_snr_db = s.snr_db;
  ch.cfo_hz = s.cfo_hz;
  ch.phase_offset = s.phase_offset;
  const auto rx = channel::propagate(rfchain::pulse_shape(sym, mod), ch, rng);
  const auto out = receiver::receive(rx, mod, sync);

  SymbolStream kept;
  const std::size_t tail = 16;
  if (out.size() > s.settle + tail)
    kept.symbols.assign(out.symbols.begin() + long(s.settle), out.symbols.end() - long(tail));
  const auto r = receiver::demap_and_ber_detailed(kept, rfchain::byte_counter_bits(2048));
  return {r.ber, kept.size(), r.inverted};
}

}  // namespace hideprint::testing
