#pragma once

#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "hideprint/common.hpp"

namespace hideprint::channel {

enum class LinkKind { Wired, Wireless };

std::string_view to_string(LinkKind kind);
LinkKind link_kind_from_string(std::string_view name);

struct MultipathTap {
  double delay_samples = 0.0;  // may be fractional
  Complex gain{1.0, 0.0};
};

struct ChannelConfig {
  LinkKind kind = LinkKind::Wired;
  double attenuation_db = 30.0;
  std::optional<double> awgn_snr_db;  // relative to post-attenuation signal power; nullopt = off
  double cfo_hz = 0.0;
  double phase_offset = 0.0;          // radians
  std::vector<MultipathTap> multipath_taps;
  double fading_coherence = 0.0;      // samples; 0 keeps tap gains static

  /// Cable plus attenuator.
  static ChannelConfig wired(std::optional<double> snr_db = std::nullopt);
  /// LOS tap plus two delayed taps at -10 dB and -15 dB with random phases,
  /// 200 Hz CFO and slowly drifting gains.
  static ChannelConfig wireless(Rng& rng, std::optional<double> snr_db = 25.0);
  /// Attenuation 0, no taps, no noise, no rotation: propagate is the identity.
  static ChannelConfig identity();

  void validate() const;
};

/// Scales taps to unit total energy.
std::vector<MultipathTap> normalized_taps(std::vector<MultipathTap> taps);

/// Adds `offset` samples of delay to every tap (a single unit tap when the list
/// is empty).
std::vector<MultipathTap> delayed_taps(std::vector<MultipathTap> taps, double offset);

/// Attenuation, tapped-delay-line fading, carrier offset and static phase, then
/// AWGN. The output has as many samples as the input; delayed taps push energy
/// past the end of the frame, which is dropped.
IQFrame propagate(const IQFrame& frame, const ChannelConfig& cfg, Rng& rng);

/// Returned by measure_snr when received equals the reference exactly.
inline constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

/// 10 log10(P_reference / P_(received - reference)) for aligned frames.
double measure_snr(const IQFrame& received, const IQFrame& reference_clean);

/// Closed-form SNR loss from adding per-axis noise sigma on top of a channel
/// noise power `channel_noise_power` (relative to the same reference).
double analytic_snr_drop_db(double sigma, double channel_noise_power);

}  // namespace hideprint::channel
