#pragma once

// Experiment configuration: one JSON document with nested sections. Every
// report embeds the echo produced by to_json so the run can be regenerated.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hideprint/channel.hpp"
#include "hideprint/imaging.hpp"
#include "hideprint/learn/autoencoder.hpp"
#include "hideprint/learn/classifier.hpp"
#include "hideprint/protocol.hpp"
#include "hideprint/receiver.hpp"
#include "hideprint/rfchain.hpp"
#include "json.hpp"

namespace hideprint::bench {

struct LinkConfig {
  channel::LinkKind kind = channel::LinkKind::Wired;
  double snr_db = 40.0;           // AWGN on the classification links
  double attenuation_db = 30.0;
};

struct MeasurementConfig {
  std::size_t symbols_per_cell = 2'000'000;       // cells used for training
  std::size_t eval_symbols_per_cell = 2'000'000;  // cells only ever tested on
  std::size_t settle_symbols = 2'500;             // receiver transient, discarded
};

struct ProtocolConfig {
  protocol::DisclosureSchedule schedule{{'h', 'i', 'd', 'e', 'p', 'r', 'i', 'n', 't', '-', 'k', 'e', 'y'}};
  int iterations = 100;
  int slots_per_iteration = 300;
  int vote_window = 1;
  protocol::AdversaryMode adversary = protocol::AdversaryMode::NoiseFree;
  double p = 0.96;
  std::vector<double> deltas{0.1, 0.2, 0.3, 0.4, 0.5};
  int w_max = 15;
};

struct ExperimentConfig {
  int devices = 10;
  std::uint64_t seed = 1;
  std::uint64_t calibration_seed = 7;
  double fingerprint_strength = 0.04;
  std::vector<rfchain::NoiseKind> noise_kinds{rfchain::NoiseKind::Gaussian, rfchain::NoiseKind::Impulse,
                                              rfchain::NoiseKind::Laplacian, rfchain::NoiseKind::Uniform};
  std::vector<double> sigmas{0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
  LinkConfig link;
  MeasurementConfig measurement;
  rfchain::ModulationConfig modulation;
  receiver::SyncConfig sync;
  imaging::ImagingConfig imaging;
  learn::ClassifierConfig classifier;
  learn::RawIqConfig rawiq;
  std::size_t rawiq_chunks_per_cell = 40;
  learn::AutoencoderConfig autoencoder;
  ProtocolConfig protocol;
  std::filesystem::path output_dir = "hideprint-out";
  std::filesystem::path dataset_dir;  // empty: simulate cells inline

  void validate() const;
};

/// Seed override read by load_config and the CLI.
inline constexpr const char* kSeedEnv = "HIDEPRINT_SEED";

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys and bad types raise
/// ValidationError.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Reads and validates a config file, then applies HIDEPRINT_SEED if set.
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies HIDEPRINT_SEED when set; returns true if it did.
bool apply_seed_override(ExperimentConfig& cfg);

nlohmann::json to_json(const rfchain::ModulationConfig& c);
nlohmann::json to_json(const receiver::SyncConfig& c);
nlohmann::json to_json(const imaging::ImagingConfig& c);

}  // namespace hideprint::bench
