#pragma once

// Measurement cells: one (device, noise, link) combination simulated end to
// end and stored as received symbols. Files are interleaved little-endian
// float32 I,Q pairs with a JSON sidecar (<file>.json).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hideprint/bench/config.hpp"
#include "hideprint/imaging.hpp"
#include "hideprint/learn/model.hpp"

namespace hideprint::bench {

struct CellKey {
  int device = 0;
  rfchain::NoiseSpec noise;  // sigma 0 is always stored as kind None
  channel::LinkKind link = channel::LinkKind::Wired;
};

/// Normalises sigma 0 to NoiseKind::None so every kind shares the clean cell.
CellKey make_cell(int device, rfchain::NoiseKind kind, double sigma, channel::LinkKind link);

/// e.g. "d03_gaussian_s0.0100_wired".
std::string cell_name(const CellKey& key);
std::uint64_t cell_seed(std::uint64_t base, const CellKey& key);

/// The cells of the configured grid on `link`: the clean cell once per
/// device, then every (kind, sigma > 0).
std::vector<CellKey> grid_cells(const ExperimentConfig& cfg, channel::LinkKind link);

/// Channel of a cell. Wireless links get one multipath realization per device
/// (its position); fading drift and AWGN come from the cell's own stream.
channel::ChannelConfig channel_for(const ExperimentConfig& cfg, const CellKey& key);

/// Byte-counter BPSK through fingerprint, noise, pulse shaping, channel and
/// receiver. Returns `symbols` received symbols after the settling transient,
/// rounded to float32 precision (the file format).
std::vector<Complex> simulate_cell(const ExperimentConfig& cfg, const CellKey& key, std::size_t symbols);

/// SNR of the received frame against its noiseless counterpart (same channel
/// and AWGN draw without the injected noise), over `symbols` symbols.
double link_snr_db(const ExperimentConfig& cfg, int device, const rfchain::NoiseSpec& noise, double snr_db,
                   std::size_t symbols, std::uint64_t seed);

struct MeasurementRecord {
  std::filesystem::path iq_path;
  CellKey cell;
  rfchain::DeviceFingerprint fingerprint;
  double sample_rate = 0.0;  // received symbols: one sample per symbol
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::string created;       // UTC, ISO 8601
};

void write_iq(const std::filesystem::path& path, std::span<const Complex> samples);
/// Throws ValidationError when the file size is not a multiple of 8 or does
/// not match `expected_samples`.
std::vector<Complex> read_iq(const std::filesystem::path& path,
                             std::optional<std::size_t> expected_samples = std::nullopt);

nlohmann::json to_json(const MeasurementRecord& r);
/// Reads <iq_path>.json and checks it against the IQ file length.
MeasurementRecord read_record(const std::filesystem::path& iq_path);

/// One file per grid cell on cfg.link.kind into `dir` plus manifest.json.
std::vector<MeasurementRecord> generate_dataset(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                                bool quiet = true);

/// Images and raw-IQ rows per cell, simulated on demand (or read from
/// cfg.dataset_dir) and cached.
class CellSource {
 public:
  explicit CellSource(ExperimentConfig cfg);

  const std::vector<imaging::FingerprintImage>& images(const CellKey& key, std::size_t symbols);
  /// First `count` chunks of rawiq.chunk_symbols symbols as interleaved rows.
  const std::vector<std::vector<double>>& raw_chunks(const CellKey& key, std::size_t count);
  /// Fills the image cache for all keys, in parallel over cells.
  void prefetch(std::span<const CellKey> keys, std::size_t symbols);

  const ExperimentConfig& config() const { return cfg_; }

 private:
  std::vector<Complex> load(const CellKey& key, std::size_t symbols) const;

  ExperimentConfig cfg_;
  std::map<std::string, std::vector<imaging::FingerprintImage>> images_;
  std::map<std::string, std::vector<std::vector<double>>> raw_;
};

/// Appends normalised pixels of every image with `label`.
void add_images(learn::Dataset& data, const std::vector<imaging::FingerprintImage>& images, int label,
                std::uint32_t pixel_cap);

}  // namespace hideprint::bench
