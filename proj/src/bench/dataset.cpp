#include "hideprint/bench/dataset.hpp"

#include <bit>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

#include "hideprint/receiver.hpp"

namespace hideprint::bench {

static_assert(std::endian::native == std::endian::little, "IQ files assume a little-endian host");

namespace {

constexpr std::uint64_t kWirelessPositionTag = 0x57494c;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json fingerprint_json(const rfchain::DeviceFingerprint& fp) {
  return {{"device_id", fp.device_id},
          {"gain_imbalance", fp.gain_imbalance},
          {"quadrature_skew", fp.quadrature_skew},
          {"dc_offset", {fp.dc_offset.real(), fp.dc_offset.imag()}},
          {"static_phase", fp.static_phase},
          {"amam_cubic", fp.amam_cubic},
          {"phase_noise_std", fp.phase_noise_std}};
}

rfchain::DeviceFingerprint fingerprint_from_json(const nlohmann::json& j) {
  rfchain::DeviceFingerprint fp;
  fp.device_id = j.at("device_id").get<int>();
  fp.gain_imbalance = j.at("gain_imbalance").get<double>();
  fp.quadrature_skew = j.at("quadrature_skew").get<double>();
  fp.dc_offset = {j.at("dc_offset").at(0).get<double>(), j.at("dc_offset").at(1).get<double>()};
  fp.static_phase = j.at("static_phase").get<double>();
  fp.amam_cubic = j.at("amam_cubic").get<double>();
  fp.phase_noise_std = j.at("phase_noise_std").get<double>();
  return fp;
}

rfchain::DeviceFingerprint device_fingerprint(const ExperimentConfig& cfg, int device) {
  return rfchain::make_fingerprint(device, cfg.calibration_seed, cfg.fingerprint_strength);
}

}  // namespace

CellKey make_cell(int device, rfchain::NoiseKind kind, double sigma, channel::LinkKind link) {
  CellKey k;
  k.device = device;
  k.noise = sigma == 0.0 ? rfchain::NoiseSpec{} : rfchain::NoiseSpec{kind, sigma};
  k.noise.validate();
  k.link = link;
  return k;
}

std::string cell_name(const CellKey& key) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "d%02d_%s_s%.4f_%s", key.device, std::string(rfchain::to_string(key.noise.kind)).c_str(),
                key.noise.sigma, std::string(channel::to_string(key.link)).c_str());
  return buf;
}

std::uint64_t cell_seed(std::uint64_t base, const CellKey& key) {
  return derive_seed(base, {std::uint64_t(key.device), std::uint64_t(key.noise.kind),
                            std::bit_cast<std::uint64_t>(key.noise.sigma), std::uint64_t(key.link)});
}

std::vector<CellKey> grid_cells(const ExperimentConfig& cfg, channel::LinkKind link) {
  std::vector<CellKey> cells;
  for (int d = 0; d < cfg.devices; ++d) {
    cells.push_back(make_cell(d, rfchain::NoiseKind::None, 0.0, link));
    for (auto kind : cfg.noise_kinds)
      for (double s : cfg.sigmas)
        if (s > 0.0) cells.push_back(make_cell(d, kind, s, link));
  }
  return cells;
}

channel::ChannelConfig channel_for(const ExperimentConfig& cfg, const CellKey& key) {
  channel::ChannelConfig ch;
  if (key.link == channel::LinkKind::Wired) {
    ch = channel::ChannelConfig::wired(cfg.link.snr_db);
  } else {
    Rng position = make_rng(derive_seed(cfg.seed, {kWirelessPositionTag, std::uint64_t(key.device)}));
    ch = channel::ChannelConfig::wireless(position, cfg.link.snr_db);
  }
  ch.attenuation_db = cfg.link.attenuation_db;
  return ch;
}

std::vector<Complex> simulate_cell(const ExperimentConfig& cfg, const CellKey& key, std::size_t symbols) {
  const std::size_t settle = cfg.measurement.settle_symbols;
  Rng rng = make_rng(cell_seed(cfg.seed, key));
  const auto fp = device_fingerprint(cfg, key.device);
  const auto bits = rfchain::byte_counter_bits(symbols + settle + 64);
  auto s = rfchain::modulate(bits, cfg.modulation);
  s = rfchain::apply_fingerprint(s, fp, rng);
  s = rfchain::inject_noise(s, key.noise, rng);
  IQFrame frame = rfchain::pulse_shape(s, cfg.modulation);
  frame = channel::propagate(frame, channel_for(cfg, key), rng);
  const SymbolStream rx = receiver::receive(frame, cfg.modulation, cfg.sync);
  if (rx.size() < settle + symbols)
    throw RuntimeFailure("simulate_cell: receiver returned too few symbols for " + cell_name(key));
  std::vector<Complex> out(rx.symbols.begin() + std::ptrdiff_t(settle),
                           rx.symbols.begin() + std::ptrdiff_t(settle + symbols));
  for (auto& c : out) c = Complex(double(float(c.real())), double(float(c.imag())));
  return out;
}

double link_snr_db(const ExperimentConfig& cfg, int device, const rfchain::NoiseSpec& noise, double snr_db,
                   std::size_t symbols, std::uint64_t seed) {
  Rng tx = make_rng(derive_seed(seed, {0}));
  const auto bits = rfchain::byte_counter_bits(symbols);
  const auto clean = rfchain::apply_fingerprint(rfchain::modulate(bits, cfg.modulation), device_fingerprint(cfg, device), tx);
  Rng injected = make_rng(derive_seed(seed, {1}));
  const auto noisy = rfchain::inject_noise(clean, noise, injected);

  auto ch = channel::ChannelConfig::wired(snr_db);
  ch.attenuation_db = cfg.link.attenuation_db;
  auto quiet = ch;
  quiet.awgn_snr_db.reset();
  Rng awgn = make_rng(derive_seed(seed, {2}));
  Rng unused = make_rng(derive_seed(seed, {2}));
  const IQFrame received = channel::propagate(rfchain::pulse_shape(noisy, cfg.modulation), ch, awgn);
  const IQFrame reference = channel::propagate(rfchain::pulse_shape(clean, cfg.modulation), quiet, unused);
  return channel::measure_snr(received, reference);
}

void write_iq(const std::filesystem::path& path, std::span<const Complex> samples) {
  std::vector<float> buf(2 * samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    buf[2 * i] = float(samples[i].real());
    buf[2 * i + 1] = float(samples[i].imag());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("write_iq: cannot open " + path.string());
  os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  if (!os) throw RuntimeFailure("write_iq: write failed for " + path.string());
}

std::vector<Complex> read_iq(const std::filesystem::path& path, std::optional<std::size_t> expected_samples) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(path, ec);
  if (ec) throw ValidationError("read_iq: cannot stat " + path.string());
  if (bytes % 8) throw ValidationError("read_iq: size of " + path.string() + " is not a multiple of 8 bytes");
  const std::size_t n = bytes / 8;
  if (expected_samples && *expected_samples != n)
    throw ValidationError("read_iq: " + path.string() + " holds " + std::to_string(n) + " samples, sidecar says " +
                          std::to_string(*expected_samples));
  std::vector<float> buf(2 * n);
  std::ifstream is(path, std::ios::binary);
  if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(bytes)))
    throw RuntimeFailure("read_iq: read failed for " + path.string());
  std::vector<Complex> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {buf[2 * i], buf[2 * i + 1]};
  return out;
}

nlohmann::json to_json(const MeasurementRecord& r) {
  return {{"format", "cf32_le"},
          {"file", r.iq_path.filename().string()},
          {"samples", r.samples},
          {"device_id", r.cell.device},
          {"noise_kind", std::string(rfchain::to_string(r.cell.noise.kind))},
          {"sigma", r.cell.noise.sigma},
          {"link", std::string(channel::to_string(r.cell.link))},
          {"sample_rate", r.sample_rate},
          {"seed", r.seed},
          {"created", r.created},
          {"fingerprint", fingerprint_json(r.fingerprint)}};
}

MeasurementRecord read_record(const std::filesystem::path& iq_path) {
  const auto sidecar = std::filesystem::path(iq_path.string() + ".json");
  std::ifstream is(sidecar);
  if (!is) throw ValidationError("read_record: missing sidecar " + sidecar.string());
  MeasurementRecord r;
  try {
    const auto j = nlohmann::json::parse(is);
    r.iq_path = iq_path;
    r.samples = j.at("samples").get<std::size_t>();
    r.cell = make_cell(j.at("device_id").get<int>(), rfchain::noise_kind_from_string(j.at("noise_kind").get<std::string>()),
                       j.at("sigma").get<double>(), channel::link_kind_from_string(j.at("link").get<std::string>()));
    r.sample_rate = j.at("sample_rate").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.created = j.value("created", "");
    r.fingerprint = fingerprint_from_json(j.at("fingerprint"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("read_record: bad sidecar " + sidecar.string() + ": " + e.what());
  }
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(iq_path, ec);
  if (ec) throw ValidationError("read_record: missing IQ file " + iq_path.string());
  if (bytes != 8 * r.samples)
    throw ValidationError("read_record: " + iq_path.string() + " length does not match its sidecar");
  return r;
}

std::vector<MeasurementRecord> generate_dataset(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                                bool quiet) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("generate_dataset: cannot create " + dir.string() + ": " + ec.message());
  const auto cells = grid_cells(cfg, cfg.link.kind);
  std::vector<MeasurementRecord> records(cells.size());
  const std::size_t n = cfg.measurement.symbols_per_cell;
  std::string error;
  std::size_t done = 0;

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      const auto samples = simulate_cell(cfg, cells[i], n);
      MeasurementRecord& r = records[i];
      r.iq_path = dir / (cell_name(cells[i]) + ".cf32");
      r.cell = cells[i];
      r.fingerprint = device_fingerprint(cfg, cells[i].device);
      r.sample_rate = cfg.modulation.symbol_rate;
      r.seed = cell_seed(cfg.seed, cells[i]);
      r.samples = samples.size();
      r.created = utc_now();
      write_iq(r.iq_path, samples);
      std::ofstream os(r.iq_path.string() + ".json");
      os << to_json(r).dump(2) << '\n';
      if (!os) throw RuntimeFailure("generate_dataset: cannot write sidecar for " + r.iq_path.string());
#pragma omp critical(hideprint_generate_progress)
      {
        ++done;
        if (!quiet) std::cerr << "generate: " << done << '/' << cells.size() << ' ' << cell_name(cells[i]) << '\n';
      }
    } catch (const std::exception& e) {
#pragma omp critical(hideprint_generate_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw RuntimeFailure("generate_dataset: " + error);

  nlohmann::json manifest;
  manifest["config"] = to_json(cfg);
  manifest["files"] = nlohmann::json::array();
  for (const auto& r : records) manifest["files"].push_back(r.iq_path.filename().string());
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  if (!os) throw RuntimeFailure("generate_dataset: cannot write manifest");
  return records;
}

CellSource::CellSource(ExperimentConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<Complex> CellSource::load(const CellKey& key, std::size_t symbols) const {
  if (cfg_.dataset_dir.empty()) return simulate_cell(cfg_, key, symbols);
  const auto path = cfg_.dataset_dir / (cell_name(key) + ".cf32");
  if (!std::filesystem::exists(path)) throw RuntimeFailure("missing dataset cell " + path.string());
  const auto rec = read_record(path);
  if (rec.samples < symbols)
    throw RuntimeFailure("dataset cell " + path.string() + " holds " + std::to_string(rec.samples) +
                         " samples, need " + std::to_string(symbols));
  auto samples = read_iq(path, rec.samples);
  samples.resize(symbols);
  return samples;
}

namespace {

std::string cache_key(const CellKey& key, std::size_t n) { return cell_name(key) + '#' + std::to_string(n); }

imaging::ImageMeta meta_of(const CellKey& key) {
  return {key.device, key.noise.kind, key.noise.sigma, key.link};
}

}  // namespace

const std::vector<imaging::FingerprintImage>& CellSource::images(const CellKey& key, std::size_t symbols) {
  const auto k = cache_key(key, symbols);
  auto it = images_.find(k);
  if (it == images_.end()) {
    const auto samples = load(key, symbols);
    it = images_.emplace(k, imaging::images_from_samples(samples, cfg_.imaging, meta_of(key))).first;
  }
  return it->second;
}

const std::vector<std::vector<double>>& CellSource::raw_chunks(const CellKey& key, std::size_t count) {
  const auto k = cache_key(key, count);
  auto it = raw_.find(k);
  if (it == raw_.end()) {
    const std::size_t len = std::size_t(cfg_.rawiq.chunk_symbols);
    const auto samples = load(key, count * len);
    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c < count; ++c)
      rows.push_back(learn::interleave_iq(std::span<const Complex>(samples).subspan(c * len, len)));
    it = raw_.emplace(k, std::move(rows)).first;
  }
  return it->second;
}

void CellSource::prefetch(std::span<const CellKey> keys, std::size_t symbols) {
  std::vector<CellKey> missing;
  for (const auto& key : keys)
    if (!images_.count(cache_key(key, symbols))) missing.push_back(key);
  std::vector<std::vector<imaging::FingerprintImage>> out(missing.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < missing.size(); ++i) {
    try {
      out[i] = imaging::images_from_samples(load(missing[i], symbols), cfg_.imaging, meta_of(missing[i]));
    } catch (const std::exception& e) {
#pragma omp critical(hideprint_prefetch_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw RuntimeFailure(error);
  for (std::size_t i = 0; i < missing.size(); ++i) images_.emplace(cache_key(missing[i], symbols), std::move(out[i]));
}

void add_images(learn::Dataset& data, const std::vector<imaging::FingerprintImage>& images, int label,
                std::uint32_t pixel_cap) {
  for (const auto& im : images) data.add(imaging::normalized_pixels(im, pixel_cap), label);
}

}  // namespace hideprint::bench
