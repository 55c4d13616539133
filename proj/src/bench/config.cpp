#include "hideprint/bench/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

namespace hideprint::bench {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ValidationError("config: section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ValidationError("config: unknown key '" + key + "' in section '" + section + "'");
}

rfchain::ModulationConfig modulation_from_json(const nlohmann::json& j) {
  check_keys(j, {"symbol_rate", "samples_per_symbol", "rrc_rolloff", "rrc_span_symbols", "tx_amplitude", "carrier_hz"},
             "modulation");
  rfchain::ModulationConfig c;
  c.symbol_rate = j.value("symbol_rate", c.symbol_rate);
  c.samples_per_symbol = j.value("samples_per_symbol", c.samples_per_symbol);
  c.rrc_rolloff = j.value("rrc_rolloff", c.rrc_rolloff);
  c.rrc_span_symbols = j.value("rrc_span_symbols", c.rrc_span_symbols);
  c.tx_amplitude = j.value("tx_amplitude", c.tx_amplitude);
  c.carrier_hz = j.value("carrier_hz", c.carrier_hz);
  return c;
}

receiver::SyncConfig sync_from_json(const nlohmann::json& j) {
  check_keys(j, {"agc_target", "agc_rate", "costas_loop_bw", "gardner_loop_bw", "sps_in"}, "sync");
  receiver::SyncConfig c;
  c.agc_target = j.value("agc_target", c.agc_target);
  c.agc_rate = j.value("agc_rate", c.agc_rate);
  c.costas_loop_bw = j.value("costas_loop_bw", c.costas_loop_bw);
  c.gardner_loop_bw = j.value("gardner_loop_bw", c.gardner_loop_bw);
  c.sps_in = j.value("sps_in", c.sps_in);
  return c;
}

imaging::ImagingConfig imaging_from_json(const nlohmann::json& j) {
  check_keys(j, {"chunk_size", "image_side", "lower_q", "upper_q", "pixel_cap"}, "imaging");
  imaging::ImagingConfig c;
  c.chunk_size = j.value("chunk_size", c.chunk_size);
  c.image_side = j.value("image_side", c.image_side);
  c.lower_q = j.value("lower_q", c.lower_q);
  c.upper_q = j.value("upper_q", c.upper_q);
  c.pixel_cap = j.value("pixel_cap", c.pixel_cap);
  return c;
}

ExperimentConfig parse(const nlohmann::json& j) {
  check_keys(j,
             {"devices", "seed", "fingerprint", "noise", "link", "measurement", "modulation", "sync", "imaging",
              "classifier", "rawiq", "autoencoder", "protocol", "output_dir", "dataset_dir"},
             "top level");
  ExperimentConfig c;
  c.devices = j.value("devices", c.devices);
  c.seed = j.value("seed", c.seed);
  if (j.contains("fingerprint")) {
    const auto& f = j.at("fingerprint");
    check_keys(f, {"calibration_seed", "strength"}, "fingerprint");
    c.calibration_seed = f.value("calibration_seed", c.calibration_seed);
    c.fingerprint_strength = f.value("strength", c.fingerprint_strength);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, {"kinds", "sigmas"}, "noise");
    if (n.contains("kinds")) {
      c.noise_kinds.clear();
      for (const auto& k : n.at("kinds")) c.noise_kinds.push_back(rfchain::noise_kind_from_string(k.get<std::string>()));
    }
    c.sigmas = n.value("sigmas", c.sigmas);
  }
  if (j.contains("link")) {
    const auto& l = j.at("link");
    check_keys(l, {"kind", "snr_db", "attenuation_db"}, "link");
    if (l.contains("kind")) c.link.kind = channel::link_kind_from_string(l.at("kind").get<std::string>());
    c.link.snr_db = l.value("snr_db", c.link.snr_db);
    c.link.attenuation_db = l.value("attenuation_db", c.link.attenuation_db);
  }
  if (j.contains("measurement")) {
    const auto& m = j.at("measurement");
    check_keys(m, {"symbols_per_cell", "eval_symbols_per_cell", "settle_symbols"}, "measurement");
    c.measurement.symbols_per_cell = m.value("symbols_per_cell", c.measurement.symbols_per_cell);
    c.measurement.eval_symbols_per_cell = m.value("eval_symbols_per_cell", c.measurement.eval_symbols_per_cell);
    c.measurement.settle_symbols = m.value("settle_symbols", c.measurement.settle_symbols);
  }
  if (j.contains("modulation")) c.modulation = modulation_from_json(j.at("modulation"));
  if (j.contains("sync")) c.sync = sync_from_json(j.at("sync"));
  if (j.contains("imaging")) c.imaging = imaging_from_json(j.at("imaging"));
  if (j.contains("classifier")) c.classifier = learn::classifier_config_from_json(j.at("classifier"));
  if (j.contains("rawiq")) {
    nlohmann::json r = j.at("rawiq");
    if (r.is_object() && r.contains("chunks_per_cell")) {
      c.rawiq_chunks_per_cell = r.at("chunks_per_cell").get<std::size_t>();
      r.erase("chunks_per_cell");
    }
    c.rawiq = learn::rawiq_config_from_json(r);
  }
  if (j.contains("autoencoder")) c.autoencoder = learn::autoencoder_config_from_json(j.at("autoencoder"));
  if (j.contains("protocol")) {
    const auto& p = j.at("protocol");
    check_keys(p, {"schedule", "iterations", "slots_per_iteration", "vote_window", "adversary", "p", "deltas", "w_max"},
               "protocol");
    if (p.contains("schedule")) c.protocol.schedule = protocol::schedule_from_json(p.at("schedule"));
    c.protocol.iterations = p.value("iterations", c.protocol.iterations);
    c.protocol.slots_per_iteration = p.value("slots_per_iteration", c.protocol.slots_per_iteration);
    c.protocol.vote_window = p.value("vote_window", c.protocol.vote_window);
    if (p.contains("adversary"))
      c.protocol.adversary = protocol::adversary_mode_from_string(p.at("adversary").get<std::string>());
    c.protocol.p = p.value("p", c.protocol.p);
    c.protocol.deltas = p.value("deltas", c.protocol.deltas);
    c.protocol.w_max = p.value("w_max", c.protocol.w_max);
  }
  c.output_dir = j.value("output_dir", c.output_dir.string());
  c.dataset_dir = j.value("dataset_dir", c.dataset_dir.string());
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (devices < 2) throw ValidationError("config: devices must be >= 2");
  if (!(fingerprint_strength > 0.0)) throw ValidationError("config: fingerprint strength must be > 0");
  if (noise_kinds.empty()) throw ValidationError("config: need at least one noise kind");
  for (auto k : noise_kinds)
    if (k == rfchain::NoiseKind::None) throw ValidationError("config: 'none' is implied by sigma 0, not a noise kind");
  if (sigmas.empty() || sigmas.front() != 0.0) throw ValidationError("config: the sigma grid must start at 0");
  for (std::size_t i = 1; i < sigmas.size(); ++i)
    if (!(sigmas[i] > sigmas[i - 1])) throw ValidationError("config: sigmas must be strictly increasing");
  if (!(link.attenuation_db >= 0.0)) throw ValidationError("config: attenuation_db must be >= 0");
  if (!std::isfinite(link.snr_db)) throw ValidationError("config: snr_db must be finite");
  if (measurement.symbols_per_cell < imaging.chunk_size || measurement.eval_symbols_per_cell < imaging.chunk_size)
    throw ValidationError("config: a cell must hold at least one image chunk");
  modulation.validate();
  sync.validate();
  imaging.validate();
  classifier.validate();
  if (classifier.input_side != imaging.image_side)
    throw ValidationError("config: classifier input_side must equal imaging image_side");
  if (classifier.num_classes != devices) throw ValidationError("config: classifier num_classes must equal devices");
  rawiq.validate();
  if (rawiq.num_classes != devices) throw ValidationError("config: rawiq num_classes must equal devices");
  if (rawiq_chunks_per_cell < 5) throw ValidationError("config: rawiq chunks_per_cell must be >= 5");
  if (rawiq_chunks_per_cell * std::size_t(rawiq.chunk_symbols) > measurement.symbols_per_cell)
    throw ValidationError("config: rawiq chunks do not fit into symbols_per_cell");
  autoencoder.validate();
  if (autoencoder.input_size != imaging.image_side * imaging.image_side)
    throw ValidationError("config: autoencoder input_size must equal image_side^2");
  protocol.schedule.validate();
  for (double s : protocol.schedule.level_map)
    if (std::find(sigmas.begin(), sigmas.end(), s) == sigmas.end())
      throw ValidationError("config: every schedule level must be on the sigma grid");
  if (protocol.iterations < 1 || protocol.slots_per_iteration < 1 || protocol.vote_window < 1)
    throw ValidationError("config: protocol iterations, slots and vote window must be >= 1");
  if (!(protocol.p >= 0.0 && protocol.p <= 1.0)) throw ValidationError("config: protocol p must be in [0, 1]");
  for (double d : protocol.deltas)
    if (!(protocol.p - d >= 0.0 && protocol.p - d <= 1.0))
      throw ValidationError("config: protocol p - delta must be in [0, 1]");
  if (protocol.w_max < 1) throw ValidationError("config: protocol w_max must be >= 1");
  if (output_dir.empty()) throw ValidationError("config: output_dir must not be empty");
}

nlohmann::json to_json(const rfchain::ModulationConfig& c) {
  return {{"symbol_rate", c.symbol_rate},   {"samples_per_symbol", c.samples_per_symbol},
          {"rrc_rolloff", c.rrc_rolloff},   {"rrc_span_symbols", c.rrc_span_symbols},
          {"tx_amplitude", c.tx_amplitude}, {"carrier_hz", c.carrier_hz}};
}

nlohmann::json to_json(const receiver::SyncConfig& c) {
  return {{"agc_target", c.agc_target},
          {"agc_rate", c.agc_rate},
          {"costas_loop_bw", c.costas_loop_bw},
          {"gardner_loop_bw", c.gardner_loop_bw},
          {"sps_in", c.sps_in}};
}

nlohmann::json to_json(const imaging::ImagingConfig& c) {
  return {{"chunk_size", c.chunk_size}, {"image_side", c.image_side}, {"lower_q", c.lower_q},
          {"upper_q", c.upper_q},       {"pixel_cap", c.pixel_cap}};
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : c.noise_kinds) kinds.push_back(std::string(rfchain::to_string(k)));
  nlohmann::json rawiq = learn::to_json(c.rawiq);
  rawiq["chunks_per_cell"] = c.rawiq_chunks_per_cell;
  return {
      {"devices", c.devices},
      {"seed", c.seed},
      {"fingerprint", {{"calibration_seed", c.calibration_seed}, {"strength", c.fingerprint_strength}}},
      {"noise", {{"kinds", kinds}, {"sigmas", c.sigmas}}},
      {"link",
       {{"kind", std::string(channel::to_string(c.link.kind))},
        {"snr_db", c.link.snr_db},
        {"attenuation_db", c.link.attenuation_db}}},
      {"measurement",
       {{"symbols_per_cell", c.measurement.symbols_per_cell},
        {"eval_symbols_per_cell", c.measurement.eval_symbols_per_cell},
        {"settle_symbols", c.measurement.settle_symbols}}},
      {"modulation", to_json(c.modulation)},
      {"sync", to_json(c.sync)},
      {"imaging", to_json(c.imaging)},
      {"classifier", learn::to_json(c.classifier)},
      {"rawiq", rawiq},
      {"autoencoder", learn::to_json(c.autoencoder)},
      {"protocol",
       {{"schedule", protocol::to_json(c.protocol.schedule)},
        {"iterations", c.protocol.iterations},
        {"slots_per_iteration", c.protocol.slots_per_iteration},
        {"vote_window", c.protocol.vote_window},
        {"adversary", protocol::to_string(c.protocol.adversary)},
        {"p", c.protocol.p},
        {"deltas", c.protocol.deltas},
        {"w_max", c.protocol.w_max}}},
      {"output_dir", c.output_dir.string()},
      {"dataset_dir", c.dataset_dir.string()},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c = parse(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config: " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  apply_seed_override(c);
  return c;
}

bool apply_seed_override(ExperimentConfig& cfg) {
  const char* env = std::getenv(kSeedEnv);
  if (!env || !*env) return false;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-')
    throw ValidationError(std::string(kSeedEnv) + " must be an unsigned 64-bit integer");
  cfg.seed = v;
  return true;
}

}  // namespace hideprint::bench
