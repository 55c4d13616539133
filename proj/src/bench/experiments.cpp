#include "hideprint/bench/experiments.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

namespace hideprint::bench {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kSplitTag = 0x5350;
constexpr std::uint64_t kModelTag = 0x4d4f;
constexpr std::uint64_t kAllSamplesTag = 0x414c;
constexpr std::uint64_t kSnrTag = 0x534e;
constexpr std::uint64_t kAutoencoderTag = 0x4145;
constexpr std::uint64_t kRocTag = 0x524f;
constexpr std::uint64_t kRawTag = 0x5251;
constexpr std::uint64_t kDisclosureTag = 0x4453;

constexpr double kRandomGuessBound = 0.2;
constexpr std::size_t kSnrSymbols = 100'000;

std::uint64_t sigma_bits(double s) { return std::bit_cast<std::uint64_t>(s); }

rfchain::NoiseKind primary_kind(const ExperimentConfig& cfg) {
  const auto& k = cfg.noise_kinds;
  return std::find(k.begin(), k.end(), rfchain::NoiseKind::Gaussian) != k.end() ? rfchain::NoiseKind::Gaussian
                                                                                 : k.front();
}

std::vector<CellKey> level_cells(const ExperimentConfig& cfg, rfchain::NoiseKind kind, double sigma,
                                 channel::LinkKind link) {
  std::vector<CellKey> keys;
  for (int d = 0; d < cfg.devices; ++d) keys.push_back(make_cell(d, kind, sigma, link));
  return keys;
}

ImageSplit level_split(const ExperimentConfig& cfg, CellSource& cells, rfchain::NoiseKind kind, double sigma,
                       channel::LinkKind link) {
  const auto keys = level_cells(cfg, kind, sigma, link);
  return split_images(cells, keys, cfg.measurement.symbols_per_cell,
                      derive_seed(cfg.seed, {kSplitTag, std::uint64_t(link), sigma_bits(sigma)}));
}

std::uint64_t level_model_seed(const ExperimentConfig& cfg, double sigma, channel::LinkKind link) {
  return derive_seed(cfg.seed, {kModelTag, std::uint64_t(link), sigma_bits(sigma)});
}

learn::Dataset cell_dataset(const ExperimentConfig& cfg, CellSource& cells, const CellKey& key, std::size_t symbols) {
  learn::Dataset d;
  add_images(d, cells.images(key, symbols), key.device, cfg.imaging.pixel_cap);
  return d;
}

void append(learn::Dataset& into, const learn::Dataset& from) {
  for (std::size_t i = 0; i < from.size(); ++i) into.add(from.row(i), from.y[i]);
}

learn::Dataset rows_with_label(const learn::Dataset& data, int label) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.y[i] == label) rows.push_back(i);
  return data.subset(rows);
}

void note(bool quiet, const std::string& msg) {
  if (!quiet) std::cerr << "[hideprint] " << msg << '\n';
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("cannot open " + path.string());
  os.precision(10);
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw RuntimeFailure("write failed for " + path.string());
}

nlohmann::json training_json(const learn::TrainResult& r) {
  return {{"epochs", r.epochs},
          {"early_stopped", r.early_stopped},
          {"final_validation_accuracy", r.validation_accuracy.empty() ? 0.0 : r.validation_accuracy.back()}};
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

ImageSplit split_images(CellSource& cells, std::span<const CellKey> keys, std::size_t symbols, std::uint64_t seed) {
  const auto& cfg = cells.config();
  learn::Dataset all;
  for (const auto& k : keys) add_images(all, cells.images(k, symbols), k.device, cfg.imaging.pixel_cap);
  Rng rng = make_rng(seed);
  const std::vector<double> fractions{0.6, 0.2, 0.2};
  const auto parts = learn::stratified_split(all, fractions, rng);
  return {all.subset(parts[0]), all.subset(parts[1]), all.subset(parts[2])};
}

TrainedClassifier train_image_classifier(const ExperimentConfig& cfg, const learn::Dataset& train,
                                         const learn::Dataset& validation, std::uint64_t seed) {
  TrainedClassifier t;
  t.seed = seed;
  Rng rng = make_rng(seed);
  t.model = std::make_unique<learn::ImageClassifier>(cfg.classifier, rng);
  t.training = learn::train_classifier(*t.model, train, validation, cfg.classifier.train, rng);
  return t;
}

SigmaSweep accuracy_vs_sigma(const ExperimentConfig& cfg, CellSource& cells, channel::LinkKind link,
                             std::span<const rfchain::NoiseKind> kinds, bool measure_snr) {
  if (kinds.empty()) throw ValidationError("accuracy_vs_sigma: no noise kinds");
  const auto clean = level_cells(cfg, rfchain::NoiseKind::None, 0.0, link);
  std::vector<CellKey> noisy;
  for (auto kind : kinds)
    for (double s : cfg.sigmas)
      if (s > 0.0)
        for (const auto& k : level_cells(cfg, kind, s, link)) noisy.push_back(k);
  cells.prefetch(clean, cfg.measurement.symbols_per_cell);
  cells.prefetch(noisy, cfg.measurement.eval_symbols_per_cell);

  SigmaSweep out;
  out.link = link;
  const ImageSplit split = level_split(cfg, cells, rfchain::NoiseKind::None, 0.0, link);
  auto trained = train_image_classifier(cfg, split.train, split.validation, level_model_seed(cfg, 0.0, link));
  out.training = trained.training;
  const auto& model = *trained.model;
  out.clean_report = learn::evaluate(split.test.y, model.classify(split.test), cfg.devices);

  const std::uint64_t snr_seed = derive_seed(cfg.seed, {kSnrTag});
  auto snr_of = [&](const rfchain::NoiseSpec& spec) {
    return measure_snr ? link_snr_db(cfg, 0, spec, cfg.link.snr_db, kSnrSymbols, snr_seed)
                       : std::numeric_limits<double>::quiet_NaN();
  };
  const double clean_snr = snr_of({});

  learn::Dataset largest;  // images at the largest sigma of the first kind, for the projection
  for (auto kind : kinds) {
    out.first_sigma_below[kind] = std::nullopt;
    for (double s : cfg.sigmas) {
      SigmaRow row;
      row.kind = kind;
      row.sigma = s;
      if (s == 0.0) {
        row.accuracy = out.clean_report.accuracy;
        row.snr_db = clean_snr;
        row.images = split.test.size();
      } else {
        learn::Dataset test;
        for (const auto& k : level_cells(cfg, kind, s, link))
          append(test, cell_dataset(cfg, cells, k, cfg.measurement.eval_symbols_per_cell));
        row.accuracy = model.accuracy(test);
        row.snr_db = snr_of({kind, s});
        row.images = test.size();
        if (kind == kinds.front() && s == cfg.sigmas.back()) largest = std::move(test);
      }
      if (row.accuracy < kRandomGuessBound && !out.first_sigma_below[kind]) out.first_sigma_below[kind] = s;
      out.rows.push_back(row);
    }
  }

  // Hidden-layer features of clean test images and of the largest sigma.
  learn::Dataset proj = split.test;
  std::vector<double> proj_sigma(split.test.size(), 0.0);
  if (largest.size()) {
    append(proj, largest);
    proj_sigma.resize(proj.size(), cfg.sigmas.back());
  }
  if (proj.size() >= 3) {
    std::vector<std::size_t> rows(proj.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    const auto features = model.embed(proj, rows);
    const std::size_t width = features.size() / proj.size();
    out.projection = learn::pca_project(features, proj.size(), width);
    out.projection_device = proj.y;
    out.projection_sigma = proj_sigma;
    for (double s : std::set<double>(proj_sigma.begin(), proj_sigma.end())) {
      learn::Projection2d sub;
      std::vector<int> labels;
      for (std::size_t i = 0; i < proj.size(); ++i)
        if (proj_sigma[i] == s) {
          sub.x.push_back(out.projection.x[i]);
          sub.y.push_back(out.projection.y[i]);
          labels.push_back(proj.y[i]);
        }
      if (labels.size() >= 2) out.silhouette[s] = learn::silhouette(sub, labels);
    }
  }
  return out;
}

AllSamplesStudy all_samples_study(const ExperimentConfig& cfg, CellSource& cells) {
  const auto kind = primary_kind(cfg);
  const auto link = cfg.link.kind;
  std::vector<CellKey> keys;
  for (double s : cfg.sigmas)
    for (const auto& k : level_cells(cfg, kind, s, link)) keys.push_back(k);
  cells.prefetch(keys, cfg.measurement.symbols_per_cell);

  std::vector<ImageSplit> splits;
  learn::Dataset train, validation;
  for (double s : cfg.sigmas) {
    splits.push_back(level_split(cfg, cells, kind, s, link));
    append(train, splits.back().train);
    append(validation, splits.back().validation);
  }
  auto trained = train_image_classifier(cfg, train, validation, derive_seed(cfg.seed, {kAllSamplesTag, std::uint64_t(link)}));
  AllSamplesStudy out;
  out.training = trained.training;
  std::vector<int> truth, pred;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const auto p = trained.model->classify(splits[i].test);
    std::size_t hit = 0;
    for (std::size_t r = 0; r < p.size(); ++r) hit += p[r] == splits[i].test.y[r];
    out.rows.push_back({kind, cfg.sigmas[i], double(hit) / double(p.size()),
                        std::numeric_limits<double>::quiet_NaN(), p.size()});
    truth.insert(truth.end(), splits[i].test.y.begin(), splits[i].test.y.end());
    pred.insert(pred.end(), p.begin(), p.end());
  }
  out.report = learn::evaluate(truth, pred, cfg.devices);
  return out;
}

AutoencoderStudy autoencoder_study(const ExperimentConfig& cfg, CellSource& cells) {
  const auto kind = primary_kind(cfg);
  const auto link = cfg.link.kind;
  const std::size_t n = cfg.measurement.symbols_per_cell;
  std::vector<CellKey> keys;
  for (double s : cfg.sigmas)
    for (const auto& k : level_cells(cfg, kind, s, link)) keys.push_back(k);
  cells.prefetch(keys, n);

  const ImageSplit clean = level_split(cfg, cells, rfchain::NoiseKind::None, 0.0, link);
  // Test sets per (device, sigma): held-out clean images for the device
  // itself are filled in per target below.
  std::vector<std::vector<learn::Dataset>> by_cell(static_cast<std::size_t>(cfg.devices));
  for (int d = 0; d < cfg.devices; ++d)
    for (double s : cfg.sigmas) by_cell[std::size_t(d)].push_back(cell_dataset(cfg, cells, make_cell(d, kind, s, link), n));

  AutoencoderStudy out;
  std::size_t fp_total = 0;
  for (int target = 0; target < cfg.devices; ++target) {
    const auto train = rows_with_label(clean.train, target);
    const auto validation = rows_with_label(clean.validation, target);
    const auto held_out = rows_with_label(clean.test, target);
    Rng rng = make_rng(derive_seed(cfg.seed, {kAutoencoderTag, std::uint64_t(target)}));
    learn::SparseAutoencoder ae(cfg.autoencoder, rng);
    const auto trained = learn::train_autoencoder(ae, train, validation, rng);
    const double tau = trained.threshold.tau;
    out.thresholds.push_back(trained.threshold);

    std::size_t others = 0, accepted = 0, flagged_own = 0;
    for (int dev = 0; dev < cfg.devices; ++dev)
      for (std::size_t si = 0; si < cfg.sigmas.size(); ++si) {
        const bool own_clean = dev == target && cfg.sigmas[si] == 0.0;
        const learn::Dataset& test = own_clean ? held_out : by_cell[std::size_t(dev)][si];
        const auto mse = ae.reconstruction_mse(test);
        AutoencoderRow row{target, dev, cfg.sigmas[si], 0.0, tau, 0.0, mse.size()};
        std::size_t anomalies = 0;
        for (double m : mse) {
          row.mean_mse += m / double(mse.size());
          anomalies += !(m < tau);
        }
        row.anomaly_rate = double(anomalies) / double(mse.size());
        if (own_clean) {
          flagged_own = anomalies;
        } else {
          others += mse.size();
          accepted += mse.size() - anomalies;
        }
        out.rows.push_back(row);
      }
    out.false_positive_ratio.push_back(double(flagged_own) / double(held_out.size()));
    out.false_negative_ratio.push_back(double(accepted) / double(others));
    fp_total += flagged_own;
    out.held_out_images += held_out.size();
  }
  out.pooled_false_positive_ratio = double(fp_total) / double(out.held_out_images);
  return out;
}

RocStudy roc_study(const ExperimentConfig& cfg, CellSource& cells) {
  const auto kind = primary_kind(cfg);
  const auto link = cfg.link.kind;
  const std::size_t n = cfg.measurement.symbols_per_cell;
  RocStudy out;
  for (int i = 0; i <= 100; ++i) out.fpr_grid.push_back(i / 100.0);
  for (double s : cfg.sigmas) {
    const auto keys = level_cells(cfg, kind, s, link);
    cells.prefetch(keys, n);
    const ImageSplit split = level_split(cfg, cells, kind, s, link);
    std::vector<double> tpr_sum(out.fpr_grid.size(), 0.0);
    double auc_sum = 0.0;
    for (int target = 0; target < cfg.devices; ++target) {
      Rng rng = make_rng(derive_seed(cfg.seed, {kRocTag, sigma_bits(s), std::uint64_t(target)}));
      learn::SparseAutoencoder ae(cfg.autoencoder, rng);
      learn::train_autoencoder(ae, rows_with_label(split.train, target), rows_with_label(split.validation, target), rng);
      std::vector<double> scores = ae.reconstruction_mse(rows_with_label(split.test, target));
      std::vector<char> positive(scores.size(), 0);
      for (int dev = 0; dev < cfg.devices; ++dev) {
        if (dev == target) continue;
        const auto mse = ae.reconstruction_mse(cell_dataset(cfg, cells, keys[std::size_t(dev)], n));
        scores.insert(scores.end(), mse.begin(), mse.end());
        positive.insert(positive.end(), mse.size(), 1);
      }
      std::vector<bool> pos(positive.begin(), positive.end());
      std::unique_ptr<bool[]> flags(new bool[pos.size()]);
      for (std::size_t i = 0; i < pos.size(); ++i) flags[i] = pos[i];
      const auto roc = learn::roc_curve(scores, std::span<const bool>(flags.get(), pos.size()));
      auc_sum += roc.auc;
      for (std::size_t g = 0; g < out.fpr_grid.size(); ++g) {
        double best = 0.0;
        for (const auto& p : roc.points)
          if (p.fpr <= out.fpr_grid[g] + 1e-12) best = std::max(best, p.tpr);
        tpr_sum[g] += best;
      }
    }
    out.sigmas.push_back(s);
    std::vector<double> mean(tpr_sum.size());
    learn::RocPoint best{0.0, 0.0, 0.0};
    for (std::size_t g = 0; g < mean.size(); ++g) {
      mean[g] = tpr_sum[g] / cfg.devices;
      if (mean[g] - out.fpr_grid[g] > best.tpr - best.fpr) best = {out.fpr_grid[g], mean[g], 0.0};
    }
    out.mean_tpr.push_back(std::move(mean));
    out.mean_auc.push_back(auc_sum / cfg.devices);
    out.best.push_back(best);
  }
  return out;
}

RawIqStudy rawiq_study(const ExperimentConfig& cfg, CellSource& cells, const SigmaSweep& images) {
  const auto kind = primary_kind(cfg);
  const auto link = images.link;
  const std::size_t count = cfg.rawiq_chunks_per_cell;
  learn::Dataset clean;
  for (const auto& k : level_cells(cfg, rfchain::NoiseKind::None, 0.0, link))
    for (const auto& row : cells.raw_chunks(k, count)) clean.add(row, k.device);
  Rng rng = make_rng(derive_seed(cfg.seed, {kRawTag, std::uint64_t(link)}));
  const std::vector<double> fractions{0.6, 0.2, 0.2};
  const auto parts = learn::stratified_split(clean, fractions, rng);
  const auto train = clean.subset(parts[0]), validation = clean.subset(parts[1]), test = clean.subset(parts[2]);
  learn::RawIqClassifier model(cfg.rawiq, rng);
  RawIqStudy out;
  out.training = learn::train_classifier(model, train, validation, cfg.rawiq.train, rng);

  for (double s : cfg.sigmas) {
    RawIqRow row;
    row.sigma = s;
    if (s == 0.0) {
      row.rawiq_accuracy = model.accuracy(test);
    } else {
      learn::Dataset noisy;
      for (const auto& k : level_cells(cfg, kind, s, link))
        for (const auto& r : cells.raw_chunks(k, count)) noisy.add(r, k.device);
      row.rawiq_accuracy = model.accuracy(noisy);
    }
    row.image_accuracy = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : images.rows)
      if ((r.kind == kind || s == 0.0) && r.sigma == s) row.image_accuracy = r.accuracy;
    out.rows.push_back(row);
  }
  return out;
}

DisclosureStudy disclosure_study(const ExperimentConfig& cfg, CellSource& cells) {
  const auto kind = primary_kind(cfg);
  const auto link = cfg.link.kind;
  const auto& levels = cfg.protocol.schedule.level_map;

  // Models: one per distinct level sigma plus the clean one, and one trained on
  // the whole grid.
  std::vector<double> model_sigmas(levels.begin(), levels.end());
  model_sigmas.push_back(0.0);
  std::sort(model_sigmas.begin(), model_sigmas.end());
  model_sigmas.erase(std::unique(model_sigmas.begin(), model_sigmas.end()), model_sigmas.end());
  std::vector<double> split_sigmas(model_sigmas);
  for (double s : cfg.sigmas) split_sigmas.push_back(s);
  std::sort(split_sigmas.begin(), split_sigmas.end());
  split_sigmas.erase(std::unique(split_sigmas.begin(), split_sigmas.end()), split_sigmas.end());

  std::vector<CellKey> keys;
  for (double s : split_sigmas)
    for (const auto& k : level_cells(cfg, kind, s, link)) keys.push_back(k);
  cells.prefetch(keys, cfg.measurement.symbols_per_cell);
  std::map<double, ImageSplit> splits;
  for (double s : split_sigmas) splits.emplace(s, level_split(cfg, cells, kind, s, link));

  learn::Dataset all_train, all_validation;
  for (double s : cfg.sigmas) {
    append(all_train, splits.at(s).train);
    append(all_validation, splits.at(s).validation);
  }

  const int tasks = int(model_sigmas.size()) + 1;
  std::vector<TrainedClassifier> models(static_cast<std::size_t>(tasks));
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < tasks; ++t) {
    try {
      if (t + 1 < tasks) {
        const double s = model_sigmas[std::size_t(t)];
        const auto& sp = splits.at(s);
        models[std::size_t(t)] = train_image_classifier(cfg, sp.train, sp.validation, level_model_seed(cfg, s, link));
      } else {
        models[std::size_t(t)] = train_image_classifier(cfg, all_train, all_validation,
                                                        derive_seed(cfg.seed, {kAllSamplesTag, std::uint64_t(link)}));
      }
    } catch (const std::exception& e) {
#pragma omp critical(hideprint_disclosure_error)
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw RuntimeFailure("disclosure_study: " + error);

  auto model_for = [&](double s) -> const learn::ImageClassifier& {
    const auto it = std::find(model_sigmas.begin(), model_sigmas.end(), s);
    return *models[std::size_t(it - model_sigmas.begin())].model;
  };
  const auto& noise_free = model_for(0.0);
  const auto& all_samples = *models.back().model;

  DisclosureStudy out;
  out.pool_noise_free.devices = out.pool_all_samples.devices = cfg.devices;
  for (double s : levels) {
    const auto& test = splits.at(s).test;
    const auto legit = model_for(s).classify(test);
    const auto nf = noise_free.classify(test);
    const auto as = all_samples.classify(test);
    std::vector<std::vector<protocol::Observation>> nf_pool(static_cast<std::size_t>(cfg.devices)),
        as_pool(static_cast<std::size_t>(cfg.devices));
    std::size_t hit_l = 0, hit_nf = 0, hit_as = 0;
    for (std::size_t r = 0; r < test.size(); ++r) {
      const int d = test.y[r];
      nf_pool[std::size_t(d)].push_back({legit[r], nf[r]});
      as_pool[std::size_t(d)].push_back({legit[r], as[r]});
      hit_l += legit[r] == d;
      hit_nf += nf[r] == d;
      hit_as += as[r] == d;
    }
    out.level_sigma.push_back(s);
    out.legitimate_level_accuracy.push_back(double(hit_l) / double(test.size()));
    out.noise_free_level_accuracy.push_back(double(hit_nf) / double(test.size()));
    out.all_samples_level_accuracy.push_back(double(hit_as) / double(test.size()));
    out.pool_noise_free.pools.push_back(std::move(nf_pool));
    out.pool_all_samples.pools.push_back(std::move(as_pool));
  }

  protocol::DisclosureScenario scenario;
  scenario.schedule = cfg.protocol.schedule;
  scenario.slots_per_iteration = cfg.protocol.slots_per_iteration;
  scenario.vote_window = cfg.protocol.vote_window;
  const std::uint64_t seed = derive_seed(cfg.seed, {kDisclosureTag});
  scenario.adversary = protocol::AdversaryMode::NoiseFree;
  out.noise_free = protocol::simulate_disclosure(scenario, out.pool_noise_free, cfg.protocol.iterations, seed);
  scenario.adversary = protocol::AdversaryMode::AllSamples;
  out.all_samples = protocol::simulate_disclosure(scenario, out.pool_all_samples, cfg.protocol.iterations, seed);
  return out;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"accuracy-vs-sigma", "all-samples", "autoencoder", "wireless",
                                              "roc",               "rawiq",       "protocol",    "psucc"};
  return names;
}

namespace {

void write_sigma_rows(const std::filesystem::path& path, const std::vector<SigmaRow>& rows) {
  auto os = open_csv(path);
  os << "kind,sigma,accuracy,snr_db\n";
  for (const auto& r : rows) {
    os << rfchain::to_string(r.kind == rfchain::NoiseKind::None ? rfchain::NoiseKind::Gaussian : r.kind) << ','
       << r.sigma << ',' << r.accuracy << ',';
    if (std::isfinite(r.snr_db)) os << r.snr_db;
    os << '\n';
  }
  finish(os, path);
}

nlohmann::json sweep_summary(const SigmaSweep& s) {
  nlohmann::json j;
  j["link"] = std::string(channel::to_string(s.link));
  j["clean_accuracy"] = s.clean_report.accuracy;
  j["training"] = training_json(s.training);
  for (const auto& [kind, sigma] : s.first_sigma_below)
    j["first_sigma_below_0.2"][std::string(rfchain::to_string(kind))] = sigma ? nlohmann::json(*sigma) : nlohmann::json(nullptr);
  for (const auto& [sigma, sil] : s.silhouette) j["silhouette"].push_back({{"sigma", sigma}, {"silhouette", sil}});
  return j;
}

void write_projection(const std::filesystem::path& path, const SigmaSweep& s) {
  auto os = open_csv(path);
  os << "sigma,device,x,y\n";
  for (std::size_t i = 0; i < s.projection.x.size(); ++i)
    os << s.projection_sigma[i] << ',' << s.projection_device[i] << ',' << s.projection.x[i] << ','
       << s.projection.y[i] << '\n';
  finish(os, path);
}

}  // namespace

ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg, CellSource& cells,
                                bool quiet) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ValidationError("unknown experiment '" + name + "'");
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.name = name;
  const auto dir = cfg.output_dir / name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json& sum = res.summary;
  note(quiet, "experiment " + name);

  if (name == "accuracy-vs-sigma" || name == "wireless") {
    const bool wireless = name == "wireless";
    const auto link = wireless ? channel::LinkKind::Wireless : cfg.link.kind;
    std::vector<rfchain::NoiseKind> kinds = wireless ? std::vector<rfchain::NoiseKind>{primary_kind(cfg)} : cfg.noise_kinds;
    const auto sweep = accuracy_vs_sigma(cfg, cells, link, kinds, true);
    const auto csv = dir / (wireless ? "wireless.csv" : "accuracy_vs_sigma.csv");
    write_sigma_rows(csv, sweep.rows);
    learn::EvalReport clean = sweep.clean_report;
    if (!sweep.projection.x.empty()) clean.projection = sweep.projection;
    const auto eval = dir / "clean_eval.csv";
    learn::write_csv(eval, clean);
    const auto proj = dir / "projection.csv";
    write_projection(proj, sweep);
    res.files = {csv, eval, proj};
    sum["results"] = sweep_summary(sweep);
    double spread = 0.0;
    for (double s : cfg.sigmas) {
      double lo = 1.0, hi = 0.0;
      for (const auto& r : sweep.rows)
        if (r.sigma == s) {
          lo = std::min(lo, r.accuracy);
          hi = std::max(hi, r.accuracy);
        }
      spread = std::max(spread, hi - lo);
    }
    sum["results"]["max_kind_spread"] = spread;
  } else if (name == "all-samples") {
    const auto study = all_samples_study(cfg, cells);
    const auto csv = dir / "all_samples.csv";
    auto os = open_csv(csv);
    os << "sigma,accuracy\n";
    for (const auto& r : study.rows) os << r.sigma << ',' << r.accuracy << '\n';
    finish(os, csv);
    const auto eval = dir / "all_samples_eval.csv";
    learn::write_csv(eval, study.report);
    res.files = {csv, eval};
    sum["results"] = {{"pooled_accuracy", study.report.accuracy},
                      {"fpr", study.report.fpr},
                      {"fnr", study.report.fnr},
                      {"training", training_json(study.training)}};
  } else if (name == "autoencoder") {
    const auto study = autoencoder_study(cfg, cells);
    const auto csv = dir / "autoencoder.csv";
    auto os = open_csv(csv);
    os << "target,test_device,sigma,mean_mse,tau,anomaly_rate,images\n";
    for (const auto& r : study.rows)
      os << r.target << ',' << r.test_device << ',' << r.sigma << ',' << r.mean_mse << ',' << r.tau << ','
         << r.anomaly_rate << ',' << r.images << '\n';
    finish(os, csv);
    res.files = {csv};
    nlohmann::json th = nlohmann::json::array();
    for (const auto& t : study.thresholds)
      th.push_back({{"tau", t.tau}, {"mse_mean", t.train_mse_mean}, {"mse_std", t.train_mse_std}});
    sum["results"] = {{"thresholds", th},
                      {"false_positive_ratio", study.false_positive_ratio},
                      {"false_negative_ratio", study.false_negative_ratio},
                      {"pooled_false_positive_ratio", study.pooled_false_positive_ratio},
                      {"held_out_images", study.held_out_images}};
  } else if (name == "roc") {
    const auto study = roc_study(cfg, cells);
    const auto csv = dir / "roc.csv";
    auto os = open_csv(csv);
    os << "sigma,fpr,tpr\n";
    for (std::size_t i = 0; i < study.sigmas.size(); ++i)
      for (std::size_t g = 0; g < study.fpr_grid.size(); ++g)
        os << study.sigmas[i] << ',' << study.fpr_grid[g] << ',' << study.mean_tpr[i][g] << '\n';
    finish(os, csv);
    res.files = {csv};
    for (std::size_t i = 0; i < study.sigmas.size(); ++i)
      sum["results"].push_back({{"sigma", study.sigmas[i]},
                                {"mean_auc", study.mean_auc[i]},
                                {"best_fpr", study.best[i].fpr},
                                {"best_tpr", study.best[i].tpr}});
  } else if (name == "rawiq") {
    const std::vector<rfchain::NoiseKind> kinds{primary_kind(cfg)};
    const auto sweep = accuracy_vs_sigma(cfg, cells, cfg.link.kind, kinds, false);
    const auto study = rawiq_study(cfg, cells, sweep);
    const auto csv = dir / "rawiq.csv";
    auto os = open_csv(csv);
    os << "sigma,rawiq_accuracy,image_accuracy\n";
    for (const auto& r : study.rows) os << r.sigma << ',' << r.rawiq_accuracy << ',' << r.image_accuracy << '\n';
    finish(os, csv);
    res.files = {csv};
    sum["results"] = {{"training", training_json(study.training)}, {"image_training", training_json(sweep.training)}};
  } else if (name == "protocol") {
    const auto study = disclosure_study(cfg, cells);
    const auto levels = dir / "protocol_levels.csv";
    auto os = open_csv(levels);
    os << "level,sigma,legitimate_accuracy,noise_free_accuracy,all_samples_accuracy\n";
    for (std::size_t l = 0; l < study.level_sigma.size(); ++l)
      os << l << ',' << study.level_sigma[l] << ',' << study.legitimate_level_accuracy[l] << ','
         << study.noise_free_level_accuracy[l] << ',' << study.all_samples_level_accuracy[l] << '\n';
    finish(os, levels);
    const auto nf = dir / "disclosure_noise_free.csv";
    const auto as = dir / "disclosure_all_samples.csv";
    study.noise_free.write_csv(nf);
    study.all_samples.write_csv(as);
    res.files = {levels, nf, as};
    const auto& primary =
        cfg.protocol.adversary == protocol::AdversaryMode::NoiseFree ? study.noise_free : study.all_samples;
    sum["results"] = {{"adversary", protocol::to_string(cfg.protocol.adversary)},
                      {"primary", primary.summary()},
                      {"noise_free", study.noise_free.summary()},
                      {"all_samples", study.all_samples.summary()}};
  } else if (name == "psucc") {
    const auto table = protocol::psucc_curves(cfg.protocol.p, cfg.protocol.deltas, cfg.protocol.w_max);
    const auto csv = dir / "psucc.csv";
    table.write_csv(csv);
    res.files = {csv};
    sum["results"] = {{"p", cfg.protocol.p}, {"w_max", cfg.protocol.w_max}, {"deltas", cfg.protocol.deltas}};
  }

  sum["experiment"] = name;
  sum["seed"] = cfg.seed;
  sum["config"] = to_json(cfg);
  sum["wall_clock_s"] = num(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  const auto summary = dir / "summary.json";
  std::ofstream js(summary);
  js << sum.dump(2) << '\n';
  if (!js) throw RuntimeFailure("cannot write " + summary.string());
  res.files.push_back(summary);
  note(quiet, "wrote " + dir.string());
  return res;
}

ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg, bool quiet) {
  CellSource cells(cfg);
  return run_experiment(name, cfg, cells, quiet);
}

}  // namespace hideprint::bench
