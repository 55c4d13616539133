#pragma once

// Experiment orchestration. Each study returns structured results; the
// run_experiment front end writes them as CSV plus a JSON summary that echoes
// the config, seeds and wall-clock time.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hideprint/bench/config.hpp"
#include "hideprint/bench/dataset.hpp"
#include "hideprint/learn/autoencoder.hpp"
#include "hideprint/learn/classifier.hpp"
#include "hideprint/learn/metrics.hpp"
#include "hideprint/protocol.hpp"

namespace hideprint::bench {

struct ImageSplit {
  learn::Dataset train, validation, test;
};

/// Images of `cells` labelled by device, split 60/20/20 within each device.
ImageSplit split_images(CellSource& cells, std::span<const CellKey> keys, std::size_t symbols, std::uint64_t seed);

struct TrainedClassifier {
  std::unique_ptr<learn::ImageClassifier> model;
  learn::TrainResult training;
  std::uint64_t seed = 0;
};

TrainedClassifier train_image_classifier(const ExperimentConfig& cfg, const learn::Dataset& train,
                                         const learn::Dataset& validation, std::uint64_t seed);

struct SigmaRow {
  rfchain::NoiseKind kind = rfchain::NoiseKind::Gaussian;
  double sigma = 0.0;
  double accuracy = 0.0;
  double snr_db = 0.0;  // NaN when not measured
  std::size_t images = 0;
};

/// Train on clean images, test at every (kind, sigma).
struct SigmaSweep {
  channel::LinkKind link = channel::LinkKind::Wired;
  std::vector<SigmaRow> rows;
  learn::TrainResult training;
  learn::EvalReport clean_report;  // held-out sigma-0 images
  std::map<rfchain::NoiseKind, std::optional<double>> first_sigma_below;  // accuracy < 0.2
  learn::Projection2d projection;  // hidden-layer PCA of clean test images and the largest sigma
  std::vector<int> projection_device;
  std::vector<double> projection_sigma;
  std::map<double, double> silhouette;  // per sigma in the projection
};

SigmaSweep accuracy_vs_sigma(const ExperimentConfig& cfg, CellSource& cells, channel::LinkKind link,
                             std::span<const rfchain::NoiseKind> kinds, bool measure_snr);

/// One model trained on every sigma level (Gaussian), tested per level.
struct AllSamplesStudy {
  std::vector<SigmaRow> rows;
  learn::TrainResult training;
  learn::EvalReport report;  // pooled over all levels
};

AllSamplesStudy all_samples_study(const ExperimentConfig& cfg, CellSource& cells);

struct AutoencoderRow {
  int target = 0;
  int test_device = 0;
  double sigma = 0.0;
  double mean_mse = 0.0;
  double tau = 0.0;
  double anomaly_rate = 0.0;  // MSE >= tau
  std::size_t images = 0;
};

/// Per-device autoencoder on clean images. False positive ratio: held-out
/// clean images of the target flagged as anomalies. False negative ratio:
/// images of other devices, or the target with noise, accepted.
struct AutoencoderStudy {
  std::vector<AutoencoderRow> rows;
  std::vector<learn::ThresholdModel> thresholds;
  std::vector<double> false_positive_ratio;
  std::vector<double> false_negative_ratio;
  double pooled_false_positive_ratio = 0.0;
  std::size_t held_out_images = 0;
};

AutoencoderStudy autoencoder_study(const ExperimentConfig& cfg, CellSource& cells);

/// Per sigma: autoencoder per target on that level, scored (MSE) against the
/// other devices at the same level. Curves are averaged over targets on a
/// 101-point FPR grid.
struct RocStudy {
  std::vector<double> sigmas;
  std::vector<std::vector<double>> mean_tpr;  // [sigma][fpr grid]
  std::vector<double> fpr_grid;
  std::vector<double> mean_auc;
  std::vector<learn::RocPoint> best;  // on the averaged curve
};

RocStudy roc_study(const ExperimentConfig& cfg, CellSource& cells);

struct RawIqRow {
  double sigma = 0.0;
  double rawiq_accuracy = 0.0;
  double image_accuracy = 0.0;
};

struct RawIqStudy {
  std::vector<RawIqRow> rows;
  learn::TrainResult training;
};

/// Raw-IQ classifier trained on clean chunks next to the image classifier of
/// `images` (a Gaussian sweep on the same link).
RawIqStudy rawiq_study(const ExperimentConfig& cfg, CellSource& cells, const SigmaSweep& images);

struct DisclosureStudy {
  std::vector<double> level_sigma;
  std::vector<double> legitimate_level_accuracy;  // per-level model on its own level
  std::vector<double> noise_free_level_accuracy;  // adversary models per level
  std::vector<double> all_samples_level_accuracy;
  protocol::ObservationPool pool_noise_free, pool_all_samples;
  protocol::DisclosureReport noise_free, all_samples;
};

DisclosureStudy disclosure_study(const ExperimentConfig& cfg, CellSource& cells);

struct ExperimentResult {
  std::string name;
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

/// accuracy-vs-sigma, all-samples, autoencoder, wireless, roc, rawiq,
/// protocol, psucc.
const std::vector<std::string>& experiment_names();

/// Writes into cfg.output_dir / name. Unknown names raise ValidationError.
ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg, CellSource& cells,
                                bool quiet = true);
ExperimentResult run_experiment(const std::string& name, const ExperimentConfig& cfg, bool quiet = true);

}  // namespace hideprint::bench
