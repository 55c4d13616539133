// hideprint command-line front end.
//   exit 0 success, 1 validation error / bad usage, 2 runtime failure

#include <cstdio>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hideprint/bench/config.hpp"
#include "hideprint/bench/dataset.hpp"
#include "hideprint/bench/experiments.hpp"
#include "hideprint/learn/autoencoder.hpp"
#include "hideprint/learn/checkpoint.hpp"
#include "hideprint/learn/classifier.hpp"
#include "hideprint/learn/metrics.hpp"
#include "hideprint/protocol.hpp"

using namespace hideprint;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

bench::ExperimentConfig resolve(const Globals& g) {
  bench::ExperimentConfig cfg;
  if (!g.config.empty()) {
    cfg = bench::load_config(g.config);
  } else {
    bench::apply_seed_override(cfg);
  }
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.output_dir = g.out;
  cfg.validate();
  return cfg;
}

void say(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cout << line << '\n';
}

int cmd_generate(const Globals& g) {
  const auto cfg = resolve(g);
  const auto dir = cfg.output_dir / "dataset";
  const auto records = bench::generate_dataset(cfg, dir, g.quiet);
  say(g, "wrote " + std::to_string(records.size()) + " measurement files to " + dir.string());
  return 0;
}

int cmd_train(const Globals& g, const std::string& model, int device) {
  const auto cfg = resolve(g);
  bench::CellSource cells(cfg);
  std::vector<bench::CellKey> clean;
  for (int d = 0; d < cfg.devices; ++d)
    clean.push_back(bench::make_cell(d, rfchain::NoiseKind::None, 0.0, cfg.link.kind));
  cells.prefetch(clean, cfg.measurement.symbols_per_cell);
  const auto split = bench::split_images(cells, clean, cfg.measurement.symbols_per_cell, derive_seed(cfg.seed, {1}));
  std::filesystem::create_directories(cfg.output_dir);
  learn::Checkpoint ckpt;
  ckpt.seed = derive_seed(cfg.seed, {2});
  std::filesystem::path path;
  if (model == "classifier") {
    auto trained = bench::train_image_classifier(cfg, split.train, split.validation, ckpt.seed);
    ckpt.config = {{"kind", trained.model->kind()},
                   {"model", learn::to_json(cfg.classifier)},
                   {"experiment", bench::to_json(cfg)},
                   {"input_normalization", "counts / pixel_cap"}};
    ckpt.parameters.assign(trained.model->parameters().begin(), trained.model->parameters().end());
    path = cfg.output_dir / "classifier.hpck";
    say(g, "validation accuracy " + std::to_string(trained.training.validation_accuracy.back()) + " after " +
               std::to_string(trained.training.epochs) + " epochs; test accuracy " +
               std::to_string(trained.model->accuracy(split.test)));
  } else {
    if (device < 0 || device >= cfg.devices) throw ValidationError("--device out of range");
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < split.train.size(); ++i)
      if (split.train.y[i] == device) tr.push_back(i);
    for (std::size_t i = 0; i < split.validation.size(); ++i)
      if (split.validation.y[i] == device) va.push_back(i);
    Rng rng = make_rng(ckpt.seed);
    learn::SparseAutoencoder ae(cfg.autoencoder, rng);
    const auto res = learn::train_autoencoder(ae, split.train.subset(tr), split.validation.subset(va), rng);
    ckpt.config = {{"kind", ae.kind()},
                   {"model", learn::to_json(cfg.autoencoder)},
                   {"experiment", bench::to_json(cfg)},
                   {"device", device},
                   {"tau", res.threshold.tau},
                   {"mse_mean", res.threshold.train_mse_mean},
                   {"mse_std", res.threshold.train_mse_std}};
    ckpt.parameters.assign(ae.parameters().begin(), ae.parameters().end());
    path = cfg.output_dir / ("autoencoder_d" + std::to_string(device) + ".hpck");
    say(g, "tau " + std::to_string(res.threshold.tau));
  }
  learn::save_checkpoint(path, ckpt);
  say(g, "wrote " + path.string());
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& checkpoint) {
  const auto ckpt = learn::load_checkpoint(checkpoint);
  if (ckpt.config.value("kind", "") != "image-classifier")
    throw ValidationError("evaluate: expected an image-classifier checkpoint");
  auto cfg = resolve(g);
  learn::ImageClassifier model(learn::classifier_config_from_json(ckpt.config.at("model")));
  if (model.parameters().size() != ckpt.parameters.size())
    throw ValidationError("evaluate: checkpoint does not match the model shape");
  std::copy(ckpt.parameters.begin(), ckpt.parameters.end(), model.parameters().begin());
  if (model.config().input_side != cfg.imaging.image_side || model.num_classes() != cfg.devices)
    throw ValidationError("evaluate: checkpoint shape does not match the config");

  bench::CellSource cells(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  const auto csv = cfg.output_dir / "evaluate.csv";
  std::ofstream os(csv);
  os.precision(10);
  os << "kind,sigma,accuracy\n";
  for (auto kind : cfg.noise_kinds)
    for (double s : cfg.sigmas) {
      learn::Dataset test;
      for (int d = 0; d < cfg.devices; ++d)
        bench::add_images(test, cells.images(bench::make_cell(d, kind, s, cfg.link.kind), cfg.measurement.eval_symbols_per_cell),
                          d, cfg.imaging.pixel_cap);
      const auto pred = model.classify(test);
      const auto report = learn::evaluate(test.y, pred, cfg.devices);
      os << rfchain::to_string(kind) << ',' << s << ',' << report.accuracy << '\n';
      say(g, std::string(rfchain::to_string(kind)) + " sigma " + std::to_string(s) + ": accuracy " +
                 std::to_string(report.accuracy));
      if (s == 0.0 && kind == cfg.noise_kinds.front()) learn::write_csv(cfg.output_dir / "evaluate_clean.csv", report);
    }
  if (!os) throw RuntimeFailure("evaluate: write failed for " + csv.string());
  return 0;
}

int cmd_experiment(const Globals& g, const std::string& name) {
  const auto cfg = resolve(g);
  bench::CellSource cells(cfg);
  std::vector<std::string> names;
  if (name == "all") {
    names = bench::experiment_names();
  } else {
    names = {name};
  }
  for (const auto& n : names) {
    const auto res = bench::run_experiment(n, cfg, cells, g.quiet);
    for (const auto& f : res.files) say(g, f.string());
  }
  return 0;
}

int cmd_psucc(const Globals& g, double p, int w, const std::vector<double>& deltas) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("--p must be in [0, 1]");
  if (w < 1) throw ValidationError("--w must be >= 1");
  std::printf("%.6f\n", protocol::p_succ(w, p));
  if (!g.out.empty()) {
    std::filesystem::create_directories(g.out);
    const auto table = protocol::psucc_curves(p, deltas, w);
    table.write_csv(std::filesystem::path(g.out) / "psucc.csv");
  }
  return 0;
}

int cmd_gradcheck(const Globals& g) {
  constexpr double kTolerance = 1e-4;
  constexpr std::size_t kAll = std::numeric_limits<std::size_t>::max();
  const std::uint64_t seed = g.seed.value_or(1);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto batch = [&](std::size_t dim, int rows, int classes) {
    learn::Dataset d;
    std::vector<double> x(dim);
    for (int r = 0; r < rows; ++r) {
      for (auto& v : x) v = u(rng);
      d.add(x, r % classes);
    }
    return d;
  };
  bool ok = true;
  auto report = [&](const std::string& what, const learn::GradientCheckResult& r, double tol) {
    const bool pass = r.max_relative_error < tol;
    ok = ok && pass;
    std::printf("%-18s max relative error %.3e over %zu parameters  %s\n", what.c_str(), r.max_relative_error,
                r.checked, pass ? "ok" : "FAIL");
  };

  learn::LinearModel linear(6, 3, rng);
  report("linear", learn::gradient_check(linear, batch(6, 5, 3), kAll, seed), 1e-8);

  learn::ClassifierConfig cc;
  learn::ImageClassifier clf(cc, rng);
  report("image-classifier", learn::gradient_check(clf, batch(clf.input_size(), 4, cc.num_classes), 400, seed),
         kTolerance);

  learn::RawIqConfig rc;
  rc.chunk_symbols = 256;
  learn::RawIqClassifier raw(rc, rng);
  report("rawiq-classifier", learn::gradient_check(raw, batch(raw.input_size(), 4, rc.num_classes), kAll, seed),
         kTolerance);

  learn::AutoencoderConfig ac;
  learn::SparseAutoencoder ae(ac, rng);
  report("autoencoder", learn::gradient_check(ae, batch(ae.input_size(), 4, 1), 400, seed), kTolerance);
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hideprint: fingerprint obfuscation simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON experiment config");
  app.add_option("--seed", g.seed, "Master seed (overrides config and HIDEPRINT_SEED)");
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  auto* generate = app.add_subcommand("generate", "Simulate the measurement grid to IQ files");
  std::string model = "classifier";
  int device = 0;
  auto* train = app.add_subcommand("train", "Train a model on clean images and write a checkpoint");
  train->add_option("--model", model, "classifier | autoencoder")->check(CLI::IsMember({"classifier", "autoencoder"}));
  train->add_option("--device", device, "Target device for the autoencoder");
  std::string checkpoint;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a classifier checkpoint over the noise grid");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  auto* psim = app.add_subcommand("protocol-sim", "Selective disclosure Monte-Carlo (experiment 'protocol')");
  double p = 0.96;
  int w = 6;
  std::vector<double> deltas{0.1, 0.2, 0.3, 0.4, 0.5};
  auto* psucc = app.add_subcommand("psucc", "Majority-voting success probability");
  psucc->add_option("--p", p, "Per-round success probability");
  psucc->add_option("--w", w, "Rounds");
  psucc->add_option("--deltas", deltas, "Knowledge gaps for the table written with --out");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every model");
  std::string name;
  auto* exp = app.add_subcommand("experiment", "Run a named experiment or 'all'");
  exp->add_option("name", name, "Experiment name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*generate) return cmd_generate(g);
    if (*train) return cmd_train(g, model, device);
    if (*evaluate) return cmd_evaluate(g, checkpoint);
    if (*psim) return cmd_experiment(g, "protocol");
    if (*psucc) return cmd_psucc(g, p, w, deltas);
    if (*grad) return cmd_gradcheck(g);
    if (*exp) return cmd_experiment(g, name);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
