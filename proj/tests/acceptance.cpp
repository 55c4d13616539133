// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "hideprint/bench/experiments.hpp"
#include "hideprint/imaging.hpp"
#include "hideprint/learn/autoencoder.hpp"
#include "hideprint/protocol.hpp"
#include "support.hpp"

using namespace hideprint;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& run) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d %-36s %s  %s (%.1f s)\n", id, title.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Chi-square survival function for 5 degrees of freedom.
double chi2_sf_5(double x) {
  return std::erfc(std::sqrt(x / 2.0)) + std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-x / 2.0) * (1.0 + x / 3.0);
}

std::string csv_bytes(const protocol::DisclosureReport& r, const std::filesystem::path& path) {
  r.write_csv(path);
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

int main() {
  const bench::ExperimentConfig cfg;
  cfg.validate();
  bench::CellSource cells(cfg);
  const auto wired = channel::LinkKind::Wired;

  report(1, "fingerprint separability", [&] {
    const auto t0 = Clock::now();
    bench::CellSource fresh(cfg);
    std::vector<bench::CellKey> clean;
    for (int d = 0; d < cfg.devices; ++d) clean.push_back(bench::make_cell(d, rfchain::NoiseKind::None, 0.0, wired));
    fresh.prefetch(clean, cfg.measurement.symbols_per_cell);
    const auto split = bench::split_images(fresh, clean, cfg.measurement.symbols_per_cell, derive_seed(cfg.seed, {1}));
    const auto model = bench::train_image_classifier(cfg, split.train, split.validation, derive_seed(cfg.seed, {2}));
    const double acc = model.model->accuracy(split.test);
    const double t = seconds_since(t0);
    return Outcome{acc >= 0.85 && t < 600.0, "accuracy " + fmt("%.3f", acc) + " on " +
                                                 std::to_string(split.test.size()) + " held-out images, " +
                                                 fmt("%.0f s", t)};
  });

  std::optional<bench::SigmaSweep> sweep;
  report(2, "anonymization collapse", [&] {
    sweep = bench::accuracy_vs_sigma(cfg, cells, wired, cfg.noise_kinds, false);
    bool ok = true;
    std::ostringstream os;
    for (auto kind : cfg.noise_kinds) {
      double prev = 2.0, last = 1.0;
      os << rfchain::to_string(kind) << '[';
      for (const auto& r : sweep->rows) {
        if (r.kind != kind) continue;
        if (r.accuracy > prev + 0.05) ok = false;
        prev = std::min(prev, r.accuracy);
        last = r.accuracy;
        os << fmt("%.2f", r.accuracy) << (r.sigma == cfg.sigmas.back() ? "" : " ");
      }
      if (last > 0.2) ok = false;
      const auto& first = sweep->first_sigma_below.at(kind);
      os << "] first<0.2 at " << (first ? fmt("%.2f", *first) : std::string("none")) << "; ";
    }
    return Outcome{ok, os.str()};
  });

  report(3, "noise-type insensitivity", [&] {
    if (!sweep) return Outcome{false, "no sweep"};
    std::map<double, std::pair<double, double>> range;
    for (const auto& r : sweep->rows) {
      auto it = range.try_emplace(r.sigma, r.accuracy, r.accuracy).first;
      it->second.first = std::min(it->second.first, r.accuracy);
      it->second.second = std::max(it->second.second, r.accuracy);
    }
    double worst = 0.0, at = 0.0;
    for (const auto& [s, mm] : range)
      if (mm.second - mm.first > worst) {
        worst = mm.second - mm.first;
        at = s;
      }
    return Outcome{worst <= 0.1, "max spread " + fmt("%.3f", worst) + " at sigma " + fmt("%.2f", at)};
  });

  report(4, "SNR penalty", [&] {
    auto c = cfg;
    c.modulation.tx_amplitude = 1.0;
    const std::size_t symbols = 250'000;
    const std::uint64_t seed = 41;
    const double clean = bench::link_snr_db(c, 0, {}, 15.0, symbols, seed);
    const double noisy = bench::link_snr_db(c, 0, {rfchain::NoiseKind::Gaussian, 0.02}, 15.0, symbols, seed);
    const double drop = clean - noisy;
    const double analytic = channel::analytic_snr_drop_db(0.02, std::pow(10.0, -clean / 10.0));
    const bool ok = drop >= 0.05 && drop <= 0.2 && std::abs(drop - analytic) <= 0.02;
    return Outcome{ok, "drop " + fmt("%.4f dB", drop) + ", analytic " + fmt("%.4f dB", analytic) + ", link " +
                           fmt("%.2f dB", clean)};
  });

  report(5, "link quality preservation", [&] {
    bool ok = true;
    std::size_t min_bits = ~std::size_t(0);
    double worst = 0.0;
    std::vector<rfchain::NoiseSpec> specs{{}};
    for (auto kind : cfg.noise_kinds) specs.push_back({kind, 0.05});
    specs.push_back({rfchain::NoiseKind::Gaussian, 0.02});
    std::uint64_t seed = 100;
    for (const auto& spec : specs) {
      testing::LinkSetup s;
      s.noise = spec;
      s.cfo_hz = 200.0;
      s.timing_offset_symbols = 0.3;
      s.seed = ++seed;
      const auto r = testing::run_link(s);
      ok = ok && r.ber == 0.0 && r.bits >= 100'000;
      min_bits = std::min(min_bits, r.bits);
      worst = std::max(worst, r.ber);
    }
    return Outcome{ok, "worst BER " + fmt("%.2e", worst) + " over " + std::to_string(specs.size()) +
                           " noise settings, >= " + std::to_string(min_bits) + " bits each"};
  });

  report(6, "one-class pipeline", [&] {
    const auto study = bench::autoencoder_study(cfg, cells);
    bool tau_exact = true;
    Rng rng = make_rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> mse(std::size_t(2 + t % 40));
      for (auto& m : mse) m = u(rng);
      const auto th = learn::ThresholdModel::from_mse(mse);
      double mean = 0.0;
      for (double m : mse) mean += m;
      mean /= double(mse.size());
      double ss = 0.0;
      for (double m : mse) ss += (m - mean) * (m - mean);
      const double sd = std::sqrt(ss / double(mse.size() - 1));
      tau_exact = tau_exact && std::abs(th.tau - (mean + 3.5 * sd)) <= 1e-12 * (1.0 + th.tau);
    }
    for (const auto& th : study.thresholds)
      tau_exact = tau_exact && th.tau == th.train_mse_mean + 3.5 * th.train_mse_std;
    double worst = 0.0;
    for (double f : study.false_positive_ratio) worst = std::max(worst, f);
    return Outcome{study.pooled_false_positive_ratio <= 0.05 && tau_exact,
                   "pooled FPR " + fmt("%.3f", study.pooled_false_positive_ratio) + " over " +
                       std::to_string(study.held_out_images) + " held-out images (worst device " +
                       fmt("%.2f", worst) + "), tau rule " + (tau_exact ? "exact" : "violated")};
  });

  report(7, "raw-IQ fragility", [&] {
    std::optional<bench::SigmaSweep> gaussian;
    if (!sweep) {
      const std::vector<rfchain::NoiseKind> g{rfchain::NoiseKind::Gaussian};
      gaussian = bench::accuracy_vs_sigma(cfg, cells, wired, g, false);
    }
    const auto study = bench::rawiq_study(cfg, cells, sweep ? *sweep : *gaussian);
    for (const auto& r : study.rows)
      if (r.sigma == 0.01) {
        const bool ok = r.rawiq_accuracy <= r.image_accuracy && r.rawiq_accuracy <= 0.25;
        double clean = 0.0;
        for (const auto& q : study.rows)
          if (q.sigma == 0.0) clean = q.rawiq_accuracy;
        return Outcome{ok, "raw-IQ " + fmt("%.3f", r.rawiq_accuracy) + " vs image " + fmt("%.3f", r.image_accuracy) +
                               " at sigma 0.01 (raw-IQ clean " + fmt("%.3f", clean) + ")"};
      }
    return Outcome{false, "sigma 0.01 missing from the grid"};
  });

  report(8, "protocol analytics", [&] {
    const auto t0 = Clock::now();
    bool ok = protocol::p_succ(6, 0.96) > 0.99 && protocol::p_succ(5, 0.5) == 0.5;
    Rng rng = make_rng(8);
    const std::size_t trials = 40'000;
    double worst_z = 0.0;
    for (int w : {1, 3, 6, 15})
      for (double p : {0.6, 0.8, 0.96}) {
        const double exact = protocol::p_succ(w, p);
        const double se = std::sqrt(exact * (1.0 - exact) / double(trials));
        const double z = std::abs(protocol::monte_carlo_vote_success(w, p, trials, rng) - exact) / se;
        worst_z = std::max(worst_z, z);
      }
    ok = ok && worst_z <= 3.0;
    const double t = seconds_since(t0);
    return Outcome{ok && t < 60.0, "p_succ(6,0.96) " + fmt("%.6f", protocol::p_succ(6, 0.96)) +
                                       ", p_succ(5,0.5) " + fmt("%.6f", protocol::p_succ(5, 0.5)) +
                                       ", worst Monte-Carlo deviation " + fmt("%.2f SE", worst_z)};
  });

  report(9, "selective disclosure gap", [&] {
    const auto a = bench::disclosure_study(cfg, cells);
    const auto b = bench::disclosure_study(cfg, cells);
    const auto dir = std::filesystem::temp_directory_path() / "hideprint_acceptance";
    std::filesystem::create_directories(dir);
    const bool identical = csv_bytes(a.noise_free, dir / "a.csv") == csv_bytes(b.noise_free, dir / "b.csv") &&
                           a.noise_free.summary().dump() == b.noise_free.summary().dump();
    std::filesystem::remove_all(dir);
    const double legit = a.noise_free.legitimate_accuracy, adv = a.noise_free.adversary_accuracy;
    const bool ok = legit - adv >= 0.2 && legit >= 0.85 && identical;
    return Outcome{ok, "legitimate " + fmt("%.3f", legit) + ", adversary " + fmt("%.3f", adv) + ", gap " +
                           fmt("%.3f", legit - adv) + " (all-samples adversary " +
                           fmt("%.3f", a.all_samples.adversary_accuracy) + "), rerun " +
                           (identical ? "byte-identical" : "differs")};
  });

  report(10, "numerical hygiene", [&] {
    Rng rng = make_rng(10);
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
    learn::ImageClassifier clf(cfg.classifier, rng);
    const auto gc = learn::gradient_check(clf, batch(clf.input_size(), 4, cfg.devices), 400, 1);
    learn::SparseAutoencoder ae(cfg.autoencoder, rng);
    const auto ga = learn::gradient_check(ae, batch(ae.input_size(), 4, 1), 400, 2);

    auto icfg = cfg.imaging;
    icfg.pixel_cap = imaging::kUncapped;
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> spread(0.01, 0.2);
    bool conserved = true;
    std::vector<Complex> chunk(icfg.chunk_size);
    for (int c = 0; c < 1000 && conserved; ++c) {
      const double si = spread(rng), sq = spread(rng), skew = spread(rng);
      for (auto& x : chunk) {
        const double s = u(rng) < 0.5 ? -1.0 : 1.0;
        const double i = g(rng) * si, q = g(rng) * sq;
        x = s * Complex(0.7 + i, q + skew * i);
      }
      const auto pts = imaging::mirror_and_trim(chunk, icfg);
      conserved = imaging::to_image(pts.points, icfg).pixel_sum() == pts.points.size();
    }

    const auto& sched = cfg.protocol.schedule;
    std::vector<double> counts(std::size_t(sched.level_count()), 0.0);
    const std::uint64_t slots = 60'000;
    for (std::uint64_t t = 0; t < slots; ++t) counts[std::size_t(protocol::noise_level_at(sched, t))] += 1.0;
    const double expect = double(slots) / double(counts.size());
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expect) * (c - expect) / expect;
    const double p = counts.size() == 6 ? chi2_sf_5(chi2) : 0.0;

    const bool ok = gc.max_relative_error < 1e-4 && ga.max_relative_error < 1e-4 && conserved && p > 0.01;
    return Outcome{ok, "gradient error classifier " + fmt("%.2e", gc.max_relative_error) + ", autoencoder " +
                           fmt("%.2e", ga.max_relative_error) + "; pixel sums " +
                           (conserved ? "conserved" : "NOT conserved") + " on 1000 chunks; schedule chi2 p " +
                           fmt("%.3f", p)};
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
