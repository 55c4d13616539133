#include "hideprint/protocol.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hideprint::protocol {

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw RuntimeFailure("sha256: digest computation failed");
  return out;
}

namespace {

void append_be64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) buf.push_back(std::uint8_t(v >> shift));
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : bytes) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(const std::string& s) {
  if (s.size() % 2) throw ValidationError("schedule seed: hex string of odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ValidationError("schedule seed: invalid hex digit");
  };
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size(); i += 2) out.push_back(std::uint8_t(nibble(s[i]) * 16 + nibble(s[i + 1])));
  return out;
}

}  // namespace

void DisclosureSchedule::validate() const {
  if (level_map.empty()) throw ValidationError("schedule: need at least one level");
  for (double s : level_map)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ValidationError("schedule: levels must be finite sigma >= 0");
  if (!(slot_duration > 0.0)) throw ValidationError("schedule: slot_duration must be > 0");
  if (rotate_every < 0) throw ValidationError("schedule: rotate_every must be >= 0");
}

std::uint64_t DisclosureSchedule::slot_at(double seconds) const {
  if (!(seconds >= 0.0)) throw ValidationError("schedule: time must be >= 0");
  return static_cast<std::uint64_t>(std::floor(seconds / slot_duration));
}

std::vector<std::uint8_t> seed_for_slot(const DisclosureSchedule& schedule, std::uint64_t slot) {
  if (schedule.rotate_every <= 0) return schedule.seed;
  std::vector<std::uint8_t> buf(schedule.seed);
  append_be64(buf, slot / std::uint64_t(schedule.rotate_every));
  const Digest d = sha256(buf);
  return {d.begin(), d.end()};
}

int noise_level_at(const DisclosureSchedule& schedule, std::uint64_t slot) {
  schedule.validate();
  std::vector<std::uint8_t> buf = seed_for_slot(schedule, slot);
  append_be64(buf, slot);
  const Digest d = sha256(buf);
  std::uint64_t prefix = 0;
  for (int i = 0; i < 8; ++i) prefix = (prefix << 8) | d[std::size_t(i)];
  return int(prefix % std::uint64_t(schedule.level_count()));
}

double binomial_pmf(int w, int v, double p) {
  if (w < 0 || v < 0 || v > w) throw ValidationError("binomial_pmf: need 0 <= v <= w");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binomial_pmf: p must be in [0, 1]");
  if (p == 0.0) return v == 0 ? 1.0 : 0.0;
  if (p == 1.0) return v == w ? 1.0 : 0.0;
  if (w > 50) {
    const double log_c = std::lgamma(w + 1.0) - std::lgamma(v + 1.0) - std::lgamma(w - v + 1.0);
    return std::exp(log_c + v * std::log(p) + (w - v) * std::log1p(-p));
  }
  double c = 1.0;
  for (int i = 1; i <= v; ++i) c = c * double(w - v + i) / double(i);
  return c * std::pow(p, v) * std::pow(1.0 - p, w - v);
}

double p_succ(int w, double p) {
  if (w < 1) throw ValidationError("p_succ: w must be >= 1");
  double s = 0.0;
  for (int v = (w + 1) / 2; v <= w; ++v) s += binomial_pmf(w, v, p);
  return std::min(1.0, s);
}

int majority_vote(std::span<const int> labels) {
  if (labels.empty()) throw ValidationError("majority_vote: empty input");
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  int best = counts.begin()->first, best_count = 0;
  for (const auto& [label, count] : counts)
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  return best;
}

double monte_carlo_vote_success(int w, double p, std::size_t trials, Rng& rng) {
  if (w < 1 || trials == 0) throw ValidationError("monte_carlo_vote_success: need w >= 1 and trials > 0");
  std::bernoulli_distribution correct(p);
  std::vector<int> votes(static_cast<std::size_t>(w));
  std::size_t wins = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (int& v : votes) v = correct(rng) ? 0 : 1;  // label 0 is the true device
    wins += majority_vote(votes) == 0;
  }
  return double(wins) / double(trials);
}

void MajorityVotingAnalysis::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("analysis: p must be in [0, 1]");
  if (!(p_adversary() >= 0.0 && p_adversary() <= 1.0)) throw ValidationError("analysis: p - delta must be in [0, 1]");
  if (w < 1) throw ValidationError("analysis: w must be >= 1");
}

PsuccTable psucc_curves(double p, std::span<const double> deltas, int w_max) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("psucc_curves: p must be in [0, 1]");
  if (w_max < 1) throw ValidationError("psucc_curves: w_max must be >= 1");
  PsuccTable t;
  t.w_max = w_max;
  auto add_row = [&](const std::string& label, double q) {
    t.labels.push_back(label);
    t.round_probability.push_back(q);
    std::vector<double> row;
    for (int w = 1; w <= w_max; ++w) row.push_back(p_succ(w, q));
    t.values.push_back(std::move(row));
  };
  add_row("legitimate", p);
  for (double d : deltas) {
    if (!(p - d >= 0.0 && p - d <= 1.0)) throw ValidationError("psucc_curves: p - delta must be in [0, 1]");
    std::ostringstream name;
    name << "delta=" << d;
    add_row(name.str(), p - d);
  }
  return t;
}

void PsuccTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("psucc: cannot open " + path.string());
  os.precision(12);
  os << "row,round_probability,w,p_succ\n";
  for (std::size_t r = 0; r < labels.size(); ++r)
    for (int w = 1; w <= w_max; ++w)
      os << labels[r] << ',' << round_probability[r] << ',' << w << ',' << values[r][std::size_t(w - 1)] << '\n';
  if (!os) throw RuntimeFailure("psucc: write failed for " + path.string());
}

std::string to_string(AdversaryMode mode) {
  return mode == AdversaryMode::NoiseFree ? "noise-free" : "all-samples";
}

AdversaryMode adversary_mode_from_string(const std::string& name) {
  if (name == "noise-free") return AdversaryMode::NoiseFree;
  if (name == "all-samples") return AdversaryMode::AllSamples;
  throw ValidationError("unknown adversary mode '" + name + "'");
}

bool ObservationPool::has_level(int level) const {
  if (level < 0 || std::size_t(level) >= pools.size()) return false;
  const auto& per_device = pools[std::size_t(level)];
  if (per_device.size() != std::size_t(devices)) return false;
  return std::all_of(per_device.begin(), per_device.end(), [](const auto& v) { return !v.empty(); });
}

void DisclosureScenario::validate() const {
  schedule.validate();
  if (slots_per_iteration < 1) throw ValidationError("scenario: slots_per_iteration must be >= 1");
  if (vote_window < 1) throw ValidationError("scenario: vote_window must be >= 1");
}

DisclosureReport simulate_disclosure(const DisclosureScenario& scenario, const ObservationPool& pool,
                                     int iterations, std::uint64_t seed) {
  scenario.validate();
  if (iterations < 1) throw ValidationError("simulate_disclosure: iterations must be >= 1");
  if (pool.devices < 2) throw ValidationError("simulate_disclosure: need at least two devices");
  for (int l = 0; l < scenario.schedule.level_count(); ++l)
    if (!pool.has_level(l))
      throw ValidationError("simulate_disclosure: no model/observations for scheduled level " + std::to_string(l));

  const int per = scenario.slots_per_iteration;
  const int w = scenario.vote_window;
  std::vector<SlotRecord> slots(static_cast<std::size_t>(iterations) * per);
  std::vector<std::array<std::size_t, 4>> votes(static_cast<std::size_t>(iterations));  // legit hits, adv hits, windows

#pragma omp parallel for schedule(static)
  for (int it = 0; it < iterations; ++it) {
    Rng rng = make_rng(derive_seed(seed, {std::uint64_t(it)}));
    std::uniform_int_distribution<int> pick_device(0, pool.devices - 1);
    int device = 0;
    std::vector<int> legit_window, adv_window;
    auto& v = votes[std::size_t(it)];
    v = {0, 0, 0, 0};
    for (int k = 0; k < per; ++k) {
      if (k % w == 0) device = pick_device(rng);
      SlotRecord& r = slots[std::size_t(it) * per + k];
      r.iteration = it;
      r.slot = std::uint64_t(it) * std::uint64_t(per) + std::uint64_t(k);
      r.true_device = device;
      r.level = noise_level_at(scenario.schedule, r.slot);
      const auto& cell = pool.pools[std::size_t(r.level)][std::size_t(device)];
      std::uniform_int_distribution<std::size_t> pick(0, cell.size() - 1);
      const Observation& o = cell[pick(rng)];
      r.legitimate = o.legitimate;
      r.adversary = o.adversary;
      legit_window.push_back(o.legitimate);
      adv_window.push_back(o.adversary);
      if (int(legit_window.size()) == w || k + 1 == per) {
        v[0] += majority_vote(legit_window) == device;
        v[1] += majority_vote(adv_window) == device;
        ++v[2];
        legit_window.clear();
        adv_window.clear();
      }
    }
  }

  DisclosureReport rep;
  rep.iterations = iterations;
  rep.vote_window = w;
  rep.adversary = scenario.adversary;
  rep.seed = seed;
  rep.legitimate_confusion = learn::ConfusionMatrix(pool.devices);
  rep.adversary_confusion = learn::ConfusionMatrix(pool.devices);
  rep.level_histogram.assign(std::size_t(scenario.schedule.level_count()), 0);
  std::size_t legit_hits = 0, adv_hits = 0, lv = 0, av = 0, windows = 0;
  for (int it = 0; it < iterations; ++it) {
    std::size_t lh = 0, ah = 0;
    for (int k = 0; k < per; ++k) {
      const SlotRecord& r = slots[std::size_t(it) * per + k];
      lh += r.legitimate == r.true_device;
      ah += r.adversary == r.true_device;
      rep.legitimate_confusion.add(r.true_device, r.legitimate);
      rep.adversary_confusion.add(r.true_device, r.adversary);
      ++rep.level_histogram[std::size_t(r.level)];
    }
    rep.legitimate_accuracy_per_iteration.push_back(double(lh) / per);
    rep.adversary_accuracy_per_iteration.push_back(double(ah) / per);
    legit_hits += lh;
    adv_hits += ah;
    lv += votes[std::size_t(it)][0];
    av += votes[std::size_t(it)][1];
    windows += votes[std::size_t(it)][2];
  }
  const double total = double(slots.size());
  rep.legitimate_accuracy = double(legit_hits) / total;
  rep.adversary_accuracy = double(adv_hits) / total;
  rep.legitimate_vote_accuracy = double(lv) / double(windows);
  rep.adversary_vote_accuracy = double(av) / double(windows);
  rep.slots = std::move(slots);
  return rep;
}

void DisclosureReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("disclosure report: cannot open " + path.string());
  os << "slot,iteration,true_device,scheduled_level,legit_prediction,adversary_prediction\n";
  for (const auto& r : slots)
    os << r.slot << ',' << r.iteration << ',' << r.true_device << ',' << r.level << ',' << r.legitimate << ','
       << r.adversary << '\n';
  if (!os) throw RuntimeFailure("disclosure report: write failed for " + path.string());
}

nlohmann::json DisclosureReport::summary() const {
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
  };
  const double gap = legitimate_accuracy - adversary_accuracy;
  nlohmann::json j;
  j["iterations"] = iterations;
  j["slots"] = slots.size();
  j["seed"] = seed;
  j["adversary_mode"] = to_string(adversary);
  j["legitimate_accuracy"] = legitimate_accuracy;
  j["adversary_accuracy"] = adversary_accuracy;
  j["accuracy_gap"] = gap;
  j["legitimate_accuracy_iteration_mean"] = mean_of(legitimate_accuracy_per_iteration);
  j["adversary_accuracy_iteration_mean"] = mean_of(adversary_accuracy_per_iteration);
  j["legitimate_fpr"] = legitimate_confusion.false_positive_rates();
  j["legitimate_fnr"] = legitimate_confusion.false_negative_rates();
  j["adversary_fpr"] = adversary_confusion.false_positive_rates();
  j["adversary_fnr"] = adversary_confusion.false_negative_rates();
  j["level_histogram"] = level_histogram;
  j["vote_window"] = vote_window;
  j["legitimate_vote_accuracy"] = legitimate_vote_accuracy;
  j["adversary_vote_accuracy"] = adversary_vote_accuracy;
  // Binomial prediction for the vote from the per-slot accuracies. Plurality
  // voting over several classes can beat it because wrong votes scatter.
  j["legitimate_vote_binomial"] = p_succ(vote_window, legitimate_accuracy);
  j["adversary_vote_binomial"] = p_succ(vote_window, adversary_accuracy);
  return j;
}

nlohmann::json to_json(const DisclosureSchedule& s) {
  return {{"seed_hex", to_hex(s.seed)},
          {"slot_duration", s.slot_duration},
          {"level_map", s.level_map},
          {"rotate_every", s.rotate_every}};
}

DisclosureSchedule schedule_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("schedule config must be an object");
  DisclosureSchedule s;
  if (j.contains("seed_hex")) s.seed = from_hex(j.at("seed_hex").get<std::string>());
  s.slot_duration = j.value("slot_duration", s.slot_duration);
  s.level_map = j.value("level_map", s.level_map);
  s.rotate_every = j.value("rotate_every", s.rotate_every);
  s.validate();
  return s;
}

}  // namespace hideprint::protocol
