#pragma once

// Selective fingerprint disclosure: a secret-seeded hash picks the noise level
// of every time slot; receivers that know the seed pick the matching model.
// Also the binomial majority-voting analytics and the Monte-Carlo simulation
// comparing a legitimate receiver with an adversary.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hideprint/common.hpp"
#include "hideprint/learn/metrics.hpp"
#include "json.hpp"

namespace hideprint::protocol {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of `data`.
Digest sha256(std::span<const std::uint8_t> data);

struct DisclosureSchedule {
  std::vector<std::uint8_t> seed;  // s_k, secret
  double slot_duration = 1.0;      // seconds
  std::vector<double> level_map{0.0, 0.01, 0.02, 0.03, 0.04, 0.05};  // index -> sigma
  int rotate_every = 0;            // > 0: derive a fresh seed every this many slots

  int level_count() const { return int(level_map.size()); }
  void validate() const;
  std::uint64_t slot_at(double seconds) const;
};

/// Seed in force during `slot`: s_k itself, or SHA-256(s_k | be64(slot / rotate_every))
/// when rotation is enabled.
std::vector<std::uint8_t> seed_for_slot(const DisclosureSchedule& schedule, std::uint64_t slot);

/// n_i = be64(first 8 bytes of SHA-256(s | be64(t_i))) mod M.
int noise_level_at(const DisclosureSchedule& schedule, std::uint64_t slot);

/// C(w, v) p^v (1 - p)^(w - v); evaluated in log space for w > 50.
double binomial_pmf(int w, int v, double p);

/// Sum of binomial_pmf(w, v, p) for v = ceil(w / 2) .. w. For even w the tie
/// v = w / 2 counts as a success.
double p_succ(int w, double p);

/// Most frequent label; ties go to the smallest label.
int majority_vote(std::span<const int> labels);

/// Empirical success rate of `trials` binary votes over w rounds, each round
/// correct with probability p (ties count as correct, matching p_succ).
double monte_carlo_vote_success(int w, double p, std::size_t trials, Rng& rng);

struct MajorityVotingAnalysis {
  double p = 0.0;      // legitimate per-round success
  double delta = 0.0;  // knowledge gap
  int w = 1;

  void validate() const;
  double p_adversary() const { return p - delta; }
  double legitimate_success() const { return p_succ(w, p); }
  double adversary_success() const { return p_succ(w, p_adversary()); }
};

struct PsuccTable {
  std::vector<std::string> labels;            // "legitimate", "delta=0.1", ...
  std::vector<double> round_probability;      // p or p - delta per row
  int w_max = 0;
  std::vector<std::vector<double>> values;    // values[row][w - 1]

  void write_csv(const std::filesystem::path& path) const;
};

/// Row 0 is the legitimate receiver (p); one row per delta follows (p - delta).
PsuccTable psucc_curves(double p, std::span<const double> deltas, int w_max);

enum class AdversaryMode { NoiseFree, AllSamples };

std::string to_string(AdversaryMode mode);
AdversaryMode adversary_mode_from_string(const std::string& name);

/// Held-out observations with the predictions each receiver's model gives
/// them. pools[level][device] lists one entry per test image of that cell;
/// `legitimate` comes from the model of that level, `adversary` from the
/// adversary's single model.
struct Observation {
  int legitimate = -1;
  int adversary = -1;
};

struct ObservationPool {
  int devices = 0;
  std::vector<std::vector<std::vector<Observation>>> pools;

  bool has_level(int level) const;
};

struct DisclosureScenario {
  DisclosureSchedule schedule;
  int slots_per_iteration = 300;
  int vote_window = 1;  // consecutive slots of one device voted together
  AdversaryMode adversary = AdversaryMode::NoiseFree;

  void validate() const;
};

struct SlotRecord {
  int iteration = 0;
  std::uint64_t slot = 0;
  int true_device = 0;
  int level = 0;
  int legitimate = 0;
  int adversary = 0;
};

struct DisclosureReport {
  std::vector<SlotRecord> slots;
  std::vector<double> legitimate_accuracy_per_iteration, adversary_accuracy_per_iteration;
  double legitimate_accuracy = 0.0, adversary_accuracy = 0.0;
  double legitimate_vote_accuracy = 0.0, adversary_vote_accuracy = 0.0;
  learn::ConfusionMatrix legitimate_confusion, adversary_confusion;
  std::vector<int> level_histogram;
  int iterations = 0;
  int vote_window = 1;
  AdversaryMode adversary = AdversaryMode::NoiseFree;
  std::uint64_t seed = 0;

  /// slot,iteration,true_device,scheduled_level,legit_prediction,adversary_prediction
  void write_csv(const std::filesystem::path& path) const;
  /// Accuracies, FPR/FNR, vote results and the binomial prediction for them.
  nlohmann::json summary() const;
};

/// Monte-Carlo over `iterations`, each with its own rng stream derived from
/// (seed, iteration). Every slot draws a transmitting device (fresh every
/// vote_window slots), reads its scheduled level and samples one held-out
/// observation of that cell. Throws ValidationError when a scheduled level
/// has no pool.
DisclosureReport simulate_disclosure(const DisclosureScenario& scenario, const ObservationPool& pool,
                                     int iterations, std::uint64_t seed);

nlohmann::json to_json(const DisclosureSchedule& s);
DisclosureSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace hideprint::protocol
