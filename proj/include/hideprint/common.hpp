#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hideprint {

using Complex = std::complex<double>;
using Rng = std::mt19937_64;

/// Raised for malformed inputs or configurations. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a well-formed request fails while running (divergence, I/O,
/// missing data). Maps to CLI exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Complex baseband samples at a known sample rate.
struct IQFrame {
  std::vector<Complex> samples;
  double sample_rate = 1.0;

  std::size_t size() const { return samples.size(); }
  /// Throws ValidationError on an empty frame, non-finite samples or a
  /// non-positive rate.
  void validate() const;
};

/// Symbols at one sample per symbol.
struct SymbolStream {
  std::vector<Complex> symbols;

  std::size_t size() const { return symbols.size(); }
};

double mean_power(std::span<const Complex> x);

// splitmix64 finaliser; used to derive independent rng streams.
std::uint64_t mix_seed(std::uint64_t x);

/// Derives a child seed from a base seed and a path of integer keys, so that
/// every (device, noise level, repetition) task owns its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

}  // namespace hideprint
