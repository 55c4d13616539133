#include "hideprint/common.hpp"

#include <cmath>

namespace hideprint {

void IQFrame::validate() const {
  if (samples.empty()) throw ValidationError("IQFrame: empty frame");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw ValidationError("IQFrame: sample_rate must be positive");
  for (const Complex& s : samples)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw ValidationError("IQFrame: non-finite sample");
}

double mean_power(std::span<const Complex> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const Complex& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = mix_seed(base);
  for (std::uint64_t k : keys) s = mix_seed(s ^ mix_seed(k + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace hideprint
