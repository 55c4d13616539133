#pragma once

// Self-describing binary checkpoint:
//   "HPCK" | u32 version | u64 config length | config JSON | u64 seed |
//   u64 parameter count | float64 parameters (all little-endian)

#include <filesystem>
#include <vector>

#include "json.hpp"

namespace hideprint::learn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config;  // includes "kind"
  std::uint64_t seed = 0;
  std::vector<double> parameters;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hideprint::learn
