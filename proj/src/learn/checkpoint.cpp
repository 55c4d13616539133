#include "hideprint/learn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hideprint/common.hpp"

namespace hideprint::learn {

namespace {

constexpr char kMagic[4] = {'H', 'P', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw ValidationError("checkpoint: truncated file " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("checkpoint: cannot open " + path.string());
  const std::string config = ckpt.config.dump();
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, config.size());
  os.write(config.data(), std::streamsize(config.size()));
  put<std::uint64_t>(os, ckpt.seed);
  put<std::uint64_t>(os, ckpt.parameters.size());
  os.write(reinterpret_cast<const char*>(ckpt.parameters.data()),
           std::streamsize(ckpt.parameters.size() * sizeof(double)));
  if (!os) throw RuntimeFailure("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("checkpoint: cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("checkpoint: bad magic in " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  const auto config_len = get<std::uint64_t>(is, path);
  if (config_len > (1u << 24)) throw ValidationError("checkpoint: implausible config length");
  std::string config(config_len, '\0');
  if (!is.read(config.data(), std::streamsize(config_len)))
    throw ValidationError("checkpoint: truncated file " + path.string());
  Checkpoint ckpt;
  try {
    ckpt.config = nlohmann::json::parse(config);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad config JSON: ") + e.what());
  }
  ckpt.seed = get<std::uint64_t>(is, path);
  const auto count = get<std::uint64_t>(is, path);
  if (count > (std::uint64_t(1) << 32)) throw ValidationError("checkpoint: implausible parameter count");
  ckpt.parameters.resize(count);
  if (!is.read(reinterpret_cast<char*>(ckpt.parameters.data()), std::streamsize(count * sizeof(double))))
    throw ValidationError("checkpoint: truncated file " + path.string());
  return ckpt;
}

}  // namespace hideprint::learn
