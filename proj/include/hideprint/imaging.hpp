#pragma once

// IQ chunk -> fingerprint image: mirror the BPSK constellation onto I >= 0,
// trim per-axis quantile tails, and bin the rest into a square 2-D histogram.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "hideprint/channel.hpp"
#include "hideprint/common.hpp"
#include "hideprint/rfchain.hpp"

namespace hideprint::imaging {

struct ImagingConfig {
  std::size_t chunk_size = 100'000;
  int image_side = 64;
  double lower_q = 0.005;
  double upper_q = 0.995;
  std::uint32_t pixel_cap = 255;

  void validate() const;
};

inline constexpr std::uint32_t kUncapped = std::numeric_limits<std::uint32_t>::max();

struct ImageMeta {
  int device_id = -1;
  rfchain::NoiseKind noise_kind = rfchain::NoiseKind::None;
  double sigma = 0.0;
  channel::LinkKind link = channel::LinkKind::Wired;
};

struct FingerprintImage {
  int side = 0;
  std::vector<std::uint32_t> pixels;  // row-major, row = Q bin (row 0 = lowest Q)
  ImageMeta meta;

  std::uint32_t at(int row, int col) const { return pixels[std::size_t(row) * side + col]; }
  std::uint64_t pixel_sum() const;
};

/// Splits into floor(len / chunk_size) consecutive chunks; the remainder is dropped.
std::vector<std::span<const Complex>> chunk(std::span<const Complex> samples,
                                            const ImagingConfig& cfg);

struct PointSet {
  std::vector<Complex> points;
  bool degenerate = false;  // all points identical; returned mirrored but untrimmed
};

/// Maps I < 0 points through (I, Q) -> (-I, -Q), then removes, on each axis,
/// the round(lower_q * n) lowest and round((1 - upper_q) * n) highest points by
/// rank. A point removed on either axis is dropped once.
PointSet mirror_and_trim(std::span<const Complex> chunk, const ImagingConfig& cfg);

/// Per-axis rank cut used by mirror_and_trim: values of the lowest and highest
/// retained ranks on that axis.
struct AxisBounds {
  double lo = 0.0, hi = 0.0;
};
AxisBounds trim_bounds(std::span<const double> values, double lower_q, double upper_q);

/// Bivariate histogram over the bounding box of the points, image_side bins per
/// axis, counts clipped at pixel_cap. A set of identical points lands in the
/// centre pixel; a box with zero extent on exactly one axis is rejected.
FingerprintImage to_image(std::span<const Complex> points, const ImagingConfig& cfg);

/// chunk -> mirror_and_trim -> to_image for every full chunk.
std::vector<FingerprintImage> images_from_samples(std::span<const Complex> samples,
                                                  const ImagingConfig& cfg, const ImageMeta& meta);

/// Pixels scaled by 1 / pixel_cap, the representation the models consume.
std::vector<double> normalized_pixels(const FingerprintImage& image, std::uint32_t pixel_cap);

/// 8-bit binary PGM (P5) with a JSON sidecar (<path>.json) holding the meta.
void write_pgm(const std::filesystem::path& path, const FingerprintImage& image);
FingerprintImage read_pgm(const std::filesystem::path& path);

}  // namespace hideprint::imaging
