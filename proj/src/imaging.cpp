#include "hideprint/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hideprint/kernels.hpp"
#include "json.hpp"

namespace hideprint::imaging {

void ImagingConfig::validate() const {
  if (!(lower_q >= 0.0 && lower_q < upper_q && upper_q <= 1.0))
    throw ValidationError("imaging: need 0 <= lower_q < upper_q <= 1");
  if (image_side < 8) throw ValidationError("imaging: image_side must be >= 8");
  if (chunk_size < std::size_t(image_side) * std::size_t(image_side))
    throw ValidationError("imaging: chunk_size must be >= image_side^2");
  if (pixel_cap == 0) throw ValidationError("imaging: pixel_cap must be >= 1");
}

std::uint64_t FingerprintImage::pixel_sum() const {
  return std::accumulate(pixels.begin(), pixels.end(), std::uint64_t{0});
}

std::vector<std::span<const Complex>> chunk(std::span<const Complex> samples,
                                            const ImagingConfig& cfg) {
  cfg.validate();
  if (samples.size() < cfg.chunk_size)
    throw ValidationError("chunk: input shorter than one chunk");
  std::vector<std::span<const Complex>> out;
  for (std::size_t k = 0; k + cfg.chunk_size <= samples.size(); k += cfg.chunk_size)
    out.push_back(samples.subspan(k, cfg.chunk_size));
  return out;
}

namespace {

std::pair<std::size_t, std::size_t> tail_counts(std::size_t n, double lower_q, double upper_q) {
  const auto lo = static_cast<std::size_t>(std::llround(lower_q * double(n)));
  const auto hi = static_cast<std::size_t>(std::llround((1.0 - upper_q) * double(n)));
  return {lo, hi};
}

// Marks the `lo` lowest and `hi` highest points by rank (ties broken by index).
template <typename Key>
void mark_tails(std::size_t n, std::size_t lo, std::size_t hi, Key key, std::vector<char>& removed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto less = [&](std::size_t a, std::size_t b) {
    const double ka = key(a), kb = key(b);
    return ka < kb || (ka == kb && a < b);
  };
  if (lo > 0) {
    std::nth_element(idx.begin(), idx.begin() + std::ptrdiff_t(lo - 1), idx.end(), less);
    for (std::size_t k = 0; k < lo; ++k) removed[idx[k]] = 1;
  }
  if (hi > 0) {
    std::nth_element(idx.begin(), idx.begin() + std::ptrdiff_t(n - hi), idx.end(), less);
    for (std::size_t k = n - hi; k < n; ++k) removed[idx[k]] = 1;
  }
}

}  // namespace

AxisBounds trim_bounds(std::span<const double> values, double lower_q, double upper_q) {
  if (values.empty()) throw ValidationError("trim_bounds: empty input");
  const auto [lo, hi] = tail_counts(values.size(), lower_q, upper_q);
  if (lo + hi >= values.size()) throw ValidationError("trim_bounds: trims every point");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return {v[lo], v[v.size() - 1 - hi]};
}

PointSet mirror_and_trim(std::span<const Complex> chunk, const ImagingConfig& cfg) {
  cfg.validate();
  if (chunk.empty()) throw ValidationError("mirror_and_trim: empty chunk");
  PointSet out;
  std::vector<Complex> mirrored(chunk.begin(), chunk.end());
  for (Complex& p : mirrored)
    if (p.real() < 0.0) p = -p;

  const bool identical = std::all_of(mirrored.begin(), mirrored.end(),
                                     [&](const Complex& p) { return p == mirrored.front(); });
  if (identical) {
    out.points = std::move(mirrored);
    out.degenerate = true;
    return out;
  }

  const std::size_t n = mirrored.size();
  const auto [lo, hi] = tail_counts(n, cfg.lower_q, cfg.upper_q);
  std::vector<char> removed(n, 0);
  mark_tails(n, lo, hi, [&](std::size_t k) { return mirrored[k].real(); }, removed);
  mark_tails(n, lo, hi, [&](std::size_t k) { return mirrored[k].imag(); }, removed);

  out.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    if (!removed[k]) out.points.push_back(mirrored[k]);
  return out;
}

FingerprintImage to_image(std::span<const Complex> points, const ImagingConfig& cfg) {
  cfg.validate();
  if (points.empty()) throw ValidationError("to_image: empty point set");
  kernels::Box box{points[0].real(), points[0].real(), points[0].imag(), points[0].imag()};
  for (const Complex& p : points) {
    box.i_lo = std::min(box.i_lo, p.real());
    box.i_hi = std::max(box.i_hi, p.real());
    box.q_lo = std::min(box.q_lo, p.imag());
    box.q_hi = std::max(box.q_hi, p.imag());
  }
  const bool flat_i = !(box.i_hi > box.i_lo), flat_q = !(box.q_hi > box.q_lo);
  if (flat_i != flat_q) throw ValidationError("to_image: zero-area bounding box");

  const int side = cfg.image_side;
  std::vector<std::uint64_t> counts(std::size_t(side) * side, 0);
  kernels::omp::histogram2d(points, box, side, counts);

  FingerprintImage img;
  img.side = side;
  img.pixels.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k)
    img.pixels[k] = static_cast<std::uint32_t>(std::min<std::uint64_t>(counts[k], cfg.pixel_cap));
  return img;
}

std::vector<FingerprintImage> images_from_samples(std::span<const Complex> samples,
                                                  const ImagingConfig& cfg, const ImageMeta& meta) {
  std::vector<FingerprintImage> out;
  for (auto c : chunk(samples, cfg)) {
    FingerprintImage img = to_image(mirror_and_trim(c, cfg).points, cfg);
    img.meta = meta;
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<double> normalized_pixels(const FingerprintImage& image, std::uint32_t pixel_cap) {
  std::vector<double> v(image.pixels.size());
  const double k = 1.0 / double(pixel_cap);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(image.pixels[i]) * k;
  return v;
}

void write_pgm(const std::filesystem::path& path, const FingerprintImage& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("write_pgm: cannot open " + path.string());
  os << "P5\n" << image.side << ' ' << image.side << "\n255\n";
  for (std::uint32_t v : image.pixels) os.put(static_cast<char>(std::min<std::uint32_t>(v, 255)));
  if (!os) throw RuntimeFailure("write_pgm: write failed for " + path.string());

  nlohmann::json meta = {{"device_id", image.meta.device_id},
                         {"noise_kind", rfchain::to_string(image.meta.noise_kind)},
                         {"sigma", image.meta.sigma},
                         {"link", channel::to_string(image.meta.link)},
                         {"side", image.side}};
  std::ofstream js(path.string() + ".json");
  js << meta.dump(2) << '\n';
  if (!js) throw RuntimeFailure("write_pgm: sidecar write failed for " + path.string());
}

FingerprintImage read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("read_pgm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || w != h || w <= 0 || maxval != 255)
    throw ValidationError("read_pgm: unsupported PGM in " + path.string());
  is.get();
  FingerprintImage img;
  img.side = w;
  img.pixels.resize(std::size_t(w) * h);
  for (auto& p : img.pixels) {
    const int c = is.get();
    if (c == EOF) throw ValidationError("read_pgm: truncated " + path.string());
    p = static_cast<std::uint32_t>(static_cast<unsigned char>(c));
  }
  const std::filesystem::path sidecar = path.string() + ".json";
  if (std::filesystem::exists(sidecar)) {
    std::ifstream js(sidecar);
    const auto meta = nlohmann::json::parse(js);
    img.meta.device_id = meta.value("device_id", -1);
    img.meta.noise_kind = rfchain::noise_kind_from_string(meta.value("noise_kind", "none"));
    img.meta.sigma = meta.value("sigma", 0.0);
    img.meta.link = channel::link_kind_from_string(meta.value("link", "wired"));
  }
  return img;
}

}  // namespace hideprint::imaging
