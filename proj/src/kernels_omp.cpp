#include <vector>

#include "hideprint/kernels.hpp"
#include "kernels_detail.hpp"

namespace hideprint::kernels::omp {

void fir_decimate(std::span<const Complex> in, std::span<const double> taps, std::size_t decim,
                  std::span<Complex> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t m = 0; m < n; ++m)
    out[m] = detail::fir_tap_sum(in, taps, std::size_t(m) * decim);
}

void upsample_fir(std::span<const Complex> symbols, std::span<const double> taps,
                  std::size_t sps, std::span<Complex> out) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t m = 0; m < n; ++m)
    out[m] = detail::upsample_tap_sum(symbols, taps, sps, std::size_t(m));
}

void histogram2d(std::span<const Complex> points, const Box& box, int side,
                 std::span<std::uint64_t> counts) {
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(counts.size(), 0);
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const int r = bin_index(points[k].imag(), box.q_lo, box.q_hi, side);
      const int c = bin_index(points[k].real(), box.i_lo, box.i_hi, side);
      ++local[std::size_t(r) * side + c];
    }
#pragma omp critical(hideprint_histogram_merge)
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += local[k];
  }
}

void dense_forward(std::span<const double> w, std::span<const double> bias,
                   std::span<const double> x, std::span<double> y, int batch, int in, int out) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < out; ++o) detail::dense_row(w, bias, x, y, b, o, in, out);
}

void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw, std::span<double> dbias,
                    std::span<double> dx, int batch, int in, int out) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) detail::dense_weight_grad_row(x, dy, dw, dbias, o, batch, in, out);
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < batch; ++b) detail::dense_input_grad_row(w, dy, dx, b, in, out);
  }
}

void conv2d_forward(const ConvShape& s, std::span<const double> w, std::span<const double> bias,
                    std::span<const double> x, std::span<double> y) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < s.batch; ++b)
    for (int f = 0; f < s.filters; ++f) detail::conv_plane(s, w, bias, x, y, b, f);
}

void conv2d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> dbias) {
#pragma omp parallel for schedule(static)
  for (int f = 0; f < s.filters; ++f) detail::conv_filter_grad(s, x, dy, dw, dbias, f);
}

}  // namespace hideprint::kernels::omp
