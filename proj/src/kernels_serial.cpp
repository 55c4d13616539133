#include <cmath>

#include "hideprint/kernels.hpp"
#include "kernels_detail.hpp"

namespace hideprint::kernels {

std::size_t fir_output_length(std::size_t n, std::size_t taps, std::size_t decim) {
  if (n == 0 || taps == 0 || decim == 0) return 0;
  const std::size_t full = n + taps - 1;
  return (full + decim - 1) / decim;
}

int bin_index(double x, double lo, double hi, int bins) {
  if (!(hi > lo)) return bins / 2;
  const double t = (x - lo) / (hi - lo) * bins;
  if (t <= 0.0) return 0;
  const int k = static_cast<int>(std::floor(t));
  return k >= bins ? bins - 1 : k;
}

namespace serial {

void fir_decimate(std::span<const Complex> in, std::span<const double> taps, std::size_t decim,
                  std::span<Complex> out) {
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = detail::fir_tap_sum(in, taps, m * decim);
}

void upsample_fir(std::span<const Complex> symbols, std::span<const double> taps,
                  std::size_t sps, std::span<Complex> out) {
  for (std::size_t m = 0; m < out.size(); ++m)
    out[m] = detail::upsample_tap_sum(symbols, taps, sps, m);
}

void histogram2d(std::span<const Complex> points, const Box& box, int side,
                 std::span<std::uint64_t> counts) {
  for (const Complex& p : points) {
    const int r = bin_index(p.imag(), box.q_lo, box.q_hi, side);
    const int c = bin_index(p.real(), box.i_lo, box.i_hi, side);
    ++counts[std::size_t(r) * side + c];
  }
}

void dense_forward(std::span<const double> w, std::span<const double> bias,
                   std::span<const double> x, std::span<double> y, int batch, int in, int out) {
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < out; ++o) detail::dense_row(w, bias, x, y, b, o, in, out);
}

void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw, std::span<double> dbias,
                    std::span<double> dx, int batch, int in, int out) {
  for (int o = 0; o < out; ++o) detail::dense_weight_grad_row(x, dy, dw, dbias, o, batch, in, out);
  if (!dx.empty())
    for (int b = 0; b < batch; ++b) detail::dense_input_grad_row(w, dy, dx, b, in, out);
}

void conv2d_forward(const ConvShape& s, std::span<const double> w, std::span<const double> bias,
                    std::span<const double> x, std::span<double> y) {
  for (int b = 0; b < s.batch; ++b)
    for (int f = 0; f < s.filters; ++f) detail::conv_plane(s, w, bias, x, y, b, f);
}

void conv2d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> dbias) {
  for (int f = 0; f < s.filters; ++f) detail::conv_filter_grad(s, x, dy, dw, dbias, f);
}

}  // namespace serial
}  // namespace hideprint::kernels
