#pragma once

// Per-output work units shared by the serial and OpenMP kernels. Keeping the
// arithmetic in one place is what makes the two variants bit-identical.

#include <algorithm>
#include <cstddef>
#include <span>

#include "hideprint/kernels.hpp"

namespace hideprint::kernels::detail {

inline Complex fir_tap_sum(std::span<const Complex> in, std::span<const double> taps,
                           std::size_t idx) {
  const std::size_t n = in.size();
  const std::size_t k_lo = idx >= n ? idx - (n - 1) : 0;
  const std::size_t k_hi = std::min(taps.size() - 1, idx);
  double re = 0.0, im = 0.0;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const Complex v = in[idx - k];
    re += taps[k] * v.real();
    im += taps[k] * v.imag();
  }
  return {re, im};
}

inline Complex upsample_tap_sum(std::span<const Complex> symbols, std::span<const double> taps,
                                std::size_t sps, std::size_t m) {
  const std::size_t L = taps.size();
  // symbols k with 0 <= m - k*sps < L
  const std::size_t k_hi = std::min(symbols.size() - 1, m / sps);
  const std::size_t k_lo = m + 1 > L ? (m + 1 - L + sps - 1) / sps : 0;
  double re = 0.0, im = 0.0;
  for (std::size_t k = k_lo; k <= k_hi && k_lo <= k_hi; ++k) {
    const double h = taps[m - k * sps];
    re += h * symbols[k].real();
    im += h * symbols[k].imag();
  }
  return {re, im};
}

inline void dense_row(std::span<const double> w, std::span<const double> bias,
                      std::span<const double> x, std::span<double> y, int b, int o, int in,
                      int out) {
  const double* wr = w.data() + std::size_t(o) * in;
  const double* xr = x.data() + std::size_t(b) * in;
  double acc = bias[o];
  for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
  y[std::size_t(b) * out + o] = acc;
}

inline void dense_weight_grad_row(std::span<const double> x, std::span<const double> dy,
                                  std::span<double> dw, std::span<double> dbias, int o,
                                  int batch, int in, int out) {
  double* dwr = dw.data() + std::size_t(o) * in;
  double db = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double g = dy[std::size_t(b) * out + o];
    if (g == 0.0) continue;
    const double* xr = x.data() + std::size_t(b) * in;
    for (int i = 0; i < in; ++i) dwr[i] += g * xr[i];
    db += g;
  }
  dbias[o] += db;
}

inline void dense_input_grad_row(std::span<const double> w, std::span<const double> dy,
                                 std::span<double> dx, int b, int in, int out) {
  double* dxr = dx.data() + std::size_t(b) * in;
  std::fill(dxr, dxr + in, 0.0);
  for (int o = 0; o < out; ++o) {
    const double g = dy[std::size_t(b) * out + o];
    if (g == 0.0) continue;
    const double* wr = w.data() + std::size_t(o) * in;
    for (int i = 0; i < in; ++i) dxr[i] += g * wr[i];
  }
}

inline void conv_plane(const ConvShape& s, std::span<const double> w,
                       std::span<const double> bias, std::span<const double> x,
                       std::span<double> y, int b, int f) {
  const int oh = s.out_h(), ow = s.out_w();
  double* out = y.data() + std::size_t(b) * s.out_size() + std::size_t(f) * oh * ow;
  std::fill(out, out + std::size_t(oh) * ow, bias[f]);
  const double* xb = x.data() + std::size_t(b) * s.in_size();
  for (int c = 0; c < s.channels; ++c) {
    const double* xc = xb + std::size_t(c) * s.height * s.width;
    for (int ky = 0; ky < s.kh; ++ky) {
      for (int kx = 0; kx < s.kw; ++kx) {
        const double wv = w[((std::size_t(f) * s.channels + c) * s.kh + ky) * s.kw + kx];
        for (int oy = 0; oy < oh; ++oy) {
          const double* xrow = xc + std::size_t(oy + ky) * s.width + kx;
          double* orow = out + std::size_t(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * xrow[ox];
        }
      }
    }
  }
}

inline void conv_filter_grad(const ConvShape& s, std::span<const double> x,
                             std::span<const double> dy, std::span<double> dw,
                             std::span<double> dbias, int f) {
  const int oh = s.out_h(), ow = s.out_w();
  for (int b = 0; b < s.batch; ++b) {
    const double* g = dy.data() + std::size_t(b) * s.out_size() + std::size_t(f) * oh * ow;
    double db = 0.0;
    for (std::size_t p = 0; p < std::size_t(oh) * ow; ++p) db += g[p];
    dbias[f] += db;
    const double* xb = x.data() + std::size_t(b) * s.in_size();
    for (int c = 0; c < s.channels; ++c) {
      const double* xc = xb + std::size_t(c) * s.height * s.width;
      for (int ky = 0; ky < s.kh; ++ky) {
        for (int kx = 0; kx < s.kw; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const double* xrow = xc + std::size_t(oy + ky) * s.width + kx;
            const double* grow = g + std::size_t(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) acc += grow[ox] * xrow[ox];
          }
          dw[((std::size_t(f) * s.channels + c) * s.kh + ky) * s.kw + kx] += acc;
        }
      }
    }
  }
}

}  // namespace hideprint::kernels::detail
