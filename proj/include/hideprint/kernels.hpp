#pragma once

// Data-parallel inner loops used across the pipeline. Every kernel exists
// twice: `serial` is the reference implementation kept for testing and
// benchmarking, `omp` is the OpenMP version used by the library. Both
// partition work over independent outputs and accumulate each output in the
// same order, so their results are bit-identical for any thread count.

#include <cstddef>
#include <cstdint>
#include <span>

#include "hideprint/common.hpp"

namespace hideprint::kernels {

/// Length of a full convolution of n inputs with L taps, keeping every
/// `decim`-th output starting at index 0.
std::size_t fir_output_length(std::size_t n, std::size_t taps, std::size_t decim);

/// Axis-aligned histogram box. Values on `hi` fall in the last bin.
struct Box {
  double i_lo = 0.0, i_hi = 1.0;
  double q_lo = 0.0, q_hi = 1.0;
};

/// Bin index of `x` in [lo, hi] split into `bins` half-open bins, the last one
/// closed. A zero-width range maps everything to the middle bin.
int bin_index(double x, double lo, double hi, int bins);

/// Geometry of a batched, valid-padding, stride-1 convolution. Inputs are laid
/// out [batch][channels][height][width]; weights [filters][channels][kh][kw].
struct ConvShape {
  int batch = 1, channels = 1, height = 1, width = 1;
  int filters = 1, kh = 1, kw = 1;

  int out_h() const { return height - kh + 1; }
  int out_w() const { return width - kw + 1; }
  std::size_t in_size() const { return std::size_t(channels) * height * width; }
  std::size_t out_size() const { return std::size_t(filters) * out_h() * out_w(); }
  std::size_t weight_size() const { return std::size_t(filters) * channels * kh * kw; }
};

namespace serial {
// out[m] = sum_k taps[k] * in[m*decim - k] (full convolution, decimated).
void fir_decimate(std::span<const Complex> in, std::span<const double> taps, std::size_t decim,
                  std::span<Complex> out);
// Zero-stuffing upsampler followed by FIR; out has n*sps + L - 1 samples.
void upsample_fir(std::span<const Complex> symbols, std::span<const double> taps,
                  std::size_t sps, std::span<Complex> out);
// Adds one count per point (row = Q bin, col = I bin).
void histogram2d(std::span<const Complex> points, const Box& box, int side,
                 std::span<std::uint64_t> counts);
// Y[b][o] = bias[o] + sum_i W[o][i] X[b][i]
void dense_forward(std::span<const double> w, std::span<const double> bias,
                   std::span<const double> x, std::span<double> y, int batch, int in, int out);
// Accumulates dW and dbias; writes dX when it is non-empty.
void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw, std::span<double> dbias,
                    std::span<double> dx, int batch, int in, int out);
void conv2d_forward(const ConvShape& s, std::span<const double> w, std::span<const double> bias,
                    std::span<const double> x, std::span<double> y);
// Accumulates dW and dbias. No input gradient: convolutions are always the first layer.
void conv2d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> dbias);
}  // namespace serial

// Same contracts as serial::.
namespace omp {
// out[m] = sum_k taps[k] * in[m*decim - k] (full convolution, decimated).
void fir_decimate(std::span<const Complex> in, std::span<const double> taps, std::size_t decim,
                  std::span<Complex> out);
// Zero-stuffing upsampler followed by FIR; out has n*sps + L - 1 samples.
void upsample_fir(std::span<const Complex> symbols, std::span<const double> taps,
                  std::size_t sps, std::span<Complex> out);
// Adds one count per point (row = Q bin, col = I bin).
void histogram2d(std::span<const Complex> points, const Box& box, int side,
                 std::span<std::uint64_t> counts);
// Y[b][o] = bias[o] + sum_i W[o][i] X[b][i]
void dense_forward(std::span<const double> w, std::span<const double> bias,
                   std::span<const double> x, std::span<double> y, int batch, int in, int out);
// Accumulates dW and dbias; writes dX when it is non-empty.
void dense_backward(std::span<const double> w, std::span<const double> x,
                    std::span<const double> dy, std::span<double> dw, std::span<double> dbias,
                    std::span<double> dx, int batch, int in, int out);
void conv2d_forward(const ConvShape& s, std::span<const double> w, std::span<const double> bias,
                    std::span<const double> x, std::span<double> y);
// Accumulates dW and dbias. No input gradient: convolutions are always the first layer.
void conv2d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> dbias);
}  // namespace omp

}  // namespace hideprint::kernels
