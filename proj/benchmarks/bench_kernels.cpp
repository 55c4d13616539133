// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>
#include <vector>

#include "hideprint/kernels.hpp"

using namespace hideprint;
namespace k = hideprint::kernels;

namespace {

std::vector<double> reals(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

std::vector<Complex> complexes(std::size_t n, std::uint64_t seed) {
  const auto re = reals(n, seed), im = reals(n, seed + 1);
  std::vector<Complex> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = {re[i], im[i]};
  return v;
}

template <auto Fn>
void BM_fir_decimate(benchmark::State& state) {
  const auto in = complexes(std::size_t(state.range(0)), 1);
  const auto taps = reals(45, 2);
  std::vector<Complex> out(k::fir_output_length(in.size(), taps.size(), 2));
  for (auto _ : state) {
    Fn(in, taps, 2, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_upsample_fir(benchmark::State& state) {
  const auto sym = complexes(std::size_t(state.range(0)), 3);
  const auto taps = reals(45, 4);
  std::vector<Complex> out(sym.size() * 4 + taps.size() - 1);
  for (auto _ : state) {
    Fn(sym, taps, 4, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_histogram2d(benchmark::State& state) {
  auto pts = complexes(std::size_t(state.range(0)), 5);
  for (auto& p : pts) p = {std::clamp(p.real(), -3.0, 3.0), std::clamp(p.imag(), -3.0, 3.0)};
  std::vector<std::uint64_t> counts(64 * 64);
  for (auto _ : state) {
    std::fill(counts.begin(), counts.end(), 0);
    Fn(pts, k::Box{-3, 3, -3, 3}, 64, counts);
    benchmark::DoNotOptimize(counts.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <auto Fn>
void BM_dense_forward(benchmark::State& state) {
  const int batch = int(state.range(0)), in = 1800, out = 128;
  const auto w = reals(std::size_t(in) * out, 6), b = reals(out, 7), x = reals(std::size_t(batch) * in, 8);
  std::vector<double> y(std::size_t(batch) * out);
  for (auto _ : state) {
    Fn(w, b, x, y, batch, in, out);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Fn>
void BM_conv2d_forward(benchmark::State& state) {
  k::ConvShape s{int(state.range(0)), 1, 64, 64, 8, 5, 5};
  const auto w = reals(s.weight_size(), 9), b = reals(8, 10), x = reals(std::size_t(s.batch) * s.in_size(), 11);
  std::vector<double> y(std::size_t(s.batch) * s.out_size());
  for (auto _ : state) {
    Fn(s, w, b, x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Fn>
void BM_conv2d_backward(benchmark::State& state) {
  k::ConvShape s{int(state.range(0)), 1, 64, 64, 8, 5, 5};
  const auto x = reals(std::size_t(s.batch) * s.in_size(), 12), dy = reals(std::size_t(s.batch) * s.out_size(), 13);
  std::vector<double> dw(s.weight_size()), db(8);
  for (auto _ : state) {
    Fn(s, x, dy, dw, db);
    benchmark::DoNotOptimize(dw.data());
  }
}

}  // namespace

BENCHMARK(BM_fir_decimate<k::serial::fir_decimate>)->Name("fir_decimate/serial")->Arg(1 << 18);
BENCHMARK(BM_fir_decimate<k::omp::fir_decimate>)->Name("fir_decimate/omp")->Arg(1 << 18);
BENCHMARK(BM_upsample_fir<k::serial::upsample_fir>)->Name("upsample_fir/serial")->Arg(1 << 16);
BENCHMARK(BM_upsample_fir<k::omp::upsample_fir>)->Name("upsample_fir/omp")->Arg(1 << 16);
BENCHMARK(BM_histogram2d<k::serial::histogram2d>)->Name("histogram2d/serial")->Arg(100'000);
BENCHMARK(BM_histogram2d<k::omp::histogram2d>)->Name("histogram2d/omp")->Arg(100'000);
BENCHMARK(BM_dense_forward<k::serial::dense_forward>)->Name("dense_forward/serial")->Arg(16);
BENCHMARK(BM_dense_forward<k::omp::dense_forward>)->Name("dense_forward/omp")->Arg(16);
BENCHMARK(BM_conv2d_forward<k::serial::conv2d_forward>)->Name("conv2d_forward/serial")->Arg(16);
BENCHMARK(BM_conv2d_forward<k::omp::conv2d_forward>)->Name("conv2d_forward/omp")->Arg(16);
BENCHMARK(BM_conv2d_backward<k::serial::conv2d_backward>)->Name("conv2d_backward/serial")->Arg(16);
BENCHMARK(BM_conv2d_backward<k::omp::conv2d_backward>)->Name("conv2d_backward/omp")->Arg(16);

BENCHMARK_MAIN();
