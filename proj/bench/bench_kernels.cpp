// Serial reference kernels against the OpenMP versions. Run with
// OMP_NUM_THREADS set to compare thread counts; the serial rows are the
// baseline.

#include <benchmark/benchmark.h>

#include <vector>

#include "pllvi/kernels.hpp"
#include "pllvi/rng.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  pllvi::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

using Gemm = void (*)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t, std::size_t,
                      std::size_t, bool);

// Square m = k = n problems; the transposed layouts have the same sizes.
template <Gemm kernel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::vector<double> a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernel(a, b, c, n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}

template <void (*kernel)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                         std::size_t, std::size_t)>
void BM_pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 16;
  const std::vector<double> q = random_values(n * dim, 3), r = random_values(4 * n * dim, 4);
  std::vector<double> out(n * 4 * n);
  for (auto _ : state) {
    kernel(q, r, out, n, 4 * n, dim);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(4 * n * n));
}

namespace k = pllvi::kernels;

BENCHMARK(BM_gemm<k::serial::gemm_nn>)->Name("gemm_nn/serial")->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_gemm<k::gemm_nn>)->Name("gemm_nn/omp")->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_gemm<k::serial::gemm_nt>)->Name("gemm_nt/serial")->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_gemm<k::gemm_nt>)->Name("gemm_nt/omp")->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_gemm<k::serial::gemm_tn>)->Name("gemm_tn/serial")->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_gemm<k::gemm_tn>)->Name("gemm_tn/omp")->RangeMultiplier(4)->Range(16, 256);
BENCHMARK(BM_pairwise<k::serial::pairwise_sq_dist>)->Name("pairwise_sq_dist/serial")->Range(64, 512);
BENCHMARK(BM_pairwise<k::pairwise_sq_dist>)->Name("pairwise_sq_dist/omp")->Range(64, 512);

}  // namespace

BENCHMARK_MAIN();
