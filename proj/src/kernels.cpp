#include "pllvi/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pllvi::kernels {
namespace {

// Below this many multiply-adds a kernel stays on the calling thread.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

// One output row of C = A * B. Shared by the serial and parallel drivers so
// both execute the same instruction sequence per element.
inline void nn_row(const double* a_row, const double* b, double* c_row, std::size_t k, std::size_t n,
                   bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    if (av == 0.0) continue;
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

// One output row of C = A * B^T: dot products of a_row with the rows of B.
inline void nt_row(const double* a_row, const double* b, double* c_row, std::size_t k, std::size_t n,
                   bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* b_row = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
    c_row[j] = accumulate ? c_row[j] + acc : acc;
  }
}

// One output row of C = A^T * B (row i of C gathers column i of A).
inline void tn_row(const double* a, const double* b, double* c_row, std::size_t i, std::size_t m, std::size_t k,
                   std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p * m + i];
    if (av == 0.0) continue;
    const double* b_row = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

inline void dist_row(const double* q, const double* refs, double* out, std::size_t n_ref, std::size_t dim) {
  for (std::size_t r = 0; r < n_ref; ++r) {
    const double* ref = refs + r * dim;
    double acc = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
      const double diff = q[t] - ref[t];
      acc += diff * diff;
    }
    out[r] = acc;
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  const bool par = m * k * n >= kParallelWork;
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (par)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    nn_row(a.data() + r * k, b.data(), c.data() + r * n, k, n, accumulate);
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  const bool par = m * k * n >= kParallelWork;
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (par)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    nt_row(a.data() + r * k, b.data(), c.data() + r * n, k, n, accumulate);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  const bool par = m * k * n >= kParallelWork;
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (par)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    tn_row(a.data(), b.data(), c.data() + r * n, r, m, k, n, accumulate);
  }
}

void pairwise_sq_dist(std::span<const double> queries, std::span<const double> refs, std::span<double> out,
                      std::size_t n_query, std::size_t n_ref, std::size_t dim) {
  const bool par = n_query * n_ref * dim >= kParallelWork;
  const auto rows = static_cast<long long>(n_query);
#pragma omp parallel for schedule(static) if (par)
  for (long long i = 0; i < rows; ++i) {
    const auto q = static_cast<std::size_t>(i);
    dist_row(queries.data() + q * dim, refs.data(), out.data() + q * n_ref, n_ref, dim);
  }
}

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) nn_row(a.data() + i * k, b.data(), c.data() + i * n, k, n, accumulate);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) nt_row(a.data() + i * k, b.data(), c.data() + i * n, k, n, accumulate);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) tn_row(a.data(), b.data(), c.data() + i * n, i, m, k, n, accumulate);
}

void pairwise_sq_dist(std::span<const double> queries, std::span<const double> refs, std::span<double> out,
                      std::size_t n_query, std::size_t n_ref, std::size_t dim) {
  for (std::size_t q = 0; q < n_query; ++q)
    dist_row(queries.data() + q * dim, refs.data(), out.data() + q * n_ref, n_ref, dim);
}

}  // namespace serial
}  // namespace pllvi::kernels
