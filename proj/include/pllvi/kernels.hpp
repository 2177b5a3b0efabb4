#pragma once

#include <cstddef>
#include <span>

// Dense kernels behind the tensor ops. The default namespace holds the
// OpenMP-parallel versions; pllvi::kernels::serial holds the single-threaded
// reference implementations the tests compare against.
//
// Every parallel kernel partitions work by output element, and each output
// element is accumulated in the same order as in the serial version, so the
// two produce bit-identical results for any thread count.
//
// All matrices are row-major. Shapes: A is m x k, B is k x n, C is m x n
// (transposed operands are described per function).
namespace pllvi::kernels {

// C (+)= A * B
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false);
// C (+)= A * B^T, with B stored n x k
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false);
// C (+)= A^T * B, with A stored k x m
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false);

// out[q * n_ref + r] = || queries[q] - refs[r] ||^2, rows of width dim.
void pairwise_sq_dist(std::span<const double> queries, std::span<const double> refs, std::span<double> out,
                      std::size_t n_query, std::size_t n_ref, std::size_t dim);

// Number of threads the parallel kernels may use (omp_get_max_threads, or 1
// without OpenMP).
int max_threads();

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
             std::size_t k, std::size_t n, bool accumulate = false);
void pairwise_sq_dist(std::span<const double> queries, std::span<const double> refs, std::span<double> out,
                      std::size_t n_query, std::size_t n_ref, std::size_t dim);

}  // namespace serial

}  // namespace pllvi::kernels
