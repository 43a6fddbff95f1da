#pragma once

// Dense GEMM kernels used by the MLP forward and backward passes.
//
// Two implementations share one signature:
//   serial::  single-threaded reference, kept for tests and benchmarks
//   omp::     OpenMP row-parallel version used by the library
//
// Every output element is accumulated by the same thread in the same order in
// both variants, so the results are bit-identical for any thread count.

#include <cstddef>

#include "fedad/matrix.hpp"

namespace fedad::kernels {

namespace serial {
// C = A * B       A: n x k, B: k x m
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c);
// C = A^T * B     A: k x n, B: k x m  -> C: n x m
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c);
// C = A * B^T     A: n x k, B: m x k  -> C: n x m
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c);
}  // namespace serial

namespace omp {
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c);
}  // namespace omp

// Work (multiply-adds) below which the parallel variants stay single-threaded.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 15;

// Library entry points; dispatch to omp::.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

}  // namespace fedad::kernels
