#include "fedad/kernels.hpp"

#include <algorithm>
#include <string>

#include "fedad/error.hpp"

namespace fedad::kernels {

namespace {

void check_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
}

// Row kernels. Each writes exactly one output row; both variants call these.

inline void row_nn(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  double* out = c.row(i).data();
  std::fill(out, out + m, 0.0);
  const double* arow = a.row(i).data();
  for (std::size_t p = 0; p < inner; ++p) {
    const double s = arow[p];
    const double* brow = b.row(p).data();
    for (std::size_t j = 0; j < m; ++j) out[j] += s * brow[j];
  }
}

inline void row_tn(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.rows();
  const std::size_t m = b.cols();
  double* out = c.row(i).data();
  std::fill(out, out + m, 0.0);
  for (std::size_t p = 0; p < inner; ++p) {
    const double s = a(p, i);
    const double* brow = b.row(p).data();
    for (std::size_t j = 0; j < m; ++j) out[j] += s * brow[j];
  }
}

inline void row_nt(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t m = b.rows();
  double* out = c.row(i).data();
  const double* arow = a.row(i).data();
  for (std::size_t j = 0; j < m; ++j) {
    const double* brow = b.row(j).data();
    double acc = 0.0;
    for (std::size_t p = 0; p < inner; ++p) acc += arow[p] * brow[p];
    out[j] = acc;
  }
}

void prepare(Matrix& c, std::size_t rows, std::size_t cols) {
  if (c.rows() != rows || c.cols() != cols) c = Matrix(rows, cols);
}

}  // namespace

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  check_shape(a.cols() == b.rows(), "gemm_nn", a, b);
  prepare(c, a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) row_nn(a, b, c, i);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  check_shape(a.rows() == b.rows(), "gemm_tn", a, b);
  prepare(c, a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) row_tn(a, b, c, i);
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  check_shape(a.cols() == b.cols(), "gemm_nt", a, b);
  prepare(c, a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) row_nt(a, b, c, i);
}

}  // namespace serial

namespace omp {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  check_shape(a.cols() == b.rows(), "gemm_nn", a, b);
  prepare(c, a.rows(), b.cols());
  const auto n = static_cast<long>(a.rows());
  const bool big = a.rows() * a.cols() * b.cols() >= kParallelWorkThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < n; ++i) row_nn(a, b, c, static_cast<std::size_t>(i));
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  check_shape(a.rows() == b.rows(), "gemm_tn", a, b);
  prepare(c, a.cols(), b.cols());
  const auto n = static_cast<long>(a.cols());
  const bool big = a.rows() * a.cols() * b.cols() >= kParallelWorkThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < n; ++i) row_tn(a, b, c, static_cast<std::size_t>(i));
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  check_shape(a.cols() == b.cols(), "gemm_nt", a, b);
  prepare(c, a.rows(), b.rows());
  const auto n = static_cast<long>(a.rows());
  const bool big = a.rows() * a.cols() * b.rows() >= kParallelWorkThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < n; ++i) row_nt(a, b, c, static_cast<std::size_t>(i));
}

}  // namespace omp

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c;
  omp::gemm_nn(a, b, c);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c;
  omp::gemm_tn(a, b, c);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c;
  omp::gemm_nt(a, b, c);
  return c;
}

}  // namespace fedad::kernels
