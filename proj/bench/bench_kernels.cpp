// Serial reference vs OpenMP GEMM kernels at layer-sized shapes.
// Args: rows (batch), inner width, output width.

#include <benchmark/benchmark.h>

#include "fedad/kernels.hpp"
#include "fedad/random.hpp"

namespace {

using fedad::Matrix;
using Kernel = void (*)(const Matrix&, const Matrix&, Matrix&);

Matrix filled(std::size_t r, std::size_t c, std::uint64_t seed) {
  fedad::Rng rng(seed);
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

template <Kernel K, int Shape>
void run(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  // Shape 0: nn (n x k)(k x m); 1: tn (k x n)^T(k x m); 2: nt (n x k)(m x k)^T.
  const Matrix a = Shape == 1 ? filled(k, n, 1) : filled(n, k, 1);
  const Matrix b = Shape == 2 ? filled(m, k, 2) : filled(k, m, 2);
  Matrix c;
  for (auto _ : state) {
    K(a, b, c);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n * k * m));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 6, 3})->Args({128, 274, 137})->Args({1024, 121, 60})->Args({1024, 512, 121});
}

}  // namespace

BENCHMARK(run<fedad::kernels::serial::gemm_nn, 0>)->Name("serial/gemm_nn")->Apply(shapes);
BENCHMARK(run<fedad::kernels::omp::gemm_nn, 0>)->Name("omp/gemm_nn")->Apply(shapes);
BENCHMARK(run<fedad::kernels::serial::gemm_tn, 1>)->Name("serial/gemm_tn")->Apply(shapes);
BENCHMARK(run<fedad::kernels::omp::gemm_tn, 1>)->Name("omp/gemm_tn")->Apply(shapes);
BENCHMARK(run<fedad::kernels::serial::gemm_nt, 2>)->Name("serial/gemm_nt")->Apply(shapes);
BENCHMARK(run<fedad::kernels::omp::gemm_nt, 2>)->Name("omp/gemm_nt")->Apply(shapes);
BENCHMARK_MAIN();
