#pragma once

// Shared fixtures for the test binaries: synthetic data and a
// central-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include <unistd.h>

#include "fedad/data.hpp"
#include "fedad/matrix.hpp"
#include "fedad/mlp.hpp"
#include "fedad/random.hpp"

namespace fedad::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

// Inliers near 0.3, anomalies near 0.75, all clipped to [0, 1]. Every tenth
// row (rounded by `anomaly_ratio`) is an anomaly.
inline Dataset synthetic_dataset(std::size_t n, std::size_t d, double anomaly_ratio, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.x = Matrix(n, d);
  ds.y.assign(n, 0);
  ds.n_features_raw = d;
  const auto n_anom = static_cast<std::size_t>(std::llround(anomaly_ratio * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    const bool anomaly = i < n_anom;
    ds.y[i] = anomaly ? 1 : 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double center = anomaly ? 0.75 : 0.3 + 0.02 * static_cast<double>(j % 3);
      ds.x(i, j) = std::clamp(center + 0.1 * rng.normal(), 0.0, 1.0);
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(std::span(order));
  return ds.subset(order);
}

// Largest per-entry |g_fd - g| / max(|g_fd|, |g|, floor) using central
// differences of step h.
// Moves freshly initialized parameters (zero biases) off the ReLU kinks and
// the zero-embedding points so finite differences see a smooth objective.
inline void jitter(ParamVector& params, std::uint64_t seed, double amount = 0.05) {
  Rng rng(seed);
  for (double& v : params) v += rng.uniform(-amount, amount);
}

inline double fd_relative_error(const std::function<double(std::span<const double>)>& f, ParamVector params,
                                const ParamVector& grad, double h = 1e-5, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f(params);
    params[i] = keep - h;
    const double down = f(params);
    params[i] = keep;
    const double g_fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(g_fd), std::abs(grad[i]), floor});
    worst = std::max(worst, std::abs(g_fd - grad[i]) / scale);
  }
  return worst;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fedad_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::filesystem::path source_dir() {
  const char* s = std::getenv("FEDAD_SOURCE_DIR");
  return s ? std::filesystem::path(s) : std::filesystem::current_path();
}

}  // namespace fedad::testing
