#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fedad {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState create(std::size_t n, double lr, double weight_decay);
  void reset();  // zero moments and step; keep hyperparameters
};

// One Adam update with decoupled weight decay:
//   p <- p - lr*wd*p, then bias-corrected Adam on g.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// Sum of squared differences.
double l2_distance_sq(std::span<const double> a, std::span<const double> b);

}  // namespace fedad
