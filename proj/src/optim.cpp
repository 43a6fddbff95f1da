#include "fedad/optim.hpp"

#include <cmath>

#include "fedad/error.hpp"

namespace fedad {

AdamState AdamState::create(std::size_t n, double lr, double weight_decay) {
  if (!(lr >= 0.0)) throw ConfigError("Adam: learning rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("Adam: weight decay must be >= 0");
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.lr = lr;
  s.weight_decay = weight_decay;
  return s;
}

void AdamState::reset() {
  std::fill(m.begin(), m.end(), 0.0);
  std::fill(v.begin(), v.end(), 0.0);
  step = 0;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw UsageError("adam_step: length mismatch (params " + std::to_string(params.size()) +
                     ", grads " + std::to_string(grads.size()) + ", state " +
                     std::to_string(state.m.size()) + ")");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double decay = state.lr * state.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= decay * params[i];
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

double l2_distance_sq(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw UsageError("l2_distance_sq: length mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace fedad
