#include <gtest/gtest.h>

#include "fedad/error.hpp"
#include "fedad/mlp.hpp"
#include "testing.hpp"

using namespace fedad;
using fedad::testing::fd_relative_error;
using fedad::testing::random_matrix;

namespace {

double act(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::linear: return x;
  }
  return x;
}

// Per-element loop over the documented layout: W (fan_in x fan_out) then b.
Matrix loop_forward(const MlpSpec& spec, const ParamVector& p, const Matrix& x) {
  Matrix cur = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t fi = spec.widths[l], fo = spec.widths[l + 1];
    Matrix next(cur.rows(), fo);
    for (std::size_t r = 0; r < cur.rows(); ++r) {
      for (std::size_t j = 0; j < fo; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < fi; ++i) s += cur(r, i) * p[off + i * fo + j];
        if (spec.use_bias[l]) s += p[off + fi * fo + j];
        next(r, j) = act(spec.activations[l], s);
      }
    }
    off += fi * fo + (spec.use_bias[l] ? fo : 0);
    cur = next;
  }
  return cur;
}

MlpSpec random_spec(Rng& rng) {
  const std::size_t layers = 1 + rng.below(3);
  std::vector<std::size_t> widths;
  for (std::size_t i = 0; i <= layers; ++i) widths.push_back(1 + rng.below(6));
  MlpSpec s = MlpSpec::make(widths);
  const Activation acts[] = {Activation::relu, Activation::tanh, Activation::sigmoid, Activation::linear};
  for (auto& a : s.activations) a = acts[rng.below(4)];
  for (std::size_t l = 0; l < layers; ++l) s.use_bias[l] = rng.below(2) == 1;
  return s;
}

}  // namespace

TEST(Mlp, IdentityLinearLayer) {
  const auto spec = MlpSpec::make({2, 2}, Activation::relu, Activation::linear, false);
  const ParamVector p{1, 0, 0, 1};
  EXPECT_EQ(forward(spec, p, Matrix{{1, 2}}), (Matrix{{1, 2}}));
}

TEST(Mlp, ReluSignCutoff) {
  const auto spec = MlpSpec::make({2, 1}, Activation::relu, Activation::relu, false);
  const ParamVector p{1, -1};
  EXPECT_EQ(forward(spec, p, Matrix{{2, 3}}), (Matrix{{0}}));
}

TEST(Mlp, ForwardMatchesLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spec = random_spec(rng);
    ParamVector p(spec.param_count());
    for (auto& v : p) v = rng.uniform(-1, 1);
    const Matrix x = random_matrix(1 + rng.below(8), spec.input_width(), rng);
    const Matrix got = forward(spec, p, x);
    const Matrix want = loop_forward(spec, p, x);
    ASSERT_EQ(got.rows(), want.rows());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
  }
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto spec = random_spec(rng);
    for (auto& a : spec.activations) {
      if (a == Activation::relu) a = Activation::tanh;  // smooth for differencing
    }
    ParamVector p(spec.param_count());
    for (auto& v : p) v = rng.uniform(-1, 1);
    const Matrix x = random_matrix(4, spec.input_width(), rng);
    const Matrix target = random_matrix(4, spec.output_width(), rng);
    // loss = 0.5 * sum (y - t)^2
    auto loss = [&](std::span<const double> params) {
      const Matrix y = forward(spec, params, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += 0.5 * std::pow(y.values()[i] - target.values()[i], 2);
      return s;
    };
    MlpCache cache;
    const Matrix y = forward(spec, p, x, &cache);
    Matrix gy(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i) gy.values()[i] = y.values()[i] - target.values()[i];
    const auto g = backward(spec, p, cache, gy);
    EXPECT_LT(fd_relative_error(loss, p, g.params), 1e-4);

    // grad_input against differences in x
    ParamVector xv(x.values().begin(), x.values().end());
    auto loss_x = [&](std::span<const double> xs) {
      Matrix xm(x.rows(), x.cols(), std::vector<double>(xs.begin(), xs.end()));
      const Matrix out = forward(spec, p, xm);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += 0.5 * std::pow(out.values()[i] - target.values()[i], 2);
      return s;
    };
    EXPECT_LT(fd_relative_error(loss_x, xv, g.input.data()), 1e-4);
  }
}

TEST(Mlp, LayoutIsWeightsThenBias) {
  const auto spec = MlpSpec::make({3, 2, 1});
  const auto slots = layer_slots(spec);
  ASSERT_EQ(slots.size(), 2u);
  EXPECT_EQ(slots[0].weight_offset, 0u);
  EXPECT_EQ(slots[0].bias_offset, 6u);
  EXPECT_EQ(slots[1].weight_offset, 8u);
  EXPECT_EQ(spec.param_count(), 11u);
  ParamVector p(11);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(i);
  const auto layers = unflatten(spec, p);
  EXPECT_EQ(layers[0].weight(1, 0), 2.0);
  EXPECT_EQ(flatten(spec, layers), p);
}

TEST(Mlp, DimensionMismatchIsConfigError) {
  const auto spec = MlpSpec::make({3, 2});
  const ParamVector p(spec.param_count(), 0.1);
  EXPECT_THROW(forward(spec, p, Matrix(2, 4)), ConfigError);
  EXPECT_THROW(forward(spec, ParamVector(3), Matrix(2, 3)), ConfigError);
}

TEST(Mlp, NonFiniteOutputNamesLayer) {
  const auto spec = MlpSpec::make({1, 1, 1}, Activation::linear);
  const ParamVector p{1e200, 0, 1e200, 0};
  try {
    forward(spec, p, Matrix{{1e200}});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos);
  }
}

TEST(Mlp, StaleCacheIsUsageError) {
  const auto spec = MlpSpec::make({2, 2});
  ParamVector p(spec.param_count(), 0.5);
  MlpCache cache;
  forward(spec, p, Matrix{{1, 2}}, &cache);
  ParamVector q = p;
  q[0] = 0.25;
  EXPECT_THROW(backward(spec, q, cache, Matrix{{1, 1}}), UsageError);
  EXPECT_THROW(backward(spec, p, cache, Matrix{{1, 1, 1}}), UsageError);
  const auto other = MlpSpec::make({2, 3});
  EXPECT_THROW(backward(other, ParamVector(other.param_count()), cache, Matrix{{1, 1, 1}}), UsageError);
  MlpCache empty;
  EXPECT_THROW(backward(spec, p, empty, Matrix{{1, 1}}), UsageError);
}

TEST(Mlp, SpecValidation) {
  EXPECT_THROW(MlpSpec::make({3}).validate(), ConfigError);
  EXPECT_THROW(MlpSpec::make({3, 0}).validate(), ConfigError);
  MlpSpec s = MlpSpec::make({3, 2});
  s.activations.push_back(Activation::relu);
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Mlp, GlorotInitBoundsAndZeroBias) {
  const auto spec = MlpSpec::make({10, 6});
  ParamVector p(spec.param_count());
  Rng rng(1);
  init_params(spec, p, rng);
  const double limit = std::sqrt(6.0 / 16.0);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_LE(std::abs(p[i]), limit);
  for (std::size_t i = 60; i < 66; ++i) EXPECT_EQ(p[i], 0.0);
}

TEST(Mlp, SameSpecSameLayout) {
  const auto a = MlpSpec::make({4, 3, 2});
  const auto b = MlpSpec::make({4, 3, 2});
  const auto sa = layer_slots(a), sb = layer_slots(b);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].weight_offset, sb[i].weight_offset);
    EXPECT_EQ(sa[i].bias_offset, sb[i].bias_offset);
  }
}

TEST(Mlp, MeanOutputLossGradient) {
  // loss = mean over B x m outputs of a linear layer: dW[i][j] = mean_r x[r][i] / m.
  Rng rng(2);
  const auto spec = MlpSpec::make({3, 2}, Activation::linear, Activation::linear, true);
  ParamVector p(spec.param_count());
  for (auto& v : p) v = rng.uniform(-1, 1);
  const Matrix x = random_matrix(5, 3, rng);
  MlpCache cache;
  forward(spec, p, x, &cache);
  const Matrix gy(5, 2, 1.0 / 10.0);
  const auto g = backward(spec, p, cache, gy);
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 5; ++r) mean += x(r, i) / 5.0;
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(g.params[i * 2 + j], mean / 2.0, 1e-15);
  }
  EXPECT_NEAR(g.params[6], 0.5, 1e-15);
}

TEST(Mlp, ZeroGradOutputGivesZeroGradients) {
  Rng rng(8);
  const auto spec = MlpSpec::make({4, 3, 2});
  ParamVector p(spec.param_count());
  for (auto& v : p) v = rng.uniform(-1, 1);
  const Matrix x = random_matrix(3, 4, rng);
  MlpCache cache;
  forward(spec, p, x, &cache);
  const auto g = backward(spec, p, cache, Matrix(3, 2, 0.0));
  for (double v : g.params) EXPECT_EQ(v, 0.0);
  for (double v : g.input.values()) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, ForwardIsDeterministic) {
  Rng rng(12);
  const auto spec = MlpSpec::make({5, 4, 3});
  ParamVector p(spec.param_count());
  for (auto& v : p) v = rng.uniform(-1, 1);
  const Matrix x = random_matrix(6, 5, rng);
  EXPECT_EQ(forward(spec, p, x), forward(spec, p, x));
}
