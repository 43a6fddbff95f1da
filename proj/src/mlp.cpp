#include "fedad/mlp.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "fedad/error.hpp"
#include "fedad/kernels.hpp"
#include "fedad/random.hpp"

namespace fedad {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "?";
}

MlpSpec MlpSpec::make(std::vector<std::size_t> widths, Activation hidden, Activation output,
                      bool bias) {
  MlpSpec s;
  const std::size_t n = widths.size() < 2 ? 0 : widths.size() - 1;
  s.widths = std::move(widths);
  for (std::size_t l = 0; l < n; ++l) {
    s.activations.push_back(l + 1 == n ? output : hidden);
    s.use_bias.push_back(bias);
  }
  return s;
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layers(); ++l) {
    n += widths[l] * widths[l + 1] + (use_bias[l] ? widths[l + 1] : 0);
  }
  return n;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("MlpSpec: need at least 2 widths");
  for (auto w : widths) {
    if (w < 1) throw ConfigError("MlpSpec: widths must be >= 1");
  }
  if (activations.size() != layers() || use_bias.size() != layers()) {
    throw ConfigError("MlpSpec: activations/use_bias must have one entry per layer");
  }
}

std::vector<LayerSlot> layer_slots(const MlpSpec& spec) {
  std::vector<LayerSlot> slots;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    LayerSlot s{off, spec.widths[l], spec.widths[l + 1], spec.use_bias[l], 0};
    off += s.fan_in * s.fan_out;
    if (s.has_bias) {
      s.bias_offset = off;
      off += s.fan_out;
    }
    slots.push_back(s);
  }
  return slots;
}

ParamVector flatten(const MlpSpec& spec, const std::vector<LayerParams>& layers) {
  spec.validate();
  if (layers.size() != spec.layers()) throw UsageError("flatten: layer count mismatch");
  ParamVector out(spec.param_count());
  auto slots = layer_slots(spec);
  for (std::size_t l = 0; l < slots.size(); ++l) {
    const auto& s = slots[l];
    const auto& lp = layers[l];
    if (lp.weight.rows() != s.fan_in || lp.weight.cols() != s.fan_out) {
      throw UsageError("flatten: weight shape mismatch at layer " + std::to_string(l));
    }
    std::copy(lp.weight.values().begin(), lp.weight.values().end(), out.begin() + s.weight_offset);
    if (s.has_bias) {
      if (lp.bias.size() != s.fan_out) {
        throw UsageError("flatten: bias length mismatch at layer " + std::to_string(l));
      }
      std::copy(lp.bias.begin(), lp.bias.end(), out.begin() + s.bias_offset);
    }
  }
  return out;
}

std::vector<LayerParams> unflatten(const MlpSpec& spec, std::span<const double> params) {
  spec.validate();
  if (params.size() != spec.param_count()) throw UsageError("unflatten: length mismatch");
  std::vector<LayerParams> out;
  for (const auto& s : layer_slots(spec)) {
    LayerParams lp;
    lp.weight = Matrix(s.fan_in, s.fan_out,
                       std::vector<double>(params.begin() + s.weight_offset,
                                           params.begin() + s.weight_offset + s.fan_in * s.fan_out));
    if (s.has_bias) {
      lp.bias.assign(params.begin() + s.bias_offset, params.begin() + s.bias_offset + s.fan_out);
    }
    out.push_back(std::move(lp));
  }
  return out;
}

void init_params(const MlpSpec& spec, std::span<double> out, Rng& rng) {
  spec.validate();
  if (out.size() != spec.param_count()) throw UsageError("init_params: length mismatch");
  for (const auto& s : layer_slots(spec)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
    for (std::size_t i = 0; i < s.fan_in * s.fan_out; ++i) {
      out[s.weight_offset + i] = rng.uniform(-limit, limit);
    }
    if (s.has_bias) {
      std::fill_n(out.begin() + s.bias_offset, s.fan_out, 0.0);
    }
  }
}

std::uint64_t params_fingerprint(std::span<const double> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 0x100000001b3ULL;
  }
  return h ^ params.size();
}

namespace {

Matrix weight_matrix(const LayerSlot& s, std::span<const double> params) {
  return Matrix(s.fan_in, s.fan_out,
                std::vector<double>(params.begin() + s.weight_offset,
                                    params.begin() + s.weight_offset + s.fan_in * s.fan_out));
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::linear: return x;
  }
  return x;
}

// d act / d pre, expressed through pre and post values.
inline double activate_grad(Activation a, double pre, double post) {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - post * post;
    case Activation::sigmoid: return post * (1.0 - post);
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

}  // namespace

Matrix forward(const MlpSpec& spec, std::span<const double> params, const Matrix& batch,
               MlpCache* cache) {
  spec.validate();
  if (params.size() != spec.param_count()) {
    throw ConfigError("forward: params length " + std::to_string(params.size()) +
                      " does not match spec (" + std::to_string(spec.param_count()) + ")");
  }
  if (batch.cols() != spec.input_width()) {
    throw ConfigError("forward: batch has " + std::to_string(batch.cols()) +
                      " columns, spec expects " + std::to_string(spec.input_width()));
  }
  if (cache) {
    cache->spec = spec;
    cache->inputs.clear();
    cache->pre.clear();
    cache->valid = false;
  }

  Matrix x = batch;
  const auto slots = layer_slots(spec);
  for (std::size_t l = 0; l < slots.size(); ++l) {
    const auto& s = slots[l];
    Matrix pre = kernels::matmul(x, weight_matrix(s, params));
    if (s.has_bias) {
      const double* b = params.data() + s.bias_offset;
      for (std::size_t r = 0; r < pre.rows(); ++r) {
        auto row = pre.row(r);
        for (std::size_t j = 0; j < s.fan_out; ++j) row[j] += b[j];
      }
    }
    Matrix post(pre.rows(), pre.cols());
    const Activation act = spec.activations[l];
    auto pv = pre.values();
    auto ov = post.values();
    bool finite = true;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      ov[i] = activate(act, pv[i]);
      finite = finite && std::isfinite(ov[i]);
    }
    if (!finite) {
      throw NumericError("forward: non-finite activation in layer " + std::to_string(l) + " (" +
                         to_string(act) + ")");
    }
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(std::move(pre));
    }
    x = std::move(post);
  }
  if (cache) {
    cache->output = x;
    cache->params_tag = params_fingerprint(params);
    cache->valid = true;
  }
  return x;
}

Matrix backward_into(const MlpSpec& spec, std::span<const double> params, const MlpCache& cache,
                     const Matrix& grad_output, std::span<double> grad_params) {
  if (!cache.valid || !(cache.spec == spec) || cache.pre.size() != spec.layers()) {
    throw UsageError("backward: cache was not produced by forward() for this spec");
  }
  if (params.size() != spec.param_count() || grad_params.size() != spec.param_count()) {
    throw UsageError("backward: params/gradient length does not match spec");
  }
  if (cache.params_tag != params_fingerprint(params)) {
    throw UsageError("backward: params changed since forward() (stale cache)");
  }
  if (grad_output.rows() != cache.output.rows() || grad_output.cols() != cache.output.cols()) {
    throw UsageError("backward: grad_output shape does not match forward output");
  }

  const auto slots = layer_slots(spec);
  Matrix delta = grad_output;
  for (std::size_t li = slots.size(); li-- > 0;) {
    const auto& s = slots[li];
    const Matrix& pre = cache.pre[li];
    const Matrix& post = (li + 1 < slots.size()) ? cache.inputs[li + 1] : cache.output;
    const Activation act = spec.activations[li];
    {
      auto dv = delta.values();
      auto pv = pre.values();
      auto ov = post.values();
      for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= activate_grad(act, pv[i], ov[i]);
    }
    Matrix gw = kernels::matmul_tn(cache.inputs[li], delta);
    auto gwv = gw.values();
    for (std::size_t i = 0; i < gwv.size(); ++i) grad_params[s.weight_offset + i] += gwv[i];
    if (s.has_bias) {
      for (std::size_t r = 0; r < delta.rows(); ++r) {
        auto row = delta.row(r);
        for (std::size_t j = 0; j < s.fan_out; ++j) grad_params[s.bias_offset + j] += row[j];
      }
    }
    delta = kernels::matmul_nt(delta, weight_matrix(s, params));
  }
  return delta;
}

MlpGradients backward(const MlpSpec& spec, std::span<const double> params, const MlpCache& cache,
                      const Matrix& grad_output) {
  MlpGradients g;
  g.params.assign(spec.param_count(), 0.0);
  g.input = backward_into(spec, params, cache, grad_output, g.params);
  return g;
}

}  // namespace fedad
