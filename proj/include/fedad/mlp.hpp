#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedad/matrix.hpp"

namespace fedad {

class Rng;

// Flattened trainable parameters. The meaning of each entry comes from the
// MlpSpec (or model layout) it was created for.
using ParamVector = std::vector<double>;

enum class Activation { relu, tanh, sigmoid, linear };

const char* to_string(Activation a);

struct MlpSpec {
  std::vector<std::size_t> widths;        // input, hidden..., output
  std::vector<Activation> activations;    // one per layer
  std::vector<bool> use_bias;             // one per layer

  // `hidden` on every layer but the last, `output` on the last.
  static MlpSpec make(std::vector<std::size_t> widths, Activation hidden = Activation::relu,
                      Activation output = Activation::linear, bool bias = true);

  std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t param_count() const;

  // Throws ConfigError on malformed specs.
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Offsets of one layer inside the spec's parameter block. Weights are stored
// row-major as fan_in x fan_out, followed by the bias when present.
struct LayerSlot {
  std::size_t weight_offset;
  std::size_t fan_in;
  std::size_t fan_out;
  bool has_bias;
  std::size_t bias_offset;
};

std::vector<LayerSlot> layer_slots(const MlpSpec& spec);

struct LayerParams {
  Matrix weight;               // fan_in x fan_out
  std::vector<double> bias;    // empty when the layer has no bias
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

ParamVector flatten(const MlpSpec& spec, const std::vector<LayerParams>& layers);
std::vector<LayerParams> unflatten(const MlpSpec& spec, std::span<const double> params);

// Glorot-uniform weights, zero biases.
void init_params(const MlpSpec& spec, std::span<double> out, Rng& rng);

// Per-layer activations kept by forward() for backward().
struct MlpCache {
  MlpSpec spec;
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
  std::uint64_t params_tag = 0;  // checksum of the params used in forward
  bool valid = false;
};

// Runs the network on `batch`. Throws ConfigError on shape mismatch and
// NumericError naming the layer when an activation becomes non-finite.
Matrix forward(const MlpSpec& spec, std::span<const double> params, const Matrix& batch,
               MlpCache* cache = nullptr);

// Accumulates dLoss/dParams into `grad_params` (same layout as params) and
// returns dLoss/dInput. Throws UsageError when the cache does not belong to
// this spec/params pair or the gradient shape does not match the output.
Matrix backward_into(const MlpSpec& spec, std::span<const double> params, const MlpCache& cache,
                     const Matrix& grad_output, std::span<double> grad_params);

struct MlpGradients {
  ParamVector params;
  Matrix input;
};

MlpGradients backward(const MlpSpec& spec, std::span<const double> params, const MlpCache& cache,
                      const Matrix& grad_output);

std::uint64_t params_fingerprint(std::span<const double> params);

}  // namespace fedad
