#pragma once

// The five detectors: DAE, DSEBM, DeepSVDD, NeuTraLAD, MemAE.
//
// Every model is a set of MLP sub-networks plus optional raw parameter blocks
// (MemAE memory, DSEBM visible bias), all packed into one ParamVector so that
// aggregation and the proximal term treat them uniformly.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedad/matrix.hpp"
#include "fedad/mlp.hpp"
#include "fedad/optim.hpp"

namespace fedad {

enum class ModelKind { dae, dsebm, deepsvdd, neutralad, memae };
enum class TransformType { residual, multiplicative };
enum class DsebmScore { energy, reconstruction };

const char* to_string(ModelKind k);
const char* to_string(TransformType t);
ModelKind parse_model_kind(std::string_view s);       // case-insensitive; throws ConfigError
TransformType parse_transform_type(std::string_view s);
inline constexpr ModelKind kAllModelKinds[] = {ModelKind::dae, ModelKind::dsebm, ModelKind::deepsvdd,
                                               ModelKind::neutralad, ModelKind::memae};

struct ModelConfig {
  ModelKind kind = ModelKind::dae;
  std::size_t latent_dim = 2;
  std::size_t memae_memory_dim = 50;
  std::size_t svdd_output_features = 32;
  TransformType neutralad_trans_type = TransformType::residual;
  std::size_t neutralad_num_transforms = 11;
  double neutralad_temperature = 0.1;
  double memae_shrink_threshold = 0.0025;
  double memae_entropy_weight = 0.0002;
  DsebmScore dsebm_score = DsebmScore::energy;
  // Explicit hidden widths of the encoder (DAE/MemAE/NeuTraLAD) or the SVDD
  // network; decoders mirror them. Empty optional = halving rule.
  std::optional<std::vector<std::size_t>> encoder_widths;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;

  // Throws ConfigError when the config cannot be built for `input_dim`.
  void validate(std::size_t input_dim) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Lower-case alphanumerics with common aliases folded ("KDDCUP10" -> "kdd10").
std::string canonical_dataset_id(std::string_view id);

// Per-dataset defaults taken from the benchmark's model parameter table.
// Unknown dataset ids fall back to generic defaults.
ModelConfig preset_config(ModelKind kind, std::string_view dataset_id);

// Hidden widths obtained by repeatedly halving `input` (floor), keeping
// widths strictly above `bottleneck`, at most two layers.
std::vector<std::size_t> halving_widths(std::size_t input, std::size_t bottleneck);

struct SubNet {
  std::string name;
  MlpSpec spec;
  std::size_t offset = 0;
};

// Raw rows x cols parameter block stored row-major inside the ParamVector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct ModelState {
  ModelConfig config;
  std::size_t input_dim = 0;
  std::vector<SubNet> nets;
  std::vector<ParamBlock> blocks;
  ParamVector params;
  std::optional<std::vector<double>> center;  // DeepSVDD only; not trainable
  AdamState optimizer;

  const SubNet& net(std::string_view name) const;
  const ParamBlock& block(std::string_view name) const;
  std::span<const double> net_params(const SubNet& n) const {
    return std::span<const double>(params).subspan(n.offset, n.spec.param_count());
  }
  std::span<double> net_params(const SubNet& n) {
    return std::span<double>(params).subspan(n.offset, n.spec.param_count());
  }
  Matrix block_matrix(const ParamBlock& b) const;
};

// Text description of the parameter layout and its checksum; equal for any
// two states built from the same (config, input_dim).
std::string layout_description(const ModelState& s);
std::uint64_t layout_checksum(const ModelState& s);

ModelState build_model(const ModelConfig& config, std::size_t input_dim, std::uint64_t seed);

struct Objective {
  double loss = 0.0;
  ParamVector grad;  // dLoss/dParams, same layout as params
};

// Model objective (without proximal term) and its exact gradient on `batch`.
Objective objective(const ModelState& state, const Matrix& batch);

// FedProx anchor: adds (mu/2)*||w - global||^2 to the loss.
struct Proximal {
  double mu = 0.0;
  std::span<const double> global;
};

// One Adam step on the objective (+ proximal term). Returns the reported loss
// L_obj + (mu/2)||w - w_t||^2. Throws UsageError for DeepSVDD without center
// and NumericError when the gradient or the updated params are non-finite.
double train_step(ModelState& state, const Matrix& batch, const Proximal* prox = nullptr);

// Higher = more anomalous. Throws NumericError naming the first non-finite sample.
std::vector<double> anomaly_scores(const ModelState& state, const Matrix& batch);

// Sets the DeepSVDD center to the mean network output on `train_data`, with
// coordinates of magnitude < 0.1 pushed to +-0.1 (sign-preserving; 0 -> +0.1).
void init_svdd_center(ModelState& state, const Matrix& train_data);

// MemAE addressing weights for inspection: softmax rows, or the shrunk and
// renormalized rows used for decoding.
Matrix memae_addressing(const ModelState& state, const Matrix& batch, bool shrink);

// NeuTraLAD transformed views of `batch`, one matrix per transformation.
std::vector<Matrix> neutralad_views(const ModelState& state, const Matrix& batch);

// DSEBM energy and reconstruction-residual scores regardless of config.
std::vector<double> dsebm_energy(const ModelState& state, const Matrix& batch);
std::vector<double> dsebm_reconstruction_error(const ModelState& state, const Matrix& batch);

// Checkpoints: text header + hex-float payload, exact round trip.
void save_checkpoint(std::ostream& out, const ModelState& state);
ModelState load_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const ModelState& state);
ModelState load_checkpoint(const std::string& path);

}  // namespace fedad
