#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "detail.hpp"
#include "fedad/error.hpp"
#include "fedad/random.hpp"

namespace fedad {

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::dae: return "DAE";
    case ModelKind::dsebm: return "DSEBM";
    case ModelKind::deepsvdd: return "DEEPSVDD";
    case ModelKind::neutralad: return "NeuTraLAD";
    case ModelKind::memae: return "MemAE";
  }
  return "?";
}

const char* to_string(TransformType t) {
  return t == TransformType::residual ? "residual" : "multiplicative";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// "NSL-KDD" -> "nslkdd", "Arrythmia" -> "arrhythmia".
}  // namespace

std::string canonical_dataset_id(std::string_view id) {
  std::string out;
  for (char c : lower(id)) {
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(c);
  }
  if (out == "arrythmia") out = "arrhythmia";
  if (out == "kddcup10" || out == "kddcup99" || out == "kdd") out = "kdd10";
  return out;
}

ModelKind parse_model_kind(std::string_view s) {
  const auto l = lower(s);
  if (l == "dae") return ModelKind::dae;
  if (l == "dsebm") return ModelKind::dsebm;
  if (l == "deepsvdd" || l == "svdd") return ModelKind::deepsvdd;
  if (l == "neutralad") return ModelKind::neutralad;
  if (l == "memae") return ModelKind::memae;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

TransformType parse_transform_type(std::string_view s) {
  const auto l = lower(s);
  if (l == "residual") return TransformType::residual;
  if (l == "multiplicative" || l == "mul") return TransformType::multiplicative;
  throw ConfigError("unknown NeuTraLAD transformation type '" + std::string(s) + "'");
}

void ModelConfig::validate(std::size_t input_dim) const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if ((kind == ModelKind::dae || kind == ModelKind::memae) && latent_dim >= input_dim) {
    throw ConfigError(std::string(to_string(kind)) + ": latent_dim " + std::to_string(latent_dim) +
                      " >= input_dim " + std::to_string(input_dim) + " (no compression)");
  }
  if (memae_memory_dim < 1) throw ConfigError("memae_memory_dim must be >= 1");
  if (!(memae_shrink_threshold >= 0.0 && memae_shrink_threshold < 1.0)) {
    throw ConfigError("memae_shrink_threshold must be in [0, 1)");
  }
  if (!(memae_entropy_weight >= 0.0)) throw ConfigError("memae_entropy_weight must be >= 0");
  if (svdd_output_features < 1) throw ConfigError("svdd_output_features must be >= 1");
  if (neutralad_num_transforms < 2) throw ConfigError("neutralad_num_transforms must be >= 2");
  if (!(neutralad_temperature > 0.0)) throw ConfigError("neutralad_temperature must be > 0");
  if (encoder_widths) {
    for (auto w : *encoder_widths) {
      if (w < 1) throw ConfigError("encoder_widths entries must be >= 1");
    }
    if (kind == ModelKind::dsebm && !encoder_widths->empty()) {
      throw ConfigError("DSEBM: the energy network has a single hidden layer; encoder_widths "
                        "must be empty");
    }
  }
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0)) {
    throw ConfigError("learning_rate and weight_decay must be >= 0");
  }
}

ModelConfig preset_config(ModelKind kind, std::string_view dataset_id) {
  ModelConfig c;
  c.kind = kind;
  const auto ds = canonical_dataset_id(dataset_id);
  const bool kdd = ds == "kdd10" || ds == "nslkdd";
  switch (kind) {
    case ModelKind::dae:
      c.latent_dim = ds == "arrhythmia" ? 3 : 2;
      break;
    case ModelKind::dsebm:
      c.latent_dim = kdd ? 512 : 2;
      break;
    case ModelKind::deepsvdd:
      if (ds == "arrhythmia") c.svdd_output_features = 64;
      else if (ds == "thyroid") c.svdd_output_features = 1;
      else if (ds == "kdd10") c.svdd_output_features = 29;
      else if (ds == "nslkdd") c.svdd_output_features = 31;
      c.latent_dim = c.svdd_output_features;
      break;
    case ModelKind::neutralad:
      c.latent_dim = ds == "thyroid" ? 24 : 32;
      c.neutralad_trans_type = kdd ? TransformType::multiplicative : TransformType::residual;
      break;
    case ModelKind::memae:
      c.latent_dim = 3;
      c.memae_memory_dim = 50;
      break;
  }
  return c;
}

std::vector<std::size_t> halving_widths(std::size_t input, std::size_t bottleneck) {
  std::vector<std::size_t> out;
  std::size_t w = input;
  while (out.size() < 2) {
    w /= 2;
    if (w <= bottleneck || w < 1) break;
    out.push_back(w);
  }
  return out;
}

const SubNet& ModelState::net(std::string_view name) const {
  for (const auto& n : nets) {
    if (n.name == name) return n;
  }
  throw UsageError("model has no sub-network '" + std::string(name) + "'");
}

const ParamBlock& ModelState::block(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw UsageError("model has no parameter block '" + std::string(name) + "'");
}

Matrix ModelState::block_matrix(const ParamBlock& b) const {
  return Matrix(b.rows, b.cols,
                std::vector<double>(params.begin() + b.offset,
                                    params.begin() + b.offset + b.rows * b.cols));
}

std::string layout_description(const ModelState& s) {
  std::ostringstream os;
  os << to_string(s.config.kind) << " in=" << s.input_dim;
  for (const auto& n : s.nets) {
    os << " net:" << n.name << "@" << n.offset << "[";
    for (std::size_t l = 0; l < n.spec.widths.size(); ++l) {
      if (l) os << ",";
      os << n.spec.widths[l];
    }
    os << "]";
    for (std::size_t l = 0; l < n.spec.layers(); ++l) {
      os << (l ? "," : "(") << to_string(n.spec.activations[l]) << (n.spec.use_bias[l] ? "+b" : "");
    }
    os << ")";
  }
  for (const auto& b : s.blocks) {
    os << " block:" << b.name << "@" << b.offset << "[" << b.rows << "x" << b.cols << "]";
  }
  os << " total=" << s.params.size();
  return os.str();
}

std::uint64_t layout_checksum(const ModelState& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : layout_description(s)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

std::size_t layout_size(const ModelState& s) {
  std::size_t end = 0;
  for (const auto& n : s.nets) end = std::max(end, n.offset + n.spec.param_count());
  for (const auto& b : s.blocks) end = std::max(end, b.offset + b.rows * b.cols);
  return end;
}

void add_net(ModelState& s, std::string name, MlpSpec spec) {
  spec.validate();
  const auto off = layout_size(s);
  s.nets.push_back(SubNet{std::move(name), std::move(spec), off});
}

void add_block(ModelState& s, std::string name, std::size_t rows, std::size_t cols) {
  const auto off = layout_size(s);
  s.blocks.push_back(ParamBlock{std::move(name), off, rows, cols});
}

std::vector<double> row_mse(const Matrix& a, const Matrix& b) {
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto ar = a.row(r);
    auto br = b.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double d = ar[c] - br[c];
      s += d * d;
    }
    out[r] = s / static_cast<double>(a.cols());
  }
  return out;
}

}  // namespace detail

ModelState build_model(const ModelConfig& config, std::size_t input_dim, std::uint64_t seed) {
  config.validate(input_dim);
  ModelState s;
  s.config = config;
  s.input_dim = input_dim;
  switch (config.kind) {
    case ModelKind::dae:
    case ModelKind::memae: detail::layout_autoencoder(s); break;
    case ModelKind::dsebm: detail::layout_dsebm(s); break;
    case ModelKind::deepsvdd: detail::layout_svdd(s); break;
    case ModelKind::neutralad: detail::layout_neutralad(s); break;
  }
  s.params.assign(detail::layout_size(s), 0.0);

  Rng rng(derive_seed(seed, 0x6d6f64656cULL));
  for (const auto& n : s.nets) init_params(n.spec, s.net_params(n), rng);
  for (const auto& b : s.blocks) {
    if (b.name == "memory") {
      const double limit = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
      for (std::size_t i = 0; i < b.rows * b.cols; ++i) s.params[b.offset + i] = rng.uniform(-limit, limit);
    }
    // Other blocks (DSEBM visible bias) start at zero.
  }
  s.optimizer = AdamState::create(s.params.size(), config.learning_rate, config.weight_decay);
  return s;
}

Objective objective(const ModelState& state, const Matrix& batch) {
  if (batch.cols() != state.input_dim) {
    throw ConfigError("batch has " + std::to_string(batch.cols()) + " features, model expects " +
                      std::to_string(state.input_dim));
  }
  if (batch.rows() == 0) throw UsageError("objective: empty batch");
  switch (state.config.kind) {
    case ModelKind::dae: return detail::dae_objective(state, batch);
    case ModelKind::memae: return detail::memae_objective(state, batch);
    case ModelKind::dsebm: return detail::dsebm_objective(state, batch);
    case ModelKind::deepsvdd:
      if (!state.center) throw UsageError("DeepSVDD: center not initialized (call init_svdd_center)");
      return detail::svdd_objective(state, batch);
    case ModelKind::neutralad: return detail::neutralad_objective(state, batch);
  }
  throw UsageError("objective: unknown model kind");
}

double train_step(ModelState& state, const Matrix& batch, const Proximal* prox) {
  Objective obj = objective(state, batch);
  double loss = obj.loss;
  if (prox && prox->mu != 0.0) {
    if (prox->global.size() != state.params.size()) {
      throw UsageError("train_step: proximal anchor has " + std::to_string(prox->global.size()) +
                       " params, model has " + std::to_string(state.params.size()));
    }
    for (std::size_t i = 0; i < obj.grad.size(); ++i) {
      obj.grad[i] += prox->mu * (state.params[i] - prox->global[i]);
    }
    loss += 0.5 * prox->mu * l2_distance_sq(state.params, prox->global);
  }
  if (!std::isfinite(loss)) throw NumericError("train_step: non-finite loss");
  for (std::size_t i = 0; i < obj.grad.size(); ++i) {
    if (!std::isfinite(obj.grad[i])) {
      throw NumericError("train_step: non-finite gradient at parameter " + std::to_string(i));
    }
  }
  adam_step(state.params, obj.grad, state.optimizer);
  return loss;
}

std::vector<double> anomaly_scores(const ModelState& state, const Matrix& batch) {
  if (batch.cols() != state.input_dim) {
    throw ConfigError("batch has " + std::to_string(batch.cols()) + " features, model expects " +
                      std::to_string(state.input_dim));
  }
  std::vector<double> scores;
  switch (state.config.kind) {
    case ModelKind::dae: scores = detail::dae_scores(state, batch); break;
    case ModelKind::memae: scores = detail::memae_scores(state, batch); break;
    case ModelKind::dsebm:
      scores = state.config.dsebm_score == DsebmScore::energy ? dsebm_energy(state, batch)
                                                              : dsebm_reconstruction_error(state, batch);
      break;
    case ModelKind::deepsvdd:
      if (!state.center) throw UsageError("DeepSVDD: center not initialized (call init_svdd_center)");
      scores = detail::svdd_scores(state, batch);
      break;
    case ModelKind::neutralad: scores = detail::neutralad_scores(state, batch); break;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw NumericError("anomaly_scores: non-finite score for sample " + std::to_string(i));
    }
  }
  return scores;
}

void init_svdd_center(ModelState& state, const Matrix& train_data) {
  if (state.config.kind != ModelKind::deepsvdd) throw UsageError("init_svdd_center: model is not DeepSVDD");
  if (train_data.rows() == 0) throw UsageError("init_svdd_center: empty training data");
  const auto& n = state.net("phi");
  const Matrix out = forward(n.spec, state.net_params(n), train_data);
  std::vector<double> c(out.cols(), 0.0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < out.cols(); ++j) c[j] += out(r, j);
  }
  for (auto& v : c) {
    v /= static_cast<double>(out.rows());
    if (std::abs(v) < 0.1) v = std::signbit(v) && v != 0.0 ? -0.1 : 0.1;
  }
  state.center = std::move(c);
}

}  // namespace fedad
