// DAE and MemAE. Both use the same encoder/decoder pair; MemAE inserts a
// memory read between them.

#include <cmath>

#include "detail.hpp"
#include "fedad/error.hpp"
#include "fedad/kernels.hpp"

namespace fedad {
namespace detail {

namespace {

constexpr double kShrinkEps = 1e-12;
constexpr double kNormEps = 1e-12;
constexpr double kLogEps = 1e-12;

// relu(w - l) * w / (|w - l| + eps)
inline double hard_shrink(double w, double l) {
  const double u = w - l;
  return u > 0.0 ? u * w / (u + kShrinkEps) : 0.0;
}

inline double hard_shrink_grad(double w, double l) {
  const double u = w - l;
  if (u <= 0.0) return 0.0;
  const double den = (u + kShrinkEps) * (u + kShrinkEps);
  return (w * kShrinkEps + u * u + u * kShrinkEps) / den;
}

struct Addressing {
  Matrix soft;    // softmax(z M^T)
  Matrix shrunk;  // hard_shrink(soft)
  Matrix weights; // shrunk / L1
  std::vector<double> l1;
};

Addressing address(const Matrix& z, const Matrix& memory, double shrink) {
  Addressing a;
  a.soft = kernels::matmul_nt(z, memory);
  const std::size_t n = a.soft.cols();
  a.shrunk = Matrix(a.soft.rows(), n);
  a.weights = Matrix(a.soft.rows(), n);
  a.l1.assign(a.soft.rows(), 0.0);
  for (std::size_t r = 0; r < a.soft.rows(); ++r) {
    auto row = a.soft.row(r);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
    auto sh = a.shrunk.row(r);
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sh[i] = shrink > 0.0 ? hard_shrink(row[i], shrink) : row[i];
      l1 += sh[i];
    }
    a.l1[r] = std::max(l1, kNormEps);
    auto w = a.weights.row(r);
    for (std::size_t i = 0; i < n; ++i) w[i] = sh[i] / a.l1[r];
  }
  return a;
}

Matrix mse_grad(const Matrix& recon, const Matrix& x, double* loss) {
  Matrix g(x.rows(), x.cols());
  const double scale = 1.0 / static_cast<double>(x.rows() * x.cols());
  double s = 0.0;
  auto gv = g.values();
  auto rv = recon.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < gv.size(); ++i) {
    const double d = rv[i] - xv[i];
    s += d * d;
    gv[i] = 2.0 * d * scale;
  }
  *loss = s * scale;
  return g;
}

}  // namespace

void layout_autoencoder(ModelState& s) {
  const auto& c = s.config;
  std::vector<std::size_t> hidden =
      c.encoder_widths ? *c.encoder_widths : halving_widths(s.input_dim, c.latent_dim);
  std::vector<std::size_t> enc{s.input_dim};
  enc.insert(enc.end(), hidden.begin(), hidden.end());
  enc.push_back(c.latent_dim);
  std::vector<std::size_t> dec(enc.rbegin(), enc.rend());
  add_net(s, "encoder", MlpSpec::make(enc));
  add_net(s, "decoder", MlpSpec::make(dec));
  if (c.kind == ModelKind::memae) add_block(s, "memory", c.memae_memory_dim, c.latent_dim);
}

Objective dae_objective(const ModelState& s, const Matrix& x) {
  const auto& enc = s.net("encoder");
  const auto& dec = s.net("decoder");
  MlpCache ce, cd;
  Matrix z = forward(enc.spec, s.net_params(enc), x, &ce);
  Matrix recon = forward(dec.spec, s.net_params(dec), z, &cd);
  Objective obj;
  obj.grad.assign(s.params.size(), 0.0);
  Matrix g = mse_grad(recon, x, &obj.loss);
  auto grad = std::span<double>(obj.grad);
  Matrix gz = backward_into(dec.spec, s.net_params(dec), cd, g,
                            grad.subspan(dec.offset, dec.spec.param_count()));
  backward_into(enc.spec, s.net_params(enc), ce, gz, grad.subspan(enc.offset, enc.spec.param_count()));
  return obj;
}

std::vector<double> dae_scores(const ModelState& s, const Matrix& x) {
  const auto& enc = s.net("encoder");
  const auto& dec = s.net("decoder");
  Matrix recon = forward(dec.spec, s.net_params(dec), forward(enc.spec, s.net_params(enc), x));
  return row_mse(recon, x);
}

Objective memae_objective(const ModelState& s, const Matrix& x) {
  const auto& cfg = s.config;
  const auto& enc = s.net("encoder");
  const auto& dec = s.net("decoder");
  const auto& mb = s.block("memory");
  const Matrix memory = s.block_matrix(mb);

  MlpCache ce, cd;
  Matrix z = forward(enc.spec, s.net_params(enc), x, &ce);
  Addressing a = address(z, memory, cfg.memae_shrink_threshold);
  Matrix zhat = kernels::matmul(a.weights, memory);
  Matrix recon = forward(dec.spec, s.net_params(dec), zhat, &cd);

  Objective obj;
  obj.grad.assign(s.params.size(), 0.0);
  auto grad = std::span<double>(obj.grad);
  double mse = 0.0;
  Matrix g = mse_grad(recon, x, &mse);

  const std::size_t b = x.rows();
  const std::size_t n = memory.rows();
  const double ent_scale = cfg.memae_entropy_weight / static_cast<double>(b);
  double entropy = 0.0;
  for (double w : a.weights.values()) entropy -= w * std::log(w + kLogEps);
  obj.loss = mse + ent_scale * entropy;

  Matrix gzhat = backward_into(dec.spec, s.net_params(dec), cd, g,
                               grad.subspan(dec.offset, dec.spec.param_count()));
  // d/dweights: memory read plus entropy term.
  Matrix gw = kernels::matmul_nt(gzhat, memory);
  for (std::size_t r = 0; r < b; ++r) {
    auto w = a.weights.row(r);
    auto gr = gw.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      gr[i] += ent_scale * (-std::log(w[i] + kLogEps) - w[i] / (w[i] + kLogEps));
    }
  }
  Matrix gmem = kernels::matmul_tn(a.weights, gzhat);

  // Back through L1 renormalization, hard shrinkage, and softmax.
  Matrix glogit(b, n);
  for (std::size_t r = 0; r < b; ++r) {
    auto w = a.weights.row(r);
    auto gr = gw.row(r);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += gr[i] * w[i];
    const bool normalized = a.l1[r] > kNormEps;
    auto soft = a.soft.row(r);
    std::vector<double> gsoft(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double gs = normalized ? (gr[i] - dot) / a.l1[r] : gr[i] / a.l1[r];
      gsoft[i] = gs * (cfg.memae_shrink_threshold > 0.0
                           ? hard_shrink_grad(soft[i], cfg.memae_shrink_threshold)
                           : 1.0);
    }
    double sdot = 0.0;
    for (std::size_t i = 0; i < n; ++i) sdot += gsoft[i] * soft[i];
    auto gl = glogit.row(r);
    for (std::size_t i = 0; i < n; ++i) gl[i] = soft[i] * (gsoft[i] - sdot);
  }
  Matrix gz = kernels::matmul(glogit, memory);
  Matrix gmem2 = kernels::matmul_tn(glogit, z);
  for (std::size_t i = 0; i < gmem.size(); ++i) {
    grad[mb.offset + i] += gmem.values()[i] + gmem2.values()[i];
  }
  backward_into(enc.spec, s.net_params(enc), ce, gz, grad.subspan(enc.offset, enc.spec.param_count()));
  return obj;
}

std::vector<double> memae_scores(const ModelState& s, const Matrix& x) {
  const auto& enc = s.net("encoder");
  const auto& dec = s.net("decoder");
  const Matrix memory = s.block_matrix(s.block("memory"));
  Matrix z = forward(enc.spec, s.net_params(enc), x);
  Addressing a = address(z, memory, s.config.memae_shrink_threshold);
  Matrix recon = forward(dec.spec, s.net_params(dec), kernels::matmul(a.weights, memory));
  return row_mse(recon, x);
}

}  // namespace detail

Matrix memae_addressing(const ModelState& state, const Matrix& batch, bool shrink) {
  if (state.config.kind != ModelKind::memae) throw UsageError("memae_addressing: model is not MemAE");
  const auto& enc = state.net("encoder");
  Matrix z = forward(enc.spec, state.net_params(enc), batch);
  auto a = detail::address(z, state.block_matrix(state.block("memory")),
                           state.config.memae_shrink_threshold);
  return shrink ? a.weights : a.soft;
}

}  // namespace fedad
