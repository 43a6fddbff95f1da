// NeuTraLAD: K learnable transformations and a shared encoder trained with the
// deterministic contrastive loss (DCL). The per-sample DCL is the anomaly score.
//
//   u_k   = z_k / |z_k|,  z_0 = enc(x),  z_k = enc(T_k(x))
//   S_kl  = <u_k, u_l> / tau
//   L(x)  = sum_{k=1..K} [ logsumexp_{l != k} S_kl  -  S_k0 ]

#include <cmath>
#include <string>

#include "detail.hpp"
#include "fedad/error.hpp"

namespace fedad {
namespace detail {

namespace {

constexpr double kNormEps = 1e-12;

std::string transform_name(std::size_t k) { return "transform" + std::to_string(k); }

struct Views {
  std::vector<MlpCache> caches;  // one per transformation
  std::vector<Matrix> raw;       // T_k(x)
  Matrix stacked;                // [x; x_1; ...; x_K]
};

Views make_views(const ModelState& s, const Matrix& x, bool keep_cache) {
  const std::size_t k_count = s.config.neutralad_num_transforms;
  const bool mult = s.config.neutralad_trans_type == TransformType::multiplicative;
  const std::size_t b = x.rows();
  const std::size_t d = x.cols();
  Views v;
  v.caches.resize(keep_cache ? k_count : 0);
  v.stacked = Matrix((k_count + 1) * b, d);
  std::copy(x.values().begin(), x.values().end(), v.stacked.values().begin());
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& net = s.net(transform_name(k));
    Matrix t = forward(net.spec, s.net_params(net), x, keep_cache ? &v.caches[k] : nullptr);
    double* dst = v.stacked.row((k + 1) * b).data();
    for (std::size_t i = 0; i < b * d; ++i) {
      const double xv = x.values()[i];
      dst[i] = mult ? xv * t.values()[i] : xv + t.values()[i];
    }
    v.raw.push_back(std::move(t));
  }
  return v;
}

// DCL for every sample. When `grad_z` is non-null it receives dL/dz for each
// stacked row, scaled by `grad_scale`.
std::vector<double> dcl(const Matrix& z, std::size_t b, std::size_t k_count, double tau,
                        Matrix* grad_z, double grad_scale) {
  const std::size_t dim = z.cols();
  const std::size_t views = k_count + 1;
  std::vector<double> losses(b, 0.0);
  std::vector<double> norms(views), u(views * dim), sim(views * views), gs(views * views), gu(views * dim);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t k = 0; k < views; ++k) {
      auto zr = z.row(k * b + n);
      double sq = 0.0;
      for (double v : zr) sq += v * v;
      norms[k] = std::sqrt(sq + kNormEps);
      for (std::size_t j = 0; j < dim; ++j) u[k * dim + j] = zr[j] / norms[k];
    }
    for (std::size_t k = 0; k < views; ++k) {
      for (std::size_t l = k; l < views; ++l) {
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dot += u[k * dim + j] * u[l * dim + j];
        sim[k * views + l] = sim[l * views + k] = dot / tau;
      }
    }
    std::fill(gs.begin(), gs.end(), 0.0);
    double loss = 0.0;
    for (std::size_t k = 1; k < views; ++k) {
      double mx = -INFINITY;
      for (std::size_t l = 0; l < views; ++l) {
        if (l != k) mx = std::max(mx, sim[k * views + l]);
      }
      double sum = 0.0;
      for (std::size_t l = 0; l < views; ++l) {
        if (l != k) sum += std::exp(sim[k * views + l] - mx);
      }
      const double lse = mx + std::log(sum);
      loss += lse - sim[k * views];
      if (grad_z) {
        for (std::size_t l = 0; l < views; ++l) {
          if (l != k) gs[k * views + l] += std::exp(sim[k * views + l] - lse);
        }
        gs[k * views] -= 1.0;
      }
    }
    losses[n] = loss;
    if (!grad_z) continue;

    std::fill(gu.begin(), gu.end(), 0.0);
    for (std::size_t k = 1; k < views; ++k) {
      for (std::size_t l = 0; l < views; ++l) {
        const double g = gs[k * views + l] * grad_scale / tau;
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < dim; ++j) {
          gu[k * dim + j] += g * u[l * dim + j];
          gu[l * dim + j] += g * u[k * dim + j];
        }
      }
    }
    for (std::size_t k = 0; k < views; ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dot += gu[k * dim + j] * u[k * dim + j];
      auto gr = grad_z->row(k * b + n);
      for (std::size_t j = 0; j < dim; ++j) gr[j] = (gu[k * dim + j] - dot * u[k * dim + j]) / norms[k];
    }
  }
  return losses;
}

}  // namespace

void layout_neutralad(ModelState& s) {
  const auto& c = s.config;
  const std::size_t d = s.input_dim;
  const Activation out_act =
      c.neutralad_trans_type == TransformType::multiplicative ? Activation::sigmoid : Activation::linear;
  for (std::size_t k = 0; k < c.neutralad_num_transforms; ++k) {
    add_net(s, transform_name(k), MlpSpec::make({d, d, d}, Activation::relu, out_act, true));
  }
  std::vector<std::size_t> hidden = c.encoder_widths ? *c.encoder_widths : halving_widths(d, c.latent_dim);
  if (!c.encoder_widths && hidden.empty()) hidden.push_back(c.latent_dim);
  std::vector<std::size_t> widths{d};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(c.latent_dim);
  add_net(s, "encoder", MlpSpec::make(widths));
}

Objective neutralad_objective(const ModelState& s, const Matrix& x) {
  const auto& c = s.config;
  const std::size_t b = x.rows();
  const std::size_t k_count = c.neutralad_num_transforms;
  const bool mult = c.neutralad_trans_type == TransformType::multiplicative;
  const auto& enc = s.net("encoder");

  Views v = make_views(s, x, true);
  MlpCache ce;
  Matrix z = forward(enc.spec, s.net_params(enc), v.stacked, &ce);
  Matrix gz(z.rows(), z.cols());
  const double scale = 1.0 / static_cast<double>(b);
  auto losses = dcl(z, b, k_count, c.neutralad_temperature, &gz, scale);

  Objective obj;
  obj.grad.assign(s.params.size(), 0.0);
  for (double l : losses) obj.loss += l;
  obj.loss *= scale;

  auto grad = std::span<double>(obj.grad);
  Matrix gx = backward_into(enc.spec, s.net_params(enc), ce, gz,
                            grad.subspan(enc.offset, enc.spec.param_count()));
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& net = s.net(transform_name(k));
    Matrix gt(b, x.cols());
    const double* src = gx.row((k + 1) * b).data();
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt.values()[i] = mult ? src[i] * x.values()[i] : src[i];
    }
    backward_into(net.spec, s.net_params(net), v.caches[k], gt,
                  grad.subspan(net.offset, net.spec.param_count()));
  }
  return obj;
}

std::vector<double> neutralad_scores(const ModelState& s, const Matrix& x) {
  const auto& enc = s.net("encoder");
  Views v = make_views(s, x, false);
  Matrix z = forward(enc.spec, s.net_params(enc), v.stacked);
  return dcl(z, x.rows(), s.config.neutralad_num_transforms, s.config.neutralad_temperature, nullptr, 0.0);
}

}  // namespace detail

std::vector<Matrix> neutralad_views(const ModelState& state, const Matrix& batch) {
  if (state.config.kind != ModelKind::neutralad) throw UsageError("neutralad_views: model is not NeuTraLAD");
  auto v = detail::make_views(state, batch, false);
  std::vector<Matrix> out;
  const std::size_t b = batch.rows();
  for (std::size_t k = 0; k < state.config.neutralad_num_transforms; ++k) {
    std::vector<std::size_t> idx(b);
    for (std::size_t i = 0; i < b; ++i) idx[i] = (k + 1) * b + i;
    out.push_back(v.stacked.select_rows(idx));
  }
  return out;
}

}  // namespace fedad
