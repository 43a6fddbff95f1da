// Deep structured energy model, fully connected, single hidden layer:
//
//   f(x)  = x W + b
//   E(x)  = 0.5 * ||x - b'||^2 - sum_j softplus(f_j(x))
//   dE/dx = (x - b') - sigmoid(f(x)) W^T
//
// Training minimizes mean ||x - (x - dE/dx)||^2 = mean ||dE/dx||^2 (the
// reconstruction view); scoring uses E(x) by default.

#include <cmath>

#include "detail.hpp"
#include "fedad/error.hpp"
#include "fedad/kernels.hpp"

namespace fedad {
namespace detail {

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

struct EnergyPass {
  Matrix f;         // B x H
  Matrix s;         // sigmoid(f)
  Matrix residual;  // dE/dx, B x d
};

Matrix weight_of(const ModelState& st, const SubNet& net) {
  auto p = st.net_params(net);
  const auto slot = layer_slots(net.spec).front();
  return Matrix(slot.fan_in, slot.fan_out,
                std::vector<double>(p.begin() + slot.weight_offset,
                                    p.begin() + slot.weight_offset + slot.fan_in * slot.fan_out));
}

EnergyPass energy_pass(const ModelState& st, const Matrix& x) {
  const auto& net = st.net("energy");
  const auto& vb = st.block("visible_bias");
  EnergyPass e;
  e.f = forward(net.spec, st.net_params(net), x);
  e.s = e.f;
  for (auto& v : e.s.values()) v = sigmoid(v);
  e.residual = kernels::matmul_nt(e.s, weight_of(st, net));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto rr = e.residual.row(r);
    auto xr = x.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      rr[c] = xr[c] - st.params[vb.offset + c] - rr[c];
    }
  }
  return e;
}

}  // namespace

void layout_dsebm(ModelState& s) {
  add_net(s, "energy", MlpSpec::make({s.input_dim, s.config.latent_dim}, Activation::linear,
                                     Activation::linear, true));
  add_block(s, "visible_bias", 1, s.input_dim);
}

Objective dsebm_objective(const ModelState& s, const Matrix& x) {
  const auto& net = s.net("energy");
  const auto& vb = s.block("visible_bias");
  const auto slot = layer_slots(net.spec).front();
  const Matrix w = weight_of(s, net);
  EnergyPass e = energy_pass(s, x);

  Objective obj;
  obj.grad.assign(s.params.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(x.rows() * x.cols());
  Matrix g(x.rows(), x.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = e.residual.values()[i];
    sum += r * r;
    g.values()[i] = 2.0 * r * scale;
  }
  obj.loss = sum * scale;

  // residual = x - b' - s W^T
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) obj.grad[vb.offset + c] -= g(r, c);
  }
  Matrix direct = kernels::matmul_tn(g, e.s);  // d x H
  Matrix delta = kernels::matmul(g, w);        // B x H
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double sv = e.s.values()[i];
    delta.values()[i] = -delta.values()[i] * sv * (1.0 - sv);
  }
  Matrix through = kernels::matmul_tn(x, delta);  // d x H
  const std::size_t base = net.offset;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    obj.grad[base + slot.weight_offset + i] += through.values()[i] - direct.values()[i];
  }
  for (std::size_t r = 0; r < delta.rows(); ++r) {
    for (std::size_t j = 0; j < delta.cols(); ++j) obj.grad[base + slot.bias_offset + j] += delta(r, j);
  }
  return obj;
}

}  // namespace detail

std::vector<double> dsebm_energy(const ModelState& s, const Matrix& x) {
  if (s.config.kind != ModelKind::dsebm) throw UsageError("dsebm_energy: model is not DSEBM");
  const auto& net = s.net("energy");
  const auto& vb = s.block("visible_bias");
  Matrix f = forward(net.spec, s.net_params(net), x);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double quad = 0.0;
    auto xr = x.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = xr[c] - s.params[vb.offset + c];
      quad += d * d;
    }
    double sp = 0.0;
    for (double v : f.row(r)) sp += detail::softplus(v);
    out[r] = 0.5 * quad - sp;
  }
  return out;
}

std::vector<double> dsebm_reconstruction_error(const ModelState& s, const Matrix& x) {
  if (s.config.kind != ModelKind::dsebm) {
    throw UsageError("dsebm_reconstruction_error: model is not DSEBM");
  }
  auto e = detail::energy_pass(s, x);
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (double v : e.residual.row(r)) sum += v * v;
    out[r] = sum / static_cast<double>(x.cols());
  }
  return out;
}

}  // namespace fedad
