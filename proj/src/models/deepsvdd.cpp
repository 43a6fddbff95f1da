#include "detail.hpp"
#include "fedad/error.hpp"

namespace fedad::detail {

void layout_svdd(ModelState& s) {
  const auto out = s.config.svdd_output_features;
  std::vector<std::size_t> hidden =
      s.config.encoder_widths ? *s.config.encoder_widths : halving_widths(s.input_dim, out);
  std::vector<std::size_t> widths{s.input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  // Bias-free network: a bias lets phi collapse to the constant c.
  add_net(s, "phi", MlpSpec::make(widths, Activation::relu, Activation::linear, false));
}

Objective svdd_objective(const ModelState& s, const Matrix& x) {
  const auto& phi = s.net("phi");
  const auto& c = *s.center;
  MlpCache cache;
  Matrix out = forward(phi.spec, s.net_params(phi), x, &cache);
  Objective obj;
  obj.grad.assign(s.params.size(), 0.0);
  Matrix g(out.rows(), out.cols());
  const double scale = 1.0 / static_cast<double>(out.rows());
  double sum = 0.0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double d = out(r, j) - c[j];
      sum += d * d;
      g(r, j) = 2.0 * d * scale;
    }
  }
  obj.loss = sum * scale;
  backward_into(phi.spec, s.net_params(phi), cache, g,
                std::span<double>(obj.grad).subspan(phi.offset, phi.spec.param_count()));
  return obj;
}

std::vector<double> svdd_scores(const ModelState& s, const Matrix& x) {
  const auto& phi = s.net("phi");
  const auto& c = *s.center;
  Matrix out = forward(phi.spec, s.net_params(phi), x);
  std::vector<double> scores(out.rows(), 0.0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double d = out(r, j) - c[j];
      scores[r] += d * d;
    }
  }
  return scores;
}

}  // namespace fedad::detail
