#include "blocknav/numcore/adam.hpp"

#include "blocknav/errors.hpp"

#include <cmath>

namespace blocknav::nc {

Adam::Adam(const ParamStore& params, AdamConfig config)
    : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {}

void Adam::step(ParamStore& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size()) throw ShapeMismatch("adam: gradient count does not match parameters");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params.value(p).data();
    const auto& g = grads[p].data();
    auto& m = m_[p].data();
    auto& v = v_[p].data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

double global_norm(const std::vector<Tensor>& grads) {
  double s = 0.0;
  for (const auto& g : grads) {
    for (double v : g.data()) s += v * v;
  }
  return std::sqrt(s);
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.data()) v *= k;
    }
  }
  return norm;
}

} // namespace blocknav::nc
