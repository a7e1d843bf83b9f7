#include "blocknav/numcore/losses.hpp"

#include "blocknav/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blocknav::nc {

Var mse(Var pred, const Tensor& target, Reduction reduction) {
  Graph& g = *pred.graph;
  const Tensor& p = g.value(pred);
  if (p.size() != target.size()) {
    throw ShapeMismatch("mse: prediction " + shape_string(p.shape()) + ", target " + shape_string(target.shape()));
  }
  const double norm = reduction == Reduction::Mean ? 1.0 / static_cast<double>(std::max<std::size_t>(p.size(), 1))
                                                   : 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - target[i]) * (p[i] - target[i]);
  return g.record(Tensor::scalar(s * norm), {pred}, [pred, target, norm](Graph& g, std::uint32_t self) {
    Tensor* gp = g.grad_buffer(pred);
    if (!gp) return;
    const Tensor& p = g.value(pred);
    const double gy = g.out_grad(self)[0];
    for (std::size_t i = 0; i < p.size(); ++i) (*gp)[i] += gy * 2.0 * (p[i] - target[i]) * norm;
  });
}

Var bce(Var prob, const Tensor& target, Reduction reduction, double eps) {
  Graph& g = *prob.graph;
  const Tensor& p = g.value(prob);
  if (p.size() != target.size()) {
    throw ShapeMismatch("bce: probability " + shape_string(p.shape()) + ", target " + shape_string(target.shape()));
  }
  const double norm = reduction == Reduction::Mean ? 1.0 / static_cast<double>(std::max<std::size_t>(p.size(), 1))
                                                   : 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], eps, 1.0 - eps);
    s -= target[i] * std::log(q) + (1.0 - target[i]) * std::log(1.0 - q);
  }
  return g.record(Tensor::scalar(s * norm), {prob}, [prob, target, norm, eps](Graph& g, std::uint32_t self) {
    Tensor* gp = g.grad_buffer(prob);
    if (!gp) return;
    const Tensor& p = g.value(prob);
    const double gy = g.out_grad(self)[0];
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < eps || p[i] > 1.0 - eps) continue; // clamped: flat
      (*gp)[i] += gy * norm * (-(target[i] / p[i]) + (1.0 - target[i]) / (1.0 - p[i]));
    }
  });
}

Var ce_from_scores(Var scores, std::size_t target) {
  Graph& g = *scores.graph;
  const Tensor& s = g.value(scores);
  if (target >= s.size()) {
    throw ShapeMismatch("ce_from_scores: target " + std::to_string(target) + " of " + std::to_string(s.size()) +
                        " scores");
  }
  if (!std::isfinite(s[target])) throw Error("ce_from_scores: target action is masked");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : s.data()) m = std::max(m, v);
  std::vector<double> prob(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    prob[i] = std::exp(s[i] - m);
    z += prob[i];
  }
  for (double& v : prob) v /= z;
  const double loss = -(s[target] - m - std::log(z));
  return g.record(Tensor::scalar(loss), {scores}, [scores, target, prob](Graph& g, std::uint32_t self) {
    Tensor* gs = g.grad_buffer(scores);
    if (!gs) return;
    const double gy = g.out_grad(self)[0];
    for (std::size_t i = 0; i < prob.size(); ++i) (*gs)[i] += gy * (prob[i] - (i == target ? 1.0 : 0.0));
  });
}

} // namespace blocknav::nc
