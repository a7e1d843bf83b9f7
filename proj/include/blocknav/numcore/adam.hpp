#pragma once

#include "blocknav/numcore/params.hpp"

#include <vector>

namespace blocknav::nc {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam.
class Adam {
public:
  Adam(const ParamStore& params, AdamConfig config);

  void step(ParamStore& params, const std::vector<Tensor>& grads);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

double global_norm(const std::vector<Tensor>& grads);

/// Rescales grads so their global L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

} // namespace blocknav::nc
