#pragma once

#include "blocknav/numcore/graph.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace blocknav::nc {

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-3;
  /// Share of each tensor's entries checked (at least one per tensor).
  double fraction = 0.05;
  std::uint64_t seed = 0;
  /// Denominator floor for the relative error.
  double floor = 1e-6;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_err = 0.0;
  std::vector<GradCheckEntry> failures;

  bool passed() const { return failures.empty(); }
  /// Names the offending parameters, or "ok".
  std::string summary() const;
};

/// `build_loss` records a scalar loss on the given graph (bound to `params`).
/// Compares backward gradients against central differences on a random
/// sample of entries; rel = |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(ParamStore& params, const std::function<Var(Graph&)>& build_loss,
                           const GradCheckOptions& options = {});

} // namespace blocknav::nc
