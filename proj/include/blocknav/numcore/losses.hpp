#pragma once

#include "blocknav/numcore/graph.hpp"

namespace blocknav::nc {

inline constexpr double kBceEpsilon = 1e-7;

enum class Reduction { Sum, Mean };

/// Squared error against a constant target.
Var mse(Var pred, const Tensor& target, Reduction reduction = Reduction::Mean);

/// Binary cross-entropy with probabilities clamped to [eps, 1 - eps].
Var bce(Var prob, const Tensor& target, Reduction reduction = Reduction::Sum, double eps = kBceEpsilon);

/// -log softmax(scores)[target]; -inf scores are masked out. The target
/// score must be finite.
Var ce_from_scores(Var scores, std::size_t target);

} // namespace blocknav::nc
