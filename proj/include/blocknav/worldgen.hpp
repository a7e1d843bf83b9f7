#pragma once

#include "blocknav/envgraph.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace blocknav {

struct WorldParams {
  std::uint64_t seed = 0;
  std::size_t grid_w = 6;
  std::size_t grid_h = 6;
  double edge_keep_prob = 0.8;
  std::size_t landmark_vocab_size = 8;
  double feature_noise_sigma = 0.05;
  /// Per-bin feature width; 0 selects the minimum 1 + 2 * landmark_vocab_size.
  std::size_t d_v = 0;
  std::size_t bins = 8;
};

std::size_t min_feature_dim(std::size_t landmark_vocab_size);

/// Grid street graph with random street deletions, repaired until strongly
/// connected. Node (x, y) has id y * grid_w + x; north is +y at 0 degrees.
///
/// Feature row b of a node: [street leaves in bin b, one-hot landmark of the
/// neighbour in bin b, one-hot own landmark, zero padding] + N(0, sigma^2).
EnvGraph generate_world(const WorldParams& params);

enum class LegKind : std::uint8_t { Straight, Left, Right, Final };

/// Travel along one block plus the rotations at its end. Timesteps are
/// indices into Route::actions, both ends inclusive. The closing STOP
/// belongs to no leg.
struct Leg {
  LegKind kind = LegKind::Final;
  std::size_t first_step = 0;
  std::size_t last_step = 0;
  NodeId end_node = 0;
};

struct Route {
  std::vector<NodeId> path;
  std::vector<Action> actions;
  double initial_heading = 0.0;
  std::vector<Leg> legs;
};

/// Random route covering between min_blocks and max_blocks blocks without
/// revisiting a node or making U-turns. The final block is cut at a random
/// node. `max_actions` of 0 means unbounded. Throws RouteFailed.
Route generate_route(const EnvGraph& graph, std::uint64_t seed, std::size_t min_blocks, std::size_t max_blocks,
                     std::size_t max_actions = 0);

} // namespace blocknav
