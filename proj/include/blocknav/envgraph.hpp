#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace blocknav {

using NodeId = std::int32_t;
using BlockId = std::int32_t;

enum class Action : std::uint8_t { Forward = 0, Left = 1, Right = 2, Stop = 3 };

inline constexpr std::size_t kActionCount = 4;
inline constexpr std::array<Action, kActionCount> kAllActions{Action::Forward, Action::Left,
                                                              Action::Right, Action::Stop};

std::string_view to_string(Action a);
std::optional<Action> parse_action(std::string_view s);

struct Edge {
  NodeId to = 0;
  double angle_deg = 0.0;
};

class EnvGraph;

/// Segmentation of the graph into blocks. Terminal nodes (out-degree != 2)
/// delimit blocks; a block is the chain of edges between two terminals, its
/// size counts the nodes after the starting terminal.
class BlockIndex {
public:
  struct Position {
    BlockId block = -1;
    std::size_t remaining = 0;
  };

  std::size_t block_count() const { return sizes_.size(); }
  BlockId block_of(NodeId n) const;
  std::size_t block_size(BlockId b) const;
  bool is_terminal(NodeId n) const;

  /// Block faced from (node, outgoing slot) and the FORWARD moves needed to
  /// reach its terminating node.
  Position position(NodeId n, std::size_t slot) const;
  std::size_t remaining_steps(NodeId n, std::size_t slot) const { return position(n, slot).remaining; }

  /// Node sequences of every block (start terminal first), indexed by BlockId.
  const std::vector<std::vector<NodeId>>& chains() const { return chains_; }

private:
  friend BlockIndex segment_blocks(const EnvGraph& graph);

  std::vector<BlockId> block_of_;
  std::vector<std::size_t> sizes_;
  std::vector<std::vector<NodeId>> chains_;
  std::vector<bool> terminal_;
  std::vector<std::vector<Position>> positions_;
};

/// Directed street graph. Nodes are dense ids 0..N-1; out-edges are kept
/// sorted ascending by angle (compass convention: clockwise positive, so the
/// previous entry in the list is to the agent's left).
///
/// Features are stored per node as `bins` rows of `feature_dim` values in the
/// world frame, row b centred on heading b * 360 / bins.
class EnvGraph {
public:
  class Builder {
  public:
    Builder(std::size_t bins, std::size_t feature_dim);

    NodeId add_node(std::vector<double> features, int landmark = -1);
    void add_edge(NodeId from, NodeId to, double angle_deg);

    /// Validates every invariant and computes the block index.
    /// Throws MalformedGraph on violation.
    EnvGraph build() &&;

  private:
    std::size_t bins_;
    std::size_t feature_dim_;
    std::vector<std::vector<double>> features_;
    std::vector<int> landmarks_;
    std::vector<std::vector<Edge>> out_;
  };

  std::size_t node_count() const { return out_.size(); }
  std::size_t edge_count() const;
  std::size_t bins() const { return bins_; }
  std::size_t feature_dim() const { return feature_dim_; }
  bool contains(NodeId n) const { return n >= 0 && static_cast<std::size_t>(n) < out_.size(); }

  std::span<const Edge> out_edges(NodeId n) const;
  std::span<const double> features(NodeId n) const;
  /// Landmark id attached to the node, or -1 when the world carries none.
  int landmark(NodeId n) const;
  bool has_edge(NodeId from, NodeId to) const;

  /// Slot of the outgoing edge whose angle equals `heading`.
  std::optional<std::size_t> edge_slot(NodeId n, double heading) const;

  /// Observation in the agent frame: bins x feature_dim, row 0 is the bin
  /// the agent faces, rows continue clockwise.
  std::vector<double> observation(NodeId n, double heading) const;

  const BlockIndex& blocks() const { return blocks_; }

private:
  EnvGraph() = default;

  std::size_t bins_ = 0;
  std::size_t feature_dim_ = 0;
  std::vector<std::vector<double>> features_;
  std::vector<int> landmarks_;
  std::vector<std::vector<Edge>> out_;
  BlockIndex blocks_;
};

struct AgentState {
  NodeId node = 0;
  double heading = 0.0;
  double prev_heading = 0.0;
  std::uint32_t step_index = 0;
  /// Set by the first FORWARD of an episode. A terminal node reached by
  /// moving is the end of the block just travelled (progress 0); before any
  /// move the agent stands at the start of the block it faces.
  bool moved = false;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct TurnSignals {
  double g_c = 0.0;
  double g_l = 0.0;
  std::size_t junction_count = 0;
};

/// Wraps an angle into (-180, 180].
double wrap_degrees(double deg);

/// World-frame feature row holding `heading`; bin b is centred on b * 360 / bins.
std::size_t heading_bin(double heading, std::size_t bins);

/// wrap(heading - prev_heading) / 180, in (-1, 1].
double normalize_heading_delta(double prev_heading, double heading);

/// Sum of history[t-k] for k = 0..K, entries before the start count as zero.
double long_term_angle(std::span<const double> g_history, std::size_t t, std::size_t K);

BlockIndex segment_blocks(const EnvGraph& graph);

/// N^step / N^all of the block the agent is in. Throws UnknownNode.
double block_progress_label(const EnvGraph& graph, const AgentState& state);

/// Heading taken on arrival at `node` after travelling along `arrival_heading`:
/// the outgoing edge closest in angle, ties to the lower angle.
double forward_heading(const EnvGraph& graph, NodeId node, double arrival_heading);

/// Initial state facing `heading`; heading must match an out-edge unless the
/// node has none.
AgentState initial_state(const EnvGraph& graph, NodeId node, double heading);

/// Applies an action. Returns nullopt for STOP (terminal).
/// Throws NoForwardEdge when FORWARD is taken on a node with no out-edges.
std::optional<AgentState> step(const EnvGraph& graph, const AgentState& state, Action action);

/// Heading the agent would face after LEFT/RIGHT, or the current heading for
/// FORWARD/STOP. nullopt when the node has no outgoing edge.
std::optional<double> heading_after(const EnvGraph& graph, const AgentState& state, Action action);

/// Minimum number of directed edges from u to v; nullopt when unreachable.
std::optional<std::size_t> shortest_path_hops(const EnvGraph& graph, NodeId u, NodeId v);

std::size_t junction_count(const EnvGraph& graph, NodeId node);

} // namespace blocknav
