#include "blocknav/envgraph.hpp"

#include "blocknav/errors.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace blocknav {
namespace {

struct Walk {
  std::vector<NodeId> nodes;
  std::vector<std::size_t> slots; // slot taken at nodes[j], j < nodes.size() - 1
};

// Follows FORWARD from (start, slot) until a terminal node is reached.
Walk walk_to_terminal(const EnvGraph& g, const std::vector<bool>& terminal, NodeId start, std::size_t slot) {
  Walk w;
  w.nodes.push_back(start);
  w.slots.push_back(slot);
  NodeId cur = start;
  Edge e = g.out_edges(cur)[slot];
  const std::size_t limit = g.node_count() + 1;
  while (true) {
    cur = e.to;
    w.nodes.push_back(cur);
    if (terminal[static_cast<std::size_t>(cur)]) break;
    if (w.nodes.size() > limit) {
      throw MalformedGraph("segmentation walk from node " + std::to_string(start) + " never reaches a terminal");
    }
    const double h = forward_heading(g, cur, e.angle_deg);
    const auto next = g.edge_slot(cur, h);
    w.slots.push_back(*next);
    e = g.out_edges(cur)[*next];
  }
  return w;
}

} // namespace

BlockId BlockIndex::block_of(NodeId n) const {
  if (n < 0 || static_cast<std::size_t>(n) >= block_of_.size()) {
    throw UnknownNode("unknown node " + std::to_string(n));
  }
  return block_of_[static_cast<std::size_t>(n)];
}

std::size_t BlockIndex::block_size(BlockId b) const {
  if (b < 0 || static_cast<std::size_t>(b) >= sizes_.size()) throw Error("unknown block " + std::to_string(b));
  return sizes_[static_cast<std::size_t>(b)];
}

bool BlockIndex::is_terminal(NodeId n) const {
  if (n < 0 || static_cast<std::size_t>(n) >= terminal_.size()) {
    throw UnknownNode("unknown node " + std::to_string(n));
  }
  return terminal_[static_cast<std::size_t>(n)];
}

BlockIndex::Position BlockIndex::position(NodeId n, std::size_t slot) const {
  if (n < 0 || static_cast<std::size_t>(n) >= positions_.size()) {
    throw UnknownNode("unknown node " + std::to_string(n));
  }
  const auto& p = positions_[static_cast<std::size_t>(n)];
  if (slot >= p.size()) throw Error("node " + std::to_string(n) + " has no edge slot " + std::to_string(slot));
  return p[slot];
}

BlockIndex segment_blocks(const EnvGraph& g) {
  const std::size_t n = g.node_count();
  BlockIndex idx;
  idx.terminal_.assign(n, false);
  idx.block_of_.assign(n, -1);
  idx.positions_.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto deg = g.out_edges(static_cast<NodeId>(v)).size();
    idx.terminal_[v] = deg != 2;
    idx.positions_[v].assign(deg, BlockIndex::Position{});
  }

  std::map<std::vector<NodeId>, BlockId> by_chain;
  auto process = [&](NodeId start, std::size_t slot) {
    Walk w = walk_to_terminal(g, idx.terminal_, start, slot);
    std::vector<NodeId> reversed(w.nodes.rbegin(), w.nodes.rend());
    const auto& key = std::min(w.nodes, reversed);
    auto [it, inserted] = by_chain.emplace(key, static_cast<BlockId>(idx.sizes_.size()));
    if (inserted) {
      idx.sizes_.push_back(w.nodes.size() - 1);
      idx.chains_.push_back(w.nodes);
    }
    const BlockId id = it->second;
    const std::size_t k = w.nodes.size() - 1;
    for (std::size_t j = 0; j < k; ++j) {
      idx.positions_[static_cast<std::size_t>(w.nodes[j])][w.slots[j]] = {id, k - j};
    }
    for (std::size_t j = 1; j < k; ++j) {
      auto& b = idx.block_of_[static_cast<std::size_t>(w.nodes[j])];
      if (b < 0) b = id;
    }
  };

  for (std::size_t v = 0; v < n; ++v) {
    if (!idx.terminal_[v]) continue;
    const auto deg = g.out_edges(static_cast<NodeId>(v)).size();
    for (std::size_t s = 0; s < deg; ++s) process(static_cast<NodeId>(v), s);
  }
  // Rings of degree-2 nodes have no terminal; the lowest id of each ring
  // stands in for one.
  for (std::size_t v = 0; v < n; ++v) {
    if (idx.terminal_[v] || idx.block_of_[v] >= 0) continue;
    idx.terminal_[v] = true;
    for (std::size_t s = 0; s < 2; ++s) process(static_cast<NodeId>(v), s);
  }

  // Interior slots no walk covered (one-way irregularities).
  for (std::size_t v = 0; v < n; ++v) {
    auto& slots = idx.positions_[v];
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s].block >= 0) continue;
      const Walk w = walk_to_terminal(g, idx.terminal_, static_cast<NodeId>(v), s);
      const BlockId b = idx.block_of_[v];
      const std::size_t remaining = w.nodes.size() - 1;
      if (b < 0 || remaining > idx.sizes_[static_cast<std::size_t>(b)]) {
        throw MalformedGraph("node " + std::to_string(v) + " slot " + std::to_string(s) +
                             " is not reachable by the segmentation walk");
      }
      slots[s] = {b, remaining};
    }
  }

  // Terminals join the lowest-numbered block that touches them.
  for (std::size_t v = 0; v < n; ++v) {
    if (!idx.terminal_[v] || idx.block_of_[v] >= 0) continue;
    BlockId best = -1;
    for (const auto& p : idx.positions_[v]) {
      if (best < 0 || p.block < best) best = p.block;
    }
    if (best < 0) {
      for (std::size_t b = 0; b < idx.chains_.size(); ++b) {
        const auto& c = idx.chains_[b];
        if (c.front() == static_cast<NodeId>(v) || c.back() == static_cast<NodeId>(v)) {
          best = static_cast<BlockId>(b);
          break;
        }
      }
    }
    if (best < 0) {
      best = static_cast<BlockId>(idx.sizes_.size());
      idx.sizes_.push_back(1);
      idx.chains_.push_back({static_cast<NodeId>(v)});
    }
    idx.block_of_[v] = best;
  }
  return idx;
}

double block_progress_label(const EnvGraph& graph, const AgentState& state) {
  if (!graph.contains(state.node)) throw UnknownNode("unknown node " + std::to_string(state.node));
  const BlockIndex& idx = graph.blocks();
  if (graph.out_edges(state.node).empty()) return 0.0;
  if (idx.is_terminal(state.node) && state.moved) return 0.0;
  const auto slot = graph.edge_slot(state.node, state.heading);
  if (!slot) throw Error("heading does not match an outgoing edge of node " + std::to_string(state.node));
  const auto pos = idx.position(state.node, *slot);
  return static_cast<double>(pos.remaining) / static_cast<double>(idx.block_size(pos.block));
}

} // namespace blocknav
