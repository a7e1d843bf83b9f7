#pragma once

#include "blocknav/numcore/graph.hpp"

#include <string>
#include <vector>

namespace blocknav::nc {

struct LstmWeights {
  Var W; // [(in + hidden) x 4 hidden], gate order input, forget, candidate, output
  Var b; // [4 hidden]
};

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_zero_state(Graph& g, std::size_t hidden);
LstmState lstm_cell(const LstmWeights& w, Var x, const LstmState& s);

/// Registers "<prefix>.W" and "<prefix>.b".
void add_lstm_params(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t hidden);
LstmWeights lstm_weights(Graph& g, const std::string& prefix);

/// Embeds tokens and runs a forward and a backward LSTM; row t of the result
/// is [forward h_t, backward h_t]. Throws EmptySequence.
Var bidirectional_encode(Var embedding, const LstmWeights& fwd, const LstmWeights& bwd,
                         const std::vector<int>& tokens);

/// Projections without biases: query [d_q x D], key/value [d_kv x D],
/// output [D x D].
struct AttentionWeights {
  Var Wq;
  Var Wk;
  Var Wv;
  Var Wo;
  std::size_t heads = 1;
};

void add_attention_params(ParamStore& ps, const std::string& prefix, std::size_t d_q, std::size_t d_kv,
                          std::size_t D);
AttentionWeights attention_weights(Graph& g, const std::string& prefix, std::size_t heads);

/// Keys and values projected once, reusable across queries.
struct ProjectedMemory {
  Var K;
  Var V;
};

ProjectedMemory project_memory(const AttentionWeights& w, Var memory);

/// Output projection of per-head attention of `query` over `memory` [N x d_kv].
Var multi_head_attention(const AttentionWeights& w, Var query, Var memory, Tensor* weights = nullptr);
Var multi_head_attention(const AttentionWeights& w, Var query, const ProjectedMemory& memory,
                         Tensor* weights = nullptr);

} // namespace blocknav::nc
