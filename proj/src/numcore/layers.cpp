#include "blocknav/numcore/layers.hpp"

#include "blocknav/errors.hpp"

namespace blocknav::nc {

LstmState lstm_zero_state(Graph& g, std::size_t hidden) {
  return {g.constant(Tensor({hidden})), g.constant(Tensor({hidden}))};
}

LstmState lstm_cell(const LstmWeights& w, Var x, const LstmState& s) {
  const std::size_t hidden = s.h.value().size();
  const Tensor& W = w.W.value();
  if (W.rank() != 2 || W.rows() != x.value().size() + hidden || W.cols() != 4 * hidden) {
    throw ShapeMismatch("lstm_cell: weight " + shape_string(W.shape()) + " for input " +
                        shape_string(x.value().shape()) + " and hidden size " + std::to_string(hidden));
  }
  const Var z = linear(w.W, concat({x, s.h}), w.b);
  const Var i = sigmoid(slice(z, 0, hidden));
  const Var f = sigmoid(slice(z, hidden, hidden));
  const Var cand = tanh(slice(z, 2 * hidden, hidden));
  const Var o = sigmoid(slice(z, 3 * hidden, hidden));
  const Var c = add(mul(f, s.c), mul(i, cand));
  return {mul(o, tanh(c)), c};
}

void add_lstm_params(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t hidden) {
  ps.add(prefix + ".W", {in + hidden, 4 * hidden});
  ps.add(prefix + ".b", {4 * hidden}, hidden);
}

LstmWeights lstm_weights(Graph& g, const std::string& prefix) {
  return {g.param(prefix + ".W"), g.param(prefix + ".b")};
}

Var bidirectional_encode(Var embedding, const LstmWeights& fwd, const LstmWeights& bwd,
                         const std::vector<int>& tokens) {
  if (tokens.empty()) throw EmptySequence("cannot encode an empty token sequence");
  Graph& g = *embedding.graph;
  const std::size_t L = tokens.size();
  const std::size_t hf = fwd.b.value().size() / 4;
  const std::size_t hb = bwd.b.value().size() / 4;
  std::vector<Var> emb;
  emb.reserve(L);
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= embedding.value().rows()) {
      throw ShapeMismatch("token id " + std::to_string(t) + " outside embedding table");
    }
    emb.push_back(row(embedding, static_cast<std::size_t>(t)));
  }
  std::vector<Var> hf_seq(L);
  std::vector<Var> hb_seq(L);
  LstmState s = lstm_zero_state(g, hf);
  for (std::size_t t = 0; t < L; ++t) {
    s = lstm_cell(fwd, emb[t], s);
    hf_seq[t] = s.h;
  }
  s = lstm_zero_state(g, hb);
  for (std::size_t t = L; t-- > 0;) {
    s = lstm_cell(bwd, emb[t], s);
    hb_seq[t] = s.h;
  }
  std::vector<Var> rows;
  rows.reserve(L);
  for (std::size_t t = 0; t < L; ++t) rows.push_back(concat({hf_seq[t], hb_seq[t]}));
  return stack_rows(rows);
}

void add_attention_params(ParamStore& ps, const std::string& prefix, std::size_t d_q, std::size_t d_kv,
                          std::size_t D) {
  ps.add(prefix + ".Wq", {d_q, D});
  ps.add(prefix + ".Wk", {d_kv, D});
  ps.add(prefix + ".Wv", {d_kv, D});
  ps.add(prefix + ".Wo", {D, D});
}

AttentionWeights attention_weights(Graph& g, const std::string& prefix, std::size_t heads) {
  return {g.param(prefix + ".Wq"), g.param(prefix + ".Wk"), g.param(prefix + ".Wv"), g.param(prefix + ".Wo"),
          heads};
}

ProjectedMemory project_memory(const AttentionWeights& w, Var memory) {
  return {matmul(memory, w.Wk), matmul(memory, w.Wv)};
}

Var multi_head_attention(const AttentionWeights& w, Var query, Var memory, Tensor* weights) {
  return multi_head_attention(w, query, project_memory(w, memory), weights);
}

Var multi_head_attention(const AttentionWeights& w, Var query, const ProjectedMemory& memory, Tensor* weights) {
  const Var q = matvec(w.Wq, query);
  return matvec(w.Wo, attention(q, memory.K, memory.V, w.heads, weights));
}

} // namespace blocknav::nc
