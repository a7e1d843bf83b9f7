#pragma once

#include "blocknav/numcore/params.hpp"
#include "blocknav/numcore/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace blocknav::nc {

class Graph;

/// Handle to a value recorded on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
};

/// Reverse-mode tape. Values are recorded in creation order; backward walks
/// the tape from the root down. Parameter values are referenced, not copied,
/// so the ParamStore must outlive the graph and stay unchanged while in use.
class Graph {
public:
  /// Called during backward with the node's own id; reads inputs through
  /// value(), its incoming gradient through out_grad(), and accumulates into
  /// grad_buffer(input), which is null for inputs that need no gradient.
  using Backprop = std::function<void(Graph&, std::uint32_t)>;

  /// With `track_gradients` false nothing is recorded for backward; used
  /// for inference.
  explicit Graph(const ParamStore* params = nullptr, bool track_gradients = true)
      : params_(params), track_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor v);
  /// Leaf that receives a gradient; used for checking ops in isolation.
  Var variable(Tensor v);
  Var param(std::size_t index);
  Var param(const std::string& name);

  Var record(Tensor value, const std::vector<Var>& inputs, Backprop backprop);

  const Tensor& value(Var v) const { return value(v.id); }
  const Tensor& value(std::uint32_t id) const;
  const Tensor& out_grad(std::uint32_t id) const { return nodes_[id].grad; }
  Tensor* grad_buffer(Var v) { return grad_buffer(v.id); }
  Tensor* grad_buffer(std::uint32_t id);

  /// Gradient of the last backward root with respect to v (zeros if v is
  /// not connected to it).
  Tensor grad(Var v) const;

  /// Throws NotScalarRoot unless root holds exactly one value.
  void backward(Var root);

  /// Parameter gradients by ParamStore index; zeros for parameters that
  /// were never used.
  std::vector<Tensor> param_gradients() const;
  void accumulate_param_gradients(std::vector<Tensor>& into) const;

  std::size_t node_count() const { return nodes_.size(); }
  const ParamStore* params() const { return params_; }

private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    Backprop backprop;
    bool needs_grad = false;
    std::int32_t param = -1;
  };

  Var push(Node node);

  const ParamStore* params_;
  bool track_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> param_nodes_;
};

// --- operations --------------------------------------------------------------
// Every operation throws ShapeMismatch on incompatible operands.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var sum(Var a);

Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// Softmax of a vector; -inf entries get probability 0.
Var softmax(Var a);

/// W is [in x out], x is [in]; returns W^T x.
Var matvec(Var W, Var x);
Var linear(Var W, Var x, Var b);
/// [n x k] * [k x m].
Var matmul(Var A, Var B);

/// Flat concatenation of the operands' values.
Var concat(const std::vector<Var>& parts);
Var slice(Var a, std::size_t begin, std::size_t len);
Var element(Var a, std::size_t i);
Var reshape(Var a, std::vector<std::size_t> shape);

Var row(Var M, std::size_t r);
Var stack_rows(const std::vector<Var>& rows);
/// Mean of rows [begin, end) of a matrix.
Var mean_rows(Var M, std::size_t begin, std::size_t end);
/// Row i of M multiplied by s[i].
Var scale_rows(Var M, Var s);
/// Entry j of the result is r[i] for the span i containing j.
Var expand_spans(Var r, const std::vector<std::pair<std::size_t, std::size_t>>& spans);

/// Row r of M multiplied elementwise by v.
Var mul_rows(Var M, Var v);

/// Scaled dot-product attention of one query over N keys, split into `heads`
/// equal slices of the model dimension D. q is [D], K and V are [N x D];
/// returns the concatenated per-head outputs [D]. When `weights` is given it
/// receives the [heads x N] attention distributions.
Var attention(Var q, Var K, Var V, std::size_t heads, Tensor* weights = nullptr);

} // namespace blocknav::nc
