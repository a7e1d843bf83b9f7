#include "blocknav/numcore/graph.hpp"

#include "blocknav/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blocknav::nc {

const Tensor& Var::value() const {
  return graph->value(id);
}

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor v) {
  Node n;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Graph::variable(Tensor v) {
  Node n;
  n.value = std::move(v);
  n.needs_grad = track_;
  return push(std::move(n));
}

Var Graph::param(std::size_t index) {
  if (!params_ || index >= params_->size()) throw Error("parameter index out of range");
  if (param_nodes_.size() < params_->size()) param_nodes_.resize(params_->size(), -1);
  if (param_nodes_[index] >= 0) return Var{this, static_cast<std::uint32_t>(param_nodes_[index])};
  Node n;
  n.external = &params_->value(index);
  n.needs_grad = track_;
  n.param = static_cast<std::int32_t>(index);
  const Var v = push(std::move(n));
  param_nodes_[index] = static_cast<std::int32_t>(v.id);
  return v;
}

Var Graph::param(const std::string& name) {
  if (!params_) throw Error("graph has no parameter store");
  return param(params_->index(name));
}

Var Graph::record(Tensor value, const std::vector<Var>& inputs, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
  if (n.needs_grad) n.backprop = std::move(backprop);
  return push(std::move(n));
}

const Tensor& Graph::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor* Graph::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(value(id).shape());
  return &n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor(value(v.id).shape());
  return n.grad;
}

void Graph::backward(Var root) {
  if (value(root).size() != 1) {
    throw NotScalarRoot("backward root has shape " + shape_string(value(root).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[root.id].needs_grad) return;
  nodes_[root.id].grad = Tensor(value(root).shape(), 1.0);
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.backprop && !n.grad.empty()) n.backprop(*this, id);
  }
}

std::vector<Tensor> Graph::param_gradients() const {
  std::vector<Tensor> out = params_ ? params_->zeros_like() : std::vector<Tensor>{};
  accumulate_param_gradients(out);
  return out;
}

void Graph::accumulate_param_gradients(std::vector<Tensor>& into) const {
  for (const Node& n : nodes_) {
    if (n.param >= 0 && !n.grad.empty()) into[static_cast<std::size_t>(n.param)].add_in_place(n.grad);
  }
}

// --- operations ---------------------------------------------------------------

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeMismatch(what);
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                                      shape_string(b.shape()) + " differ");
}

template <class F, class D>
Var unary(Var a, F forward, D derivative) {
  Graph& g = *a.graph;
  Tensor out = g.value(a);
  for (double& v : out.data()) v = forward(v);
  return g.record(std::move(out), {a}, [a, derivative](Graph& g, std::uint32_t self) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(self);
    const Tensor& gy = g.out_grad(self);
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += gy[i] * derivative(x[i], y[i]);
  });
}

} // namespace

Var add(Var a, Var b) {
  Graph& g = *a.graph;
  same_shape(g.value(a), g.value(b), "add");
  Tensor out = g.value(a);
  out.add_in_place(g.value(b));
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    if (Tensor* ga = g.grad_buffer(a)) ga->add_in_place(gy);
    if (Tensor* gb = g.grad_buffer(b)) gb->add_in_place(gy);
  });
}

Var sub(Var a, Var b) {
  Graph& g = *a.graph;
  same_shape(g.value(a), g.value(b), "sub");
  Tensor out = g.value(a);
  out.add_in_place(g.value(b), -1.0);
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    if (Tensor* ga = g.grad_buffer(a)) ga->add_in_place(gy);
    if (Tensor* gb = g.grad_buffer(b)) gb->add_in_place(gy, -1.0);
  });
}

Var mul(Var a, Var b) {
  Graph& g = *a.graph;
  same_shape(g.value(a), g.value(b), "mul");
  Tensor out = g.value(a);
  const Tensor& vb = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    if (Tensor* ga = g.grad_buffer(a)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * vb[i];
    }
    if (Tensor* gb = g.grad_buffer(b)) {
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * va[i];
    }
  });
}

Var scale(Var a, double c) {
  Graph& g = *a.graph;
  Tensor out = g.value(a);
  for (double& v : out.data()) v *= c;
  return g.record(std::move(out), {a}, [a, c](Graph& g, std::uint32_t self) {
    if (Tensor* ga = g.grad_buffer(a)) ga->add_in_place(g.out_grad(self), c);
  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : g.value(a).data()) s += v;
  return g.record(Tensor::scalar(s), {a}, [a](Graph& g, std::uint32_t self) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    const double gy = g.out_grad(self)[0];
    for (double& v : ga->data()) v += gy;
  });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var softmax(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = g.value(a);
  require(x.size() > 0, "softmax of an empty vector");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x.data()) m = std::max(m, v);
  require(std::isfinite(m), "softmax: every entry is -inf");
  Tensor out(x.shape());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    z += out[i];
  }
  for (double& v : out.data()) v /= z;
  return g.record(std::move(out), {a}, [a](Graph& g, std::uint32_t self) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    const Tensor& y = g.value(self);
    const Tensor& gy = g.out_grad(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * gy[i];
    for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += y[i] * (gy[i] - dot);
  });
}

Var matvec(Var W, Var x) {
  Graph& g = *W.graph;
  const Tensor& w = g.value(W);
  const Tensor& v = g.value(x);
  require(w.rank() == 2 && w.rows() == v.size(),
          "matvec: weight " + shape_string(w.shape()) + " with input " + shape_string(v.shape()));
  const std::size_t in = w.rows();
  const std::size_t out_dim = w.cols();
  Tensor out({out_dim});
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = v[i];
    if (xi == 0.0) continue;
    const double* wr = w.data().data() + i * out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) out[j] += wr[j] * xi;
  }
  return g.record(std::move(out), {W, x}, [W, x](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    const Tensor& w = g.value(W);
    const Tensor& v = g.value(x);
    const std::size_t in = w.rows();
    const std::size_t out_dim = w.cols();
    if (Tensor* gw = g.grad_buffer(W)) {
      for (std::size_t i = 0; i < in; ++i) {
        const double xi = v[i];
        if (xi == 0.0) continue;
        double* gr = gw->data().data() + i * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) gr[j] += xi * gy[j];
      }
    }
    if (Tensor* gx = g.grad_buffer(x)) {
      for (std::size_t i = 0; i < in; ++i) {
        const double* wr = w.data().data() + i * out_dim;
        double s = 0.0;
        for (std::size_t j = 0; j < out_dim; ++j) s += wr[j] * gy[j];
        (*gx)[i] += s;
      }
    }
  });
}

Var linear(Var W, Var x, Var b) {
  return add(matvec(W, x), b);
}

Var matmul(Var A, Var B) {
  Graph& g = *A.graph;
  const Tensor& a = g.value(A);
  const Tensor& b = g.value(B);
  require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(),
          "matmul: " + shape_string(a.shape()) + " times " + shape_string(b.shape()));
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  const std::size_t m = b.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data().data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      if (av == 0.0) continue;
      const double* brow = b.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return g.record(std::move(out), {A, B}, [A, B](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    const Tensor& a = g.value(A);
    const Tensor& b = g.value(B);
    const std::size_t n = a.rows();
    const std::size_t k = a.cols();
    const std::size_t m = b.cols();
    if (Tensor* ga = g.grad_buffer(A)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = gy.data().data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = b.data().data() + p * m;
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
          ga->at(i, p) += s;
        }
      }
    }
    if (Tensor* gb = g.grad_buffer(B)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = gy.data().data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a.at(i, p);
          if (av == 0.0) continue;
          double* gbrow = gb->data().data() + p * m;
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat of nothing");
  Graph& g = *parts.front().graph;
  std::vector<double> data;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    offsets.push_back(data.size());
    const auto& d = g.value(p).data();
    data.insert(data.end(), d.begin(), d.end());
  }
  return g.record(Tensor::vector(std::move(data)), parts, [parts, offsets](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      Tensor* gp = g.grad_buffer(parts[k]);
      if (!gp) continue;
      for (std::size_t i = 0; i < gp->size(); ++i) (*gp)[i] += gy[offsets[k] + i];
    }
  });
}

Var slice(Var a, std::size_t begin, std::size_t len) {
  Graph& g = *a.graph;
  const Tensor& x = g.value(a);
  require(begin + len <= x.size(), "slice [" + std::to_string(begin) + ", " + std::to_string(begin + len) +
                                       ") of " + shape_string(x.shape()));
  std::vector<double> data(x.data().begin() + static_cast<std::ptrdiff_t>(begin),
                           x.data().begin() + static_cast<std::ptrdiff_t>(begin + len));
  return g.record(Tensor::vector(std::move(data)), {a}, [a, begin](Graph& g, std::uint32_t self) {
    Tensor* ga = g.grad_buffer(a);
    if (!ga) return;
    const Tensor& gy = g.out_grad(self);
    for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[begin + i] += gy[i];
  });
}

Var element(Var a, std::size_t i) {
  return slice(a, i, 1);
}

Var reshape(Var a, std::vector<std::size_t> shape) {
  Graph& g = *a.graph;
  const Tensor& x = g.value(a);
  require(shape_size(shape) == x.size(), "reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  return g.record(Tensor(std::move(shape), x.data()), {a}, [a](Graph& g, std::uint32_t self) {
    if (Tensor* ga = g.grad_buffer(a)) {
      const Tensor& gy = g.out_grad(self);
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i];
    }
  });
}

Var row(Var M, std::size_t r) {
  Graph& g = *M.graph;
  const Tensor& m = g.value(M);
  require(m.rank() == 2 && r < m.rows(), "row " + std::to_string(r) + " of " + shape_string(m.shape()));
  const auto src = m.row(r);
  return g.record(Tensor::vector({src.begin(), src.end()}), {M}, [M, r](Graph& g, std::uint32_t self) {
    Tensor* gm = g.grad_buffer(M);
    if (!gm) return;
    const Tensor& gy = g.out_grad(self);
    auto dst = gm->row(r);
    for (std::size_t i = 0; i < gy.size(); ++i) dst[i] += gy[i];
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  require(!rows.empty(), "stack_rows of nothing");
  Graph& g = *rows.front().graph;
  const std::size_t width = g.value(rows.front()).size();
  std::vector<double> data;
  data.reserve(width * rows.size());
  for (const Var& r : rows) {
    const auto& d = g.value(r).data();
    require(d.size() == width, "stack_rows: rows of different width");
    data.insert(data.end(), d.begin(), d.end());
  }
  return g.record(Tensor::matrix(rows.size(), width, std::move(data)), rows,
                  [rows, width](Graph& g, std::uint32_t self) {
                    const Tensor& gy = g.out_grad(self);
                    for (std::size_t k = 0; k < rows.size(); ++k) {
                      Tensor* gr = g.grad_buffer(rows[k]);
                      if (!gr) continue;
                      for (std::size_t i = 0; i < width; ++i) (*gr)[i] += gy[k * width + i];
                    }
                  });
}

Var mean_rows(Var M, std::size_t begin, std::size_t end) {
  Graph& g = *M.graph;
  const Tensor& m = g.value(M);
  require(m.rank() == 2 && begin < end && end <= m.rows(),
          "mean_rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " + shape_string(m.shape()));
  const std::size_t c = m.cols();
  const double inv = 1.0 / static_cast<double>(end - begin);
  Tensor out({c});
  for (std::size_t r = begin; r < end; ++r) {
    const auto src = m.row(r);
    for (std::size_t i = 0; i < c; ++i) out[i] += src[i];
  }
  for (double& v : out.data()) v *= inv;
  return g.record(std::move(out), {M}, [M, begin, end, inv](Graph& g, std::uint32_t self) {
    Tensor* gm = g.grad_buffer(M);
    if (!gm) return;
    const Tensor& gy = g.out_grad(self);
    for (std::size_t r = begin; r < end; ++r) {
      auto dst = gm->row(r);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gy[i] * inv;
    }
  });
}

Var scale_rows(Var M, Var s) {
  Graph& g = *M.graph;
  const Tensor& m = g.value(M);
  const Tensor& sv = g.value(s);
  require(m.rank() == 2 && sv.size() == m.rows(),
          "scale_rows: " + shape_string(m.shape()) + " by " + shape_string(sv.shape()));
  Tensor out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double& v : out.row(r)) v *= sv[r];
  }
  return g.record(std::move(out), {M, s}, [M, s](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    const Tensor& m = g.value(M);
    const Tensor& sv = g.value(s);
    Tensor* gm = g.grad_buffer(M);
    Tensor* gs = g.grad_buffer(s);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto gr = gy.row(r);
      const auto mr = m.row(r);
      if (gm) {
        auto dst = gm->row(r);
        for (std::size_t i = 0; i < gr.size(); ++i) dst[i] += gr[i] * sv[r];
      }
      if (gs) {
        double acc = 0.0;
        for (std::size_t i = 0; i < gr.size(); ++i) acc += gr[i] * mr[i];
        (*gs)[r] += acc;
      }
    }
  });
}

Var expand_spans(Var r, const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
  Graph& g = *r.graph;
  const Tensor& rv = g.value(r);
  require(rv.size() == spans.size(), "expand_spans: " + std::to_string(rv.size()) + " scores for " +
                                         std::to_string(spans.size()) + " spans");
  std::size_t length = 0;
  for (const auto& [b, e] : spans) length = std::max(length, e);
  Tensor out({length});
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = spans[i].first; j < spans[i].second; ++j) out[j] = rv[i];
  }
  return g.record(std::move(out), {r}, [r, spans](Graph& g, std::uint32_t self) {
    Tensor* gr = g.grad_buffer(r);
    if (!gr) return;
    const Tensor& gy = g.out_grad(self);
    for (std::size_t i = 0; i < spans.size(); ++i) {
      for (std::size_t j = spans[i].first; j < spans[i].second; ++j) (*gr)[i] += gy[j];
    }
  });
}

Var mul_rows(Var M, Var v) {
  Graph& g = *M.graph;
  const Tensor& m = g.value(M);
  const Tensor& vv = g.value(v);
  require(m.rank() == 2 && vv.size() == m.cols(),
          "mul_rows: " + shape_string(m.shape()) + " by " + shape_string(vv.shape()));
  Tensor out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= vv[i];
  }
  return g.record(std::move(out), {M, v}, [M, v](Graph& g, std::uint32_t self) {
    const Tensor& gy = g.out_grad(self);
    const Tensor& m = g.value(M);
    const Tensor& vv = g.value(v);
    Tensor* gm = g.grad_buffer(M);
    Tensor* gv = g.grad_buffer(v);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto gr = gy.row(r);
      const auto mr = m.row(r);
      for (std::size_t i = 0; i < gr.size(); ++i) {
        if (gm) gm->at(r, i) += gr[i] * vv[i];
        if (gv) (*gv)[i] += gr[i] * mr[i];
      }
    }
  });
}

Var attention(Var q, Var K, Var V, std::size_t heads, Tensor* weights) {
  Graph& g = *q.graph;
  const Tensor& qv = g.value(q);
  const Tensor& kv = g.value(K);
  const Tensor& vv = g.value(V);
  const std::size_t D = qv.size();
  require(kv.rank() == 2 && vv.rank() == 2 && kv.cols() == D && vv.cols() == D && kv.rows() == vv.rows() &&
              kv.rows() > 0,
          "attention: query " + shape_string(qv.shape()) + ", keys " + shape_string(kv.shape()) + ", values " +
              shape_string(vv.shape()));
  require(heads > 0 && D % heads == 0,
          "attention: " + std::to_string(heads) + " heads do not divide dimension " + std::to_string(D));
  const std::size_t N = kv.rows();
  const std::size_t dh = D / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor probs({heads, N});
  Tensor out({D});
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < N; ++n) {
      double s = 0.0;
      for (std::size_t i = 0; i < dh; ++i) s += qv[off + i] * kv.at(n, off + i);
      s *= inv_sqrt;
      probs.at(h, n) = s;
      m = std::max(m, s);
    }
    double z = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      probs.at(h, n) = std::exp(probs.at(h, n) - m);
      z += probs.at(h, n);
    }
    for (std::size_t n = 0; n < N; ++n) {
      probs.at(h, n) /= z;
      const double a = probs.at(h, n);
      for (std::size_t i = 0; i < dh; ++i) out[off + i] += a * vv.at(n, off + i);
    }
  }
  if (weights) *weights = probs;

  return g.record(std::move(out), {q, K, V},
                  [q, K, V, heads, probs = std::move(probs), inv_sqrt](Graph& g, std::uint32_t self) {
                    const Tensor& gy = g.out_grad(self);
                    const Tensor& qv = g.value(q);
                    const Tensor& kv = g.value(K);
                    const Tensor& vv = g.value(V);
                    Tensor* gq = g.grad_buffer(q);
                    Tensor* gk = g.grad_buffer(K);
                    Tensor* gv = g.grad_buffer(V);
                    const std::size_t N = kv.rows();
                    const std::size_t D = qv.size();
                    const std::size_t dh = D / heads;
                    std::vector<double> da(N);
                    for (std::size_t h = 0; h < heads; ++h) {
                      const std::size_t off = h * dh;
                      double dot = 0.0;
                      for (std::size_t n = 0; n < N; ++n) {
                        const double a = probs.at(h, n);
                        double s = 0.0;
                        for (std::size_t i = 0; i < dh; ++i) {
                          s += vv.at(n, off + i) * gy[off + i];
                          if (gv) gv->at(n, off + i) += a * gy[off + i];
                        }
                        da[n] = s;
                        dot += a * s;
                      }
                      for (std::size_t n = 0; n < N; ++n) {
                        const double ds = probs.at(h, n) * (da[n] - dot) * inv_sqrt;
                        if (ds == 0.0) continue;
                        for (std::size_t i = 0; i < dh; ++i) {
                          if (gq) (*gq)[off + i] += ds * kv.at(n, off + i);
                          if (gk) gk->at(n, off + i) += ds * qv[off + i];
                        }
                      }
                    }
                  });
}

} // namespace blocknav::nc
