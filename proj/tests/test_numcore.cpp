#include "blocknav/errors.hpp"
#include "blocknav/numcore/adam.hpp"
#include "blocknav/numcore/checkpoint.hpp"
#include "blocknav/numcore/gradcheck.hpp"
#include "blocknav/numcore/graph.hpp"
#include "blocknav/numcore/layers.hpp"
#include "blocknav/numcore/losses.hpp"
#include "blocknav/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace blocknav;
using namespace blocknav::nc;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Tensor random_tensor(std::vector<std::size_t> shape, rng::Engine& eng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng::uniform(eng, lo, hi);
  return t;
}

using Build = std::function<Var(Graph&, const std::vector<Var>&)>;

// Central differences over every input entry of a scalar-valued expression,
// compared with backward. Independent of grad_check.
double max_gradient_error(const Build& f, std::vector<Tensor> inputs) {
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Graph g;
    std::vector<Var> vs;
    for (const auto& x : xs) vs.push_back(g.variable(x));
    return f(g, vs).value().item();
  };
  Graph g;
  std::vector<Var> vs;
  for (const auto& x : inputs) vs.push_back(g.variable(x));
  g.backward(f(g, vs));
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = g.grad(vs[i]);
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double h = 1e-6;
      auto plus = inputs;
      plus[i][k] += h;
      auto minus = inputs;
      minus[i][k] -= h;
      const double numeric = (evaluate(plus) - evaluate(minus)) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic[k]) / std::max({std::abs(numeric), std::abs(analytic[k]), 1e-4}));
    }
  }
  return worst;
}

// Weighted sum so every output entry has a distinct gradient.
Var weighted_sum(Graph& g, Var x) {
  Tensor w(x.value().shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
  return sum(mul(x, g.constant(w)));
}

} // namespace

TEST_CASE("elementwise ops compute the right values") {
  Graph g;
  const Var a = g.constant(Tensor::vector({1, -2, 3}));
  const Var b = g.constant(Tensor::vector({4, 5, -6}));
  CHECK(add(a, b).value() == Tensor::vector({5, 3, -3}));
  CHECK(sub(a, b).value() == Tensor::vector({-3, -7, 9}));
  CHECK(mul(a, b).value() == Tensor::vector({4, -10, -18}));
  CHECK(scale(a, 2).value() == Tensor::vector({2, -4, 6}));
  CHECK(sum(a).value().item() == 2);
  CHECK(relu(a).value() == Tensor::vector({1, 0, 3}));
  CHECK(sigmoid(g.constant(Tensor::vector({0}))).value()[0] == 0.5);
  CHECK(sigmoid(g.constant(Tensor::vector({-800}))).value()[0] == 0.0);
  CHECK(sigmoid(g.constant(Tensor::vector({800}))).value()[0] == 1.0);
  CHECK(tanh(a).value()[2] == doctest::Approx(std::tanh(3.0)));
  CHECK_THROWS_AS(add(a, g.constant(Tensor::vector({1, 2}))), ShapeMismatch);
}

TEST_CASE("matrix ops agree with index loops") {
  rng::Engine eng(1);
  const Tensor A = random_tensor({3, 4}, eng);
  const Tensor B = random_tensor({4, 2}, eng);
  const Tensor x = random_tensor({3}, eng);
  Graph g;
  const Tensor AB = matmul(g.constant(A), g.constant(B)).value();
  const Tensor Ax = matvec(g.constant(A), g.constant(x)).value();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += A.at(i, k) * B.at(k, j);
      CHECK(AB.at(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  }
  for (std::size_t j = 0; j < 4; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += A.at(i, j) * x[i];
    CHECK(Ax[j] == doctest::Approx(s).epsilon(1e-14));
  }
  CHECK_THROWS_AS(matmul(g.constant(A), g.constant(A)), ShapeMismatch);
  CHECK(mean_rows(g.constant(A), 1, 3).value()[2] == doctest::Approx((A.at(1, 2) + A.at(2, 2)) / 2));
  const Var spans = expand_spans(g.constant(Tensor::vector({2, 3})), {{0, 2}, {2, 5}});
  CHECK(spans.value() == Tensor::vector({2, 2, 3, 3, 3}));
}

TEST_CASE("op gradients match central differences") {
  rng::Engine eng(2);
  const std::vector<std::pair<const char*, std::pair<Build, std::vector<Tensor>>>> cases = {
      {"mul", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, mul(v[0], v[1])); },
               {random_tensor({5}, eng), random_tensor({5}, eng)}}},
      {"sigmoid", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, sigmoid(v[0])); },
                   {random_tensor({5}, eng, -3, 3)}}},
      {"tanh", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, tanh(v[0])); },
                {random_tensor({5}, eng, -3, 3)}}},
      {"relu", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, relu(v[0])); },
                {Tensor::vector({0.5, -0.7, 1.2, -0.1})}}},
      {"softmax", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, softmax(v[0])); },
                   {random_tensor({6}, eng, -2, 2)}}},
      {"matvec", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, matvec(v[0], v[1])); },
                  {random_tensor({3, 4}, eng), random_tensor({3}, eng)}}},
      {"matmul", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, matmul(v[0], v[1])); },
                  {random_tensor({2, 3}, eng), random_tensor({3, 4}, eng)}}},
      {"linear", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, linear(v[0], v[1], v[2])); },
                  {random_tensor({3, 2}, eng), random_tensor({3}, eng), random_tensor({2}, eng)}}},
      {"concat/slice", {[](Graph& g, const std::vector<Var>& v) {
                          return weighted_sum(g, slice(concat({v[0], v[1]}), 2, 4));
                        },
                        {random_tensor({3}, eng), random_tensor({4}, eng)}}},
      {"rows", {[](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, stack_rows({row(v[0], 2), mean_rows(v[0], 0, 2), element(v[1], 1)}));
                },
                {random_tensor({3, 1}, eng), random_tensor({3}, eng)}}},
      {"scale_rows", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, scale_rows(v[0], v[1])); },
                      {random_tensor({3, 2}, eng), random_tensor({3}, eng)}}},
      {"expand_spans", {[](Graph& g, const std::vector<Var>& v) {
                          return weighted_sum(g, scale_rows(v[0], expand_spans(v[1], {{0, 1}, {1, 3}})));
                        },
                        {random_tensor({3, 2}, eng), random_tensor({2}, eng)}}},
      {"mul_rows", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, mul_rows(v[0], v[1])); },
                    {random_tensor({3, 2}, eng), random_tensor({2}, eng)}}},
      {"reshape", {[](Graph& g, const std::vector<Var>& v) {
                     return weighted_sum(g, matvec(reshape(v[0], {2, 3}), v[1]));
                   },
                   {random_tensor({6}, eng), random_tensor({2}, eng)}}},
      {"attention", {[](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, attention(v[0], v[1], v[2], 2)); },
                     {random_tensor({4}, eng), random_tensor({3, 4}, eng), random_tensor({3, 4}, eng)}}},
  };
  for (const auto& [name, c] : cases) {
    CAPTURE(name);
    CHECK(max_gradient_error(c.first, c.second) < 1e-6);
  }
}

TEST_CASE("softmax properties") {
  rng::Engine eng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng::uniform_index(eng, 9);
    Tensor x = random_tensor({n}, eng, -20, 20);
    const double shift = rng::uniform(eng, -50, 50);
    Tensor y = x;
    for (double& v : y.data()) v += shift;
    Graph g;
    const Tensor p = softmax(g.constant(x)).value();
    const Tensor q = softmax(g.constant(y)).value();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += p[i];
      CHECK(std::abs(p[i] - q[i]) <= 1e-12);
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
  Graph g;
  const Tensor p = softmax(g.constant(Tensor::vector({1.0, -kInf, 1.0}))).value();
  CHECK(p == Tensor::vector({0.5, 0.0, 0.5}));
}

TEST_CASE("attention matches a scalar loop") {
  rng::Engine eng(4);
  const std::size_t N = 3, D = 4, H = 2, dh = 2;
  const Tensor q = random_tensor({D}, eng);
  const Tensor K = random_tensor({N, D}, eng);
  const Tensor V = random_tensor({N, D}, eng);
  Graph g;
  Tensor weights;
  const Tensor out = attention(g.constant(q), g.constant(K), g.constant(V), H, &weights).value();
  REQUIRE(weights.shape() == std::vector<std::size_t>{H, N});
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<double> s(N);
    double mx = -kInf;
    for (std::size_t n = 0; n < N; ++n) {
      s[n] = 0;
      for (std::size_t k = 0; k < dh; ++k) s[n] += q[h * dh + k] * K.at(n, h * dh + k);
      s[n] /= std::sqrt(double(dh));
      mx = std::max(mx, s[n]);
    }
    double z = 0;
    for (double& v : s) z += (v = std::exp(v - mx));
    double row_total = 0;
    for (std::size_t n = 0; n < N; ++n) {
      CHECK(weights.at(h, n) == doctest::Approx(s[n] / z).epsilon(1e-12));
      row_total += weights.at(h, n);
    }
    CHECK(std::abs(row_total - 1.0) <= 1e-9);
    for (std::size_t k = 0; k < dh; ++k) {
      double o = 0;
      for (std::size_t n = 0; n < N; ++n) o += s[n] / z * V.at(n, h * dh + k);
      CHECK(out[h * dh + k] == doctest::Approx(o).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(attention(g.constant(q), g.constant(K), g.constant(V), 3), ShapeMismatch);
}

TEST_CASE("lstm cell matches the closed form") {
  ParamStore ps;
  add_lstm_params(ps, "cell", 1, 1);
  // rows: input x, previous h; columns: input, forget, candidate, output
  ps.value("cell.W") = Tensor::matrix(2, 4, {0.5, -0.3, 0.8, 0.2, 0.1, 0.4, -0.6, 0.7});
  ps.value("cell.b") = Tensor::vector({0.1, 0.2, -0.1, 0.05});
  Graph g(&ps);
  const LstmWeights w = lstm_weights(g, "cell");
  LstmState s{g.constant(Tensor::vector({0.3})), g.constant(Tensor::vector({-0.2}))};
  const double x = 0.9, h = 0.3, c = -0.2;
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  const double i = sig(0.5 * x + 0.1 * h + 0.1);
  const double f = sig(-0.3 * x + 0.4 * h + 0.2);
  const double gg = std::tanh(0.8 * x - 0.6 * h - 0.1);
  const double o = sig(0.2 * x + 0.7 * h + 0.05);
  const double c1 = f * c + i * gg;
  const double h1 = o * std::tanh(c1);
  const LstmState next = lstm_cell(w, g.constant(Tensor::vector({x})), s);
  CHECK(next.c.value()[0] == doctest::Approx(c1).epsilon(1e-14));
  CHECK(next.h.value()[0] == doctest::Approx(h1).epsilon(1e-14));
}

TEST_CASE("bidirectional encoder reads both directions") {
  ParamStore ps;
  ps.add("emb", {5, 3});
  add_lstm_params(ps, "f", 3, 2);
  add_lstm_params(ps, "b", 3, 2);
  ps.init_uniform(7);
  Graph g(&ps);
  const Var I = bidirectional_encode(g.param("emb"), lstm_weights(g, "f"), lstm_weights(g, "b"), {1, 4, 2});
  REQUIRE(I.value().shape() == std::vector<std::size_t>{3, 4});
  // the forward half of row 0 only sees token 1
  Graph g2(&ps);
  const Var J = bidirectional_encode(g2.param("emb"), lstm_weights(g2, "f"), lstm_weights(g2, "b"), {1, 0, 3});
  CHECK(I.value().at(0, 0) == J.value().at(0, 0));
  CHECK(I.value().at(0, 2) != J.value().at(0, 2));
  CHECK_THROWS_AS(bidirectional_encode(g.param("emb"), lstm_weights(g, "f"), lstm_weights(g, "b"), {}),
                  EmptySequence);
}

TEST_CASE("losses") {
  Graph g;
  const Var p = g.variable(Tensor::vector({0.2, 0.9}));
  CHECK(mse(p, Tensor::vector({0.0, 1.0})).value().item() == doctest::Approx((0.04 + 0.01) / 2));
  CHECK(mse(p, Tensor::vector({0.0, 1.0}), Reduction::Sum).value().item() == doctest::Approx(0.05));
  CHECK(bce(p, Tensor::vector({1, 0})).value().item() ==
        doctest::Approx(-std::log(0.2) - std::log(0.1)));

  const Var s = g.variable(Tensor::vector({1.0, 2.0, -kInf, 0.5}));
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  const Var ce = ce_from_scores(s, 1);
  CHECK(ce.value().item() == doctest::Approx(lse - 2.0).epsilon(1e-14));
  g.backward(ce);
  const Tensor grad = g.grad(s);
  CHECK(grad[2] == 0.0);
  CHECK(grad[1] == doctest::Approx(std::exp(2.0 - lse) - 1.0));
  CHECK_THROWS_AS(ce_from_scores(s, 2), Error);

  Graph h;
  const Var sat = h.variable(Tensor::vector({1.0}));
  const Var l = bce(sat, Tensor::vector({0.0}));
  CHECK(std::isfinite(l.value().item()));
  h.backward(l);
  CHECK(h.grad(sat)[0] == 0.0);
}

TEST_CASE("backward needs a scalar root and accumulates shared uses") {
  Graph g;
  const Var x = g.variable(Tensor::vector({2.0, 3.0}));
  CHECK_THROWS_AS(g.backward(x), NotScalarRoot);
  const Var y = sum(mul(x, x));
  g.backward(y);
  CHECK(g.grad(x) == Tensor::vector({4.0, 6.0}));
  g.backward(y); // gradients are reset between calls
  CHECK(g.grad(x) == Tensor::vector({4.0, 6.0}));
}

TEST_CASE("inference graphs record no backward closures") {
  ParamStore ps;
  ps.add("w", Tensor::vector({1.0, 2.0}));
  Graph g(&ps, false);
  const Var y = sum(mul(g.param("w"), g.param("w")));
  CHECK(y.value().item() == 5.0);
  CHECK(g.grad_buffer(y) == nullptr);
}

TEST_CASE("grad_check passes on a network and fails on a broken op") {
  ParamStore ps;
  ps.add("W", {4, 3});
  ps.add("b", {3}, 4);
  ps.init_uniform(5);
  const Tensor x = Tensor::vector({0.3, -0.2, 0.9, 0.1});
  auto good = [&](Graph& g) { return sum(tanh(linear(g.param("W"), g.constant(x), g.param("b")))); };
  GradCheckOptions opt;
  opt.fraction = 1.0;
  CHECK(grad_check(ps, good, opt).passed());

  auto broken = [&](Graph& g) {
    const Var z = linear(g.param("W"), g.constant(x), g.param("b"));
    Tensor out = z.value();
    for (double& v : out.data()) v = v * v;
    // backward drops the factor 2
    const Var y = g.record(out, {z}, [id = z.id](Graph& gr, std::uint32_t self) {
      Tensor* gz = gr.grad_buffer(id);
      if (!gz) return;
      const Tensor& up = gr.out_grad(self);
      const Tensor& zv = gr.value(id);
      for (std::size_t i = 0; i < gz->size(); ++i) (*gz)[i] += up[i] * zv[i];
    });
    return sum(y);
  };
  const auto report = grad_check(ps, broken, opt);
  CHECK_FALSE(report.passed());
  CHECK(report.summary().find("W") != std::string::npos);
}

TEST_CASE("adam follows the closed form") {
  ParamStore ps;
  ps.add("p", Tensor::vector({1.0, -2.0}));
  AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
  Adam adam(ps, cfg);
  const std::vector<Tensor> g1{Tensor::vector({0.5, -4.0})};
  const std::vector<Tensor> g2{Tensor::vector({-1.0, 2.0})};
  adam.step(ps, g1);
  // first step moves every entry by lr against the sign of its gradient
  const double first_step[2] = {1.0 - 0.1 * 0.5 / (0.5 + 1e-8), -2.0 + 0.1 * 4.0 / (4.0 + 1e-8)};
  CHECK(ps.value("p")[0] == doctest::Approx(first_step[0]).epsilon(1e-12));
  CHECK(ps.value("p")[1] == doctest::Approx(first_step[1]).epsilon(1e-12));
  adam.step(ps, g2);
  for (std::size_t i = 0; i < 2; ++i) {
    const double m = 0.9 * (0.1 * g1[0][i]) + 0.1 * g2[0][i];
    const double v = 0.999 * (0.001 * g1[0][i] * g1[0][i]) + 0.001 * g2[0][i] * g2[0][i];
    const double mhat = m / (1 - 0.81);
    const double vhat = v / (1 - 0.999 * 0.999);
    const double first = first_step[i];
    CHECK(ps.value("p")[i] == doctest::Approx(first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-12));
  }
  CHECK(adam.steps() == 2);
}

TEST_CASE("global norm clipping") {
  std::vector<Tensor> g{Tensor::vector({3.0}), Tensor::vector({4.0, 0.0})};
  CHECK(global_norm(g) == 5.0);
  CHECK(clip_global_norm(g, 10.0) == 5.0);
  CHECK(g[0][0] == 3.0);
  CHECK(clip_global_norm(g, 1.0) == 5.0);
  CHECK(global_norm(g) == doctest::Approx(1.0));
  CHECK(g[1][0] == doctest::Approx(0.8));
}

TEST_CASE("parameter initialisation and float rounding") {
  ParamStore a;
  a.add("W", {10, 4});
  a.add("b", {4}, 10);
  a.init_uniform(3);
  ParamStore b = a;
  b.init_uniform(3);
  CHECK(a == b);
  b.init_uniform(4);
  CHECK_FALSE(a == b);
  for (double v : a.value("W").data()) CHECK(std::abs(v) <= 1.0 / std::sqrt(10.0));
  CHECK(a.total_size() == 44);
  CHECK_THROWS_AS(a.add("W", {1}), Error);
  a.round_to_float32();
  for (double v : a.value("b").data()) CHECK(double(float(v)) == v);
}

TEST_CASE("checkpoint round trip and corruption") {
  ParamStore ps;
  ps.add("embed", {3, 2});
  ps.add("bias", {2}, 3);
  ps.init_uniform(8);
  ps.round_to_float32();
  const std::string bytes = encode_checkpoint(ps, "{\"d\":2}");
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.params == ps);
  CHECK(back.meta == "{\"d\":2}");
  CHECK(encode_checkpoint(back.params, back.meta) == bytes);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), DataError);
  CHECK_THROWS_AS(decode_checkpoint(""), DataError);
}
