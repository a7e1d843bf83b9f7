#include "blocknav/numcore/gradcheck.hpp"

#include "blocknav/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace blocknav::nc {

std::string GradCheckReport::summary() const {
  if (failures.empty()) return "ok";
  std::ostringstream out;
  out << failures.size() << " of " << checked << " entries exceed tolerance:";
  for (std::size_t i = 0; i < failures.size() && i < 10; ++i) {
    const auto& f = failures[i];
    out << " " << f.param << "[" << f.index << "] analytic=" << f.analytic << " numeric=" << f.numeric
        << " rel=" << f.rel_err << ";";
  }
  return out.str();
}

GradCheckReport grad_check(ParamStore& params, const std::function<Var(Graph&)>& build_loss,
                           const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  {
    Graph g(&params);
    const Var loss = build_loss(g);
    g.backward(loss);
    analytic = g.param_gradients();
  }
  auto eval = [&]() {
    Graph g(&params);
    return build_loss(g).value().item();
  };

  rng::Engine eng(options.seed);
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params.value(p);
    const std::size_t n = w.size();
    if (n == 0) continue;
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(options.fraction * n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::shuffle(order, eng);
    for (std::size_t j = 0; j < k && j < n; ++j) {
      const std::size_t i = order[j];
      const double saved = w[i];
      w[i] = saved + options.h;
      const double up = eval();
      w[i] = saved - options.h;
      const double down = eval();
      w[i] = saved;
      const double num = (up - down) / (2.0 * options.h);
      const double ana = analytic[p][i];
      const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), options.floor});
      ++report.checked;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      if (!(rel <= options.tolerance)) report.failures.push_back({params.name(p), i, ana, num, rel});
    }
  }
  return report;
}

} // namespace blocknav::nc
