#include "blocknav/numcore/params.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/rng.hpp"

#include <cmath>

namespace blocknav::nc {

std::size_t ParamStore::add(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in) {
  const std::size_t fi = fan_in ? fan_in : (shape.empty() ? 1 : shape[0]);
  const std::size_t i = add(name, Tensor(std::move(shape)));
  fan_in_[i] = fi;
  return i;
}

std::size_t ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw Error("duplicate parameter name " + name);
  const std::size_t i = values_.size();
  index_.emplace(name, i);
  names_.push_back(name);
  fan_in_.push_back(value.shape().empty() ? 1 : value.shape()[0]);
  values_.push_back(std::move(value));
  return i;
}

std::size_t ParamStore::index(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void ParamStore::init_uniform(std::uint64_t seed) {
  rng::Engine eng(seed);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in_[i], 1)));
    for (double& v : values_[i].data()) v = rng::uniform(eng, -bound, bound);
  }
}

void ParamStore::round_to_float32() {
  for (auto& t : values_) {
    for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

std::vector<Tensor> ParamStore::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.emplace_back(v.shape());
  return out;
}

} // namespace blocknav::nc
