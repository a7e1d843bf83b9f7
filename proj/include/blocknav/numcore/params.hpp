#pragma once

#include "blocknav/numcore/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace blocknav::nc {

/// Named trainable tensors in insertion order.
class ParamStore {
public:
  /// `fan_in` sets the init range; 0 means shape[0].
  std::size_t add(const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in = 0);
  std::size_t add(const std::string& name, Tensor value);

  std::size_t size() const { return values_.size(); }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index(const std::string& name) const;
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  Tensor& value(const std::string& n) { return values_[index(n)]; }
  const Tensor& value(const std::string& n) const { return values_[index(n)]; }
  std::size_t total_size() const;

  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every tensor, in order.
  void init_uniform(std::uint64_t seed);
  void round_to_float32();
  std::vector<Tensor> zeros_like() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<std::size_t> fan_in_;
  std::map<std::string, std::size_t> index_;
};

} // namespace blocknav::nc
