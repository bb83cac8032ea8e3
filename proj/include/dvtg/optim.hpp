#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dvtg/tensor.hpp"

namespace dvtg {

// Named parameter collection. Iteration order is the sorted name order, which
// keeps optimizer updates and checkpoints deterministic.
class ModelParams {
 public:
  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Tensor> params_;
};

struct AdamState {
  std::uint64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Zero-initialized moment buffers, created on first update per parameter.
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

// One Adam update with bias correction over every parameter in params.
// Throws NumericError naming the parameter if a gradient is missing.
void adam_step(ModelParams& params, AdamState& state);

}  // namespace dvtg
