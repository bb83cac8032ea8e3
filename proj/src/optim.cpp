#include "dvtg/optim.hpp"

#include <cmath>

#include "dvtg/errors.hpp"

namespace dvtg {

void ModelParams::add(const std::string& name, Tensor t) {
  if (params_.count(name)) {
    throw DataError("duplicate parameter name '" + name + "'");
  }
  params_.emplace(name, std::move(t));
}

bool ModelParams::has(const std::string& name) const {
  return params_.count(name) != 0;
}

Tensor& ModelParams::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw DataError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ModelParams::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw DataError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(name);
  return out;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void adam_step(ModelParams& params, AdamState& state) {
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) {
      throw NumericError("adam_step: missing gradient for parameter '" + name + "'");
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (auto& [name, t] : params) {
    const std::vector<double>& g = t.grad();
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != g.size()) m.assign(g.size(), 0.0);
    if (v.size() != g.size()) v.assign(g.size(), 0.0);

    std::vector<double>& w = t.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace dvtg
