#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsw/tensor.hpp"

namespace lsw {

template <typename T>
struct NamedParam {
  std::string name;
  TensorPtr<T> tensor;
};

// Moment estimates run at double precision no matter the parameter type, so
// updates are deterministic and the bias correction stays exact early on.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> m;  // one entry per parameter, matching its numel
  std::vector<std::vector<double>> v;
};

template <typename T>
void adam_step(std::span<const NamedParam<T>> params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].tensor->numel(), 0.0);
      state.v[i].assign(params[i].tensor->numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ValidationError("adam_step: state tracks " + std::to_string(state.m.size()) +
                          " parameters, got " + std::to_string(params.size()));
  }
  state.step_count += 1;
  const double t = (double)state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.tensor->numel() != state.m[i].size()) {
      throw ValidationError("adam_step: parameter '" + p.name + "' changed size");
    }
    auto vals = p.tensor->values();
    auto grads = p.tensor->grad();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double g = (double)grads[j];
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
      }
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      vals[j] = (T)((double)vals[j] - state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon));
    }
  }
}

template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedParam<T>> params, AdamState state = {})
      : params_(std::move(params)), state_(std::move(state)) {
    for (auto& p : params_) p.tensor->ensure_grad();
  }

  void step() { adam_step<T>(params_, state_); }

  void zero_grad() {
    for (auto& p : params_) p.tensor->zero_grad();
  }

  const AdamState& state() const { return state_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }

 private:
  std::vector<NamedParam<T>> params_;
  AdamState state_;
};

}  // namespace lsw
