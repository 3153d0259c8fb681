#pragma once

#include <vector>

#include "attnlab/tensor.hpp"

namespace attnlab {

enum class OptKind { SGD, Adam };

struct OptimConfig {
  OptKind kind = OptKind::Adam;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled, AdamW style
};

template <typename T>
struct OptimState {
  long long step = 0;
  std::vector<std::vector<T>> m;  // first moments, one slot per parameter tensor
  std::vector<std::vector<T>> v;  // second moments
};

/// One deterministic update over a fixed list of parameter tensors. Adam uses
/// bias-corrected moments with decoupled weight decay; SGD folds the decay
/// into the gradient.
template <typename T>
void optimizer_step(std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads,
                    OptimState<T>& state, const OptimConfig& cfg) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer_step: params/grads count mismatch");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t k = 0; k < params.size(); ++k) {
      state.m[k].assign(params[k]->numel(), T(0));
      state.v[k].assign(params[k]->numel(), T(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: state does not match param list");
  }
  ++state.step;
  const T lr = static_cast<T>(cfg.lr);
  const T wd = static_cast<T>(cfg.weight_decay);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T eps = static_cast<T>(cfg.eps);
  const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.step)));

  for (size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = *params[k];
    const Tensor<T>& g = *grads[k];
    if (!p.same_shape(g) || state.m[k].size() != p.numel()) {
      throw std::invalid_argument("optimizer_step: shape mismatch at tensor " + std::to_string(k));
    }
    if (cfg.kind == OptKind::SGD) {
      for (size_t i = 0; i < p.data.size(); ++i) {
        p.data[i] -= lr * (g.data[i] + wd * p.data[i]);
      }
      continue;
    }
    for (size_t i = 0; i < p.data.size(); ++i) {
      T& m = state.m[k][i];
      T& v = state.v[k][i];
      m = b1 * m + (T(1) - b1) * g.data[i];
      v = b2 * v + (T(1) - b2) * g.data[i] * g.data[i];
      const T mhat = m / bc1;
      const T vhat = v / bc2;
      p.data[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * p.data[i]);
    }
  }
}

}  // namespace attnlab
