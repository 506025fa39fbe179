// include/assertkit/nn/optim.hpp

// Copyright 2025  assertkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ASSERTKIT_NN_OPTIM_HPP_
#define ASSERTKIT_NN_OPTIM_HPP_

#include <cmath>
#include <vector>

#include "assertkit/nn/tensor.hpp"

namespace assertkit::nn {

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 1e-9;
  double adam_eps = 1e-8;
  std::size_t warmup_steps = 1000;
  double peak_lr = 1e-3;
};

// Linear warm-up to peak_lr over warmup_steps, then inverse-square-root decay:
// lr(step) = peak_lr * min(step/warmup, sqrt(warmup/step)).
inline double noam_lr(std::size_t step, const OptimizerConfig& cfg) {
  check(step >= 1, "noam_lr: step must be >= 1");
  check(cfg.warmup_steps >= 1, "noam_lr: warmup_steps must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup_steps);
  return cfg.peak_lr * std::min(s / w, std::sqrt(w / s));
}

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;  // first/second moments per parameter
  std::size_t step = 0;

  template <typename Params>
  void init(const Params& params) {
    m.clear();
    v.clear();
    for (const auto& [name, p] : params) {
      m.emplace_back(p.numel(), T(0));
      v.emplace_back(p.numel(), T(0));
    }
    step = 0;
  }
};

// Classic Adam with bias correction; weight decay enters as an L2 term added
// to the gradient before the moment updates.
template <typename T, typename Params>
void adam_step(Params& params, AdamState<T>& state, const OptimizerConfig& cfg, double lr) {
  check(state.m.size() == params.size() && state.v.size() == params.size(),
        "adam_step: state/parameter count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = params[pi].second;
    const std::vector<T>& grad = p.grad();
    std::vector<T>& m = state.m[pi];
    std::vector<T>& v = state.v[pi];
    check(m.size() == p.numel() && v.size() == p.numel(),
          "adam_step: state shape mismatch for ", params[pi].first);
    T* theta = p.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = static_cast<double>(grad[i]) +
                       cfg.weight_decay * static_cast<double>(theta[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) -
                                lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
}

}  // namespace assertkit::nn

#endif  // ASSERTKIT_NN_OPTIM_HPP_
