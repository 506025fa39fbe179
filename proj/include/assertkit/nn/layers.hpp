// include/assertkit/nn/layers.hpp

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

#ifndef ASSERTKIT_NN_LAYERS_HPP_
#define ASSERTKIT_NN_LAYERS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "assertkit/nn/ops.hpp"

namespace assertkit::nn {

// Named views used for optimizer traversal and checkpointing.
template <typename T>
using NamedParams = std::vector<std::pair<std::string, Tensor<T>>>;
template <typename T>
using NamedBuffers = std::vector<std::pair<std::string, std::vector<T>*>>;

template <typename T>
Tensor<T> he_normal(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<T> v(shape_numel(shape));
  for (T& x : v) x = static_cast<T>(stddev * rng.normal());
  return Tensor<T>::from_values(std::move(shape), std::move(v), /*requires_grad=*/true);
}

template <typename T>
struct Conv2d {
  Tensor<T> weight;  // O x C x k x k
  Tensor<T> bias;    // undefined when followed by batchnorm
  ConvGeom geom;

  static Conv2d make(std::size_t cin, std::size_t cout, std::size_t k, ConvGeom geom,
                     bool with_bias, Rng& rng) {
    Conv2d layer;
    layer.weight = he_normal<T>({cout, cin, k, k}, cin * k * k, rng);
    if (with_bias) layer.bias = Tensor<T>::zeros({cout}, true);
    layer.geom = geom;
    return layer;
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, geom); }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
  }
};

template <typename T>
struct BatchNorm2d {
  Tensor<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNorm2d make(std::size_t channels) {
    BatchNorm2d layer;
    layer.gamma = Tensor<T>::full({channels}, T(1), true);
    layer.beta = Tensor<T>::zeros({channels}, true);
    layer.running_mean.assign(channels, T(0));
    layer.running_var.assign(channels, T(1));
    return layer;
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    return batchnorm2d(x, gamma, beta, running_mean, running_var, momentum, eps, training);
  }

  void collect(const std::string& prefix, NamedParams<T>& params, NamedBuffers<T>& buffers) {
    params.emplace_back(prefix + ".gamma", gamma);
    params.emplace_back(prefix + ".beta", beta);
    buffers.emplace_back(prefix + ".running_mean", &running_mean);
    buffers.emplace_back(prefix + ".running_var", &running_var);
  }
};

template <typename T>
struct Linear {
  Tensor<T> weight;  // O x F
  Tensor<T> bias;    // O

  static Linear make(std::size_t fin, std::size_t fout, Rng& rng) {
    Linear layer;
    layer.weight = he_normal<T>({fout, fin}, fin, rng);
    layer.bias = Tensor<T>::zeros({fout}, true);
    return layer;
  }

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }

  void collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
  }
};

}  // namespace assertkit::nn

#endif  // ASSERTKIT_NN_LAYERS_HPP_
