// Copyright 2026 The LKD Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lkd/layers.hpp"

#include <cmath>

#include "lkd/error.hpp"

namespace lkd {

template <typename T>
Tensor<T> fan_in_uniform(Shape shape, Index fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor<T> t(shape);
  for (Index i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

// --- Conv2d --------------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::string name, ConvSpec spec, Rng& rng) : spec_(spec) {
  spec_.validate();
  const Index fan_in = spec.in_ch / spec.groups * spec.kernel.h * spec.kernel.w;
  weight_ = Parameter<T>(name + ".weight", fan_in_uniform<T>(spec.weight_shape(), fan_in, rng));
  if (spec.has_bias) bias_ = Parameter<T>(name + ".bias", fan_in_uniform<T>(spec.bias_shape(), fan_in, rng));
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return conv2d_forward(x, spec_, weight_.value, spec_.has_bias ? &bias_.value : nullptr);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  if (input_.empty()) throw ValidationError(weight_.name + ": backward before forward");
  ConvGrads<T> g = conv2d_backward(input_, spec_, weight_.value, grad_out);
  accumulate_grad(weight_, g.grad_w);
  if (spec_.has_bias) accumulate_grad(bias_, g.grad_b);
  return std::move(g.grad_x);
}

template <typename T>
void Conv2d<T>::collect(ParamSet<T>& set) {
  set.params.push_back(&weight_);
  if (spec_.has_bias) set.params.push_back(&bias_);
}

template <typename T>
void Conv2d<T>::costs(std::vector<LayerCost>& rows, Index h, Index w) const {
  std::string name = weight_.name.substr(0, weight_.name.size() - std::string(".weight").size());
  rows.push_back({std::move(name), describe(spec_), spec_.param_count(), spec_.macs(h, w)});
}

// --- BatchNorm2d ---------------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, Index channels, double momentum, double eps)
    : name_(std::move(name)),
      gamma_(name_ + ".gamma", Tensor<T>(Shape{1, channels, 1, 1}, T{1})),
      beta_(name_ + ".beta", Tensor<T>(Shape{1, channels, 1, 1})),
      running_mean_(Shape{1, channels, 1, 1}),
      running_var_(Shape{1, channels, 1, 1}, T{1}),
      momentum_(momentum),
      eps_(eps) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode) {
  last_mode_ = mode;
  if (mode == Mode::train) {
    input_ = Tensor<T>();
    return batchnorm_train(x, gamma_.value, beta_.value, running_mean_, running_var_, momentum_, eps_, &cache_);
  }
  input_ = x;
  return batchnorm_eval(x, gamma_.value, beta_.value, running_mean_, running_var_, eps_);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
  BatchNormGrads<T> g = last_mode_ == Mode::train
                            ? batchnorm_train_backward(grad_out, gamma_.value, cache_)
                            : batchnorm_eval_backward(input_, grad_out, gamma_.value, running_mean_, running_var_, eps_);
  accumulate_grad(gamma_, g.grad_gamma);
  accumulate_grad(beta_, g.grad_beta);
  return std::move(g.grad_x);
}

template <typename T>
void BatchNorm2d<T>::collect(ParamSet<T>& set) {
  set.params.push_back(&gamma_);
  set.params.push_back(&beta_);
  set.buffers.push_back({name_ + ".running_mean", &running_mean_});
  set.buffers.push_back({name_ + ".running_var", &running_var_});
}

template <typename T>
void BatchNorm2d<T>::costs(std::vector<LayerCost>& rows) const {
  rows.push_back({name_, "batchnorm", gamma_.value.numel() + beta_.value.numel(), 0});
}

// --- Linear ------------------------------------------------------------------

template <typename T>
Linear<T>::Linear(std::string name, Index in, Index out, bool bias, Rng& rng) : has_bias_(bias) {
  weight_ = Parameter<T>(name + ".weight", fan_in_uniform<T>(Shape{out, in, 1, 1}, in, rng));
  if (bias) bias_ = Parameter<T>(name + ".bias", fan_in_uniform<T>(Shape{out, 1, 1, 1}, in, rng));
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return linear_forward(x, weight_.value, has_bias_ ? &bias_.value : nullptr);
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
  if (input_.empty()) throw ValidationError(weight_.name + ": backward before forward");
  LinearGrads<T> g = linear_backward(input_, weight_.value, grad_out, has_bias_);
  accumulate_grad(weight_, g.grad_w);
  if (has_bias_) accumulate_grad(bias_, g.grad_b);
  return std::move(g.grad_x);
}

template <typename T>
void Linear<T>::collect(ParamSet<T>& set) {
  set.params.push_back(&weight_);
  if (has_bias_) set.params.push_back(&bias_);
}

template <typename T>
void Linear<T>::costs(std::vector<LayerCost>& rows) const {
  std::string name = weight_.name.substr(0, weight_.name.size() - std::string(".weight").size());
  const Shape& s = weight_.value.shape();
  rows.push_back({std::move(name), "linear " + std::to_string(s.c) + "->" + std::to_string(s.n),
                  weight_.value.numel() + (has_bias_ ? bias_.value.numel() : 0), s.n * s.c});
}

// --- ChannelScale ---------------------------------------------------------------

template <typename T>
ChannelScale<T>::ChannelScale(std::string name, Index channels, T init)
    : scale_(std::move(name), Tensor<T>(Shape{1, channels, 1, 1}, init)) {}

template <typename T>
Tensor<T> ChannelScale<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return mul(x, scale_.value);
}

template <typename T>
Tensor<T> ChannelScale<T>::backward(const Tensor<T>& grad_out) {
  accumulate_grad(scale_, reduce(ReduceKind::sum, mul(grad_out, input_), ReduceAxes::batch_spatial));
  return mul(grad_out, scale_.value);
}

template <typename T>
void ChannelScale<T>::costs(std::vector<LayerCost>& rows) const {
  rows.push_back({scale_.name, "scale", scale_.value.numel(), 0});
}

template Tensor<float> fan_in_uniform(Shape, Index, Rng&);
template Tensor<double> fan_in_uniform(Shape, Index, Rng&);
template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Linear<float>;
template class Linear<double>;
template class ChannelScale<float>;
template class ChannelScale<double>;

}  // namespace lkd
