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

#pragma once

#include <string>
#include <vector>

#include "lkd/ops.hpp"
#include "lkd/rng.hpp"
#include "lkd/tensor.hpp"

namespace lkd {

enum class Mode { train, eval };

/// Pointers into a model's trainable parameters and state buffers, in a
/// stable order.
template <typename T>
struct ParamSet {
  std::vector<Parameter<T>*> params;
  std::vector<Buffer<T>> buffers;
};

/// One row of a cost report: parameters owned by a layer and the
/// multiply-accumulates it performs for a single sample.
struct LayerCost {
  std::string name;
  std::string kind;
  Index params = 0;
  Index macs = 0;
};

/// Uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)].
template <typename T>
Tensor<T> fan_in_uniform(Shape shape, Index fan_in, Rng& rng);

// Layers cache what their backward needs during forward; backward then
// accumulates parameter gradients and returns the gradient for the input.

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, ConvSpec spec, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const;

  const ConvSpec& spec() const { return spec_; }
  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  ConvSpec spec_{};
  Parameter<T> weight_;
  Parameter<T> bias_;
  Tensor<T> input_;
};

/// Per-channel batch normalisation; also the holder of its running statistics.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, Index channels, double momentum = kBatchNormMomentum, double eps = kBatchNormEps);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows) const;

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }

 private:
  std::string name_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  double momentum_ = kBatchNormMomentum;
  double eps_ = kBatchNormEps;
  Mode last_mode_ = Mode::train;
  Tensor<T> input_;
  BatchNormCache<T> cache_;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, Index in, Index out, bool bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows) const;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
  bool has_bias_ = true;
  Tensor<T> input_;
};

/// Learnable per-channel scale s applied as s ⊙ x with s of shape [1, C, 1, 1].
template <typename T>
class ChannelScale {
 public:
  ChannelScale() = default;
  ChannelScale(std::string name, Index channels, T init);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set) { set.params.push_back(&scale_); }
  void costs(std::vector<LayerCost>& rows) const;

  Parameter<T>& scale() { return scale_; }

 private:
  Parameter<T> scale_;
  Tensor<T> input_;
};

}  // namespace lkd
