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

#include "lkd/tensor.hpp"

namespace lkd {

struct Pair {
  Index h = 1;
  Index w = 1;
  constexpr bool operator==(const Pair&) const = default;
};

/// Full description of one 2-D convolution (cross-correlation, no kernel
/// flip). Padding is either explicit or "same" (floor(extent / 2) per side,
/// odd extents only), always zero-filled.
struct ConvSpec {
  Index in_ch = 1;
  Index out_ch = 1;
  Pair kernel{1, 1};
  Pair stride{1, 1};
  Pair dilation{1, 1};
  Index groups = 1;
  Pair padding{0, 0};
  bool same = false;
  bool has_bias = true;

  /// dilation * (kernel - 1) + 1 per axis.
  Pair extent() const { return {dilation.h * (kernel.h - 1) + 1, dilation.w * (kernel.w - 1) + 1}; }
  Pair resolved_padding() const;
  void validate() const;

  Shape weight_shape() const { return {out_ch, in_ch / groups, kernel.h, kernel.w}; }
  Shape bias_shape() const { return {out_ch, 1, 1, 1}; }
  Shape output_shape(const Shape& input) const;

  Index weight_count() const { return weight_shape().numel(); }
  Index param_count() const { return weight_count() + (has_bias ? out_ch : 0); }
  /// Multiply-accumulates for one sample at the given input resolution.
  Index macs(Index h, Index w) const;

  static ConvSpec depthwise(Index channels, Index k, Index dilation = 1, bool bias = true);
  static ConvSpec pointwise(Index in, Index out, bool bias = true);
  static ConvSpec dense(Index in, Index out, Index k, bool bias = true);
};

std::string describe(const ConvSpec& spec);

// --- convolution ----------------------------------------------------------

/// Vectorisation-friendly direct convolution. Accumulates each output element
/// in the same order as conv2d_reference (bias, then input channel, kernel
/// row, kernel column), so both paths agree bitwise.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight,
                         const Tensor<T>* bias = nullptr);

/// Naive per-output-element loop; the correctness reference.
template <typename T>
Tensor<T> conv2d_reference(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight,
                           const Tensor<T>* bias = nullptr);

template <typename T>
struct ConvGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  Tensor<T> grad_b;  // empty when the conv has no bias
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight,
                             const Tensor<T>& grad_out);

// --- batch normalisation -------------------------------------------------

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
  Tensor<T> x_hat;
  std::vector<T> inv_std;
};

/// Normalises with batch statistics and updates running stats in place:
/// running = (1 - momentum) * running + momentum * batch (unbiased variance).
template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          Tensor<T>& running_mean, Tensor<T>& running_var, double momentum, double eps,
                          BatchNormCache<T>* cache);

template <typename T>
Tensor<T> batchnorm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                         const Tensor<T>& running_mean, const Tensor<T>& running_var, double eps);

template <typename T>
struct BatchNormGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_gamma;
  Tensor<T> grad_beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_train_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                           const BatchNormCache<T>& cache);

/// Backward of the eval-mode affine map, needed when probing a frozen model.
template <typename T>
BatchNormGrads<T> batchnorm_eval_backward(const Tensor<T>& x, const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                          const Tensor<T>& running_mean, const Tensor<T>& running_var, double eps);

// --- activations ----------------------------------------------------------

enum class Activation { relu, gelu, sigmoid };

/// GELU uses the tanh form 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
inline constexpr double kGeluCubic = 0.044715;

template <typename T>
Tensor<T> activation_forward(Activation kind, const Tensor<T>& x);

template <typename T>
Tensor<T> activation_backward(Activation kind, const Tensor<T>& x, const Tensor<T>& grad_out);

// --- linear ---------------------------------------------------------------

/// x: [N, Cin, 1, 1], weight: [Cout, Cin, 1, 1], bias: [Cout, 1, 1, 1].
template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias = nullptr);

template <typename T>
struct LinearGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  Tensor<T> grad_b;
};

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               bool has_bias);

// --- pixel shuffle --------------------------------------------------------

/// [N, C*r*r, H, W] -> [N, C, H*r, W*r];
/// out[n, c, h*r + i, w*r + j] = in[n, c*r*r + i*r + j, h, w].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, Index r);

/// Exact inverse of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, Index r);

}  // namespace lkd
