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

#include "lkd/layers.hpp"

namespace lkd {

/// Emulates a K x K depth-wise convolution with a (2d-1) x (2d-1) depth-wise
/// leg followed by a ceil(K/d) x ceil(K/d) depth-wise leg dilated by d.
struct Decomposition {
  Index kernel = 21;
  Index dilation = 3;

  Index k_small() const { return 2 * dilation - 1; }
  Index k_dilated() const { return (kernel + dilation - 1) / dilation; }
  /// Side length of the composed receptive field.
  Index composed_extent() const { return k_small() + dilation * (k_dilated() - 1); }
  void validate() const;

  bool operator==(const Decomposition&) const = default;
};

enum class DlkcbGating {
  residual,  // y = x + s ⊙ branch
  multiply,  // y = x + s ⊙ (u ⊙ branch), u the pointwise-projected input
};

enum class CefnForm {
  standard,  // y = x + α ⊙ BN_out(FN(BN_in(x)) ⊙ CA(BN_in(x)))
  literal,   // y = x + BN_out(BN_in(FN(x) ⊙ (CA(x) ⊙ α)))
};

struct BlockOptions {
  Decomposition decomposition{};
  bool use_dlk = true;      // false: one plain depth-wise conv of plain_kernel
  Index plain_kernel = 7;
  DlkcbGating gating = DlkcbGating::residual;
  bool use_cefn = true;     // false: expand -> GELU -> reduce, no 3x3 dw, no attention
  CefnForm cefn_form = CefnForm::standard;
  Index mlp_ratio = 4;
  Index ca_reduction = 8;
  double scale_init = 1e-2;
};

/// Decomposed large-kernel convolution block:
/// BN -> PW_in -> DW_small -> DW_dilated -> PW_out -> per-channel scale -> + x.
template <typename T>
class Dlkcb {
 public:
  Dlkcb() = default;
  Dlkcb(const std::string& name, Index channels, const BlockOptions& opt, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const;

  BatchNorm2d<T>& norm() { return norm_; }
  Conv2d<T>& pw_in() { return pw_in_; }
  std::vector<Conv2d<T>>& legs() { return legs_; }
  Conv2d<T>& pw_out() { return pw_out_; }
  ChannelScale<T>& scale() { return scale_; }

 private:
  Index channels_ = 0;
  DlkcbGating gating_ = DlkcbGating::residual;
  BatchNorm2d<T> norm_;
  Conv2d<T> pw_in_;
  std::vector<Conv2d<T>> legs_;
  Conv2d<T> pw_out_;
  ChannelScale<T> scale_;
  Tensor<T> projected_;  // u
  Tensor<T> mixed_;      // PW_out output
};

/// Squeeze-style gate: sigmoid(Linear(ReLU(Linear(GAP(x))))), output [N, C, 1, 1].
template <typename T>
class ChannelAttention {
 public:
  ChannelAttention() = default;
  ChannelAttention(const std::string& name, Index channels, Index reduction, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x);
  /// grad_out: [N, C, 1, 1]; returns the gradient for the full-resolution input.
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows) const;

  Linear<T>& fc1() { return fc1_; }
  Linear<T>& fc2() { return fc2_; }
  Index hidden() const { return hidden_; }

 private:
  Index hidden_ = 1;
  Linear<T> fc1_;
  Linear<T> fc2_;
  Shape input_shape_{};
  Tensor<T> pre_relu_;
  Tensor<T> pre_sigmoid_;
};

/// Channel-enhanced feed-forward block.
template <typename T>
class Cefn {
 public:
  Cefn() = default;
  Cefn(const std::string& name, Index channels, const BlockOptions& opt, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const;

  BatchNorm2d<T>& norm_in() { return norm_in_; }
  BatchNorm2d<T>& norm_out() { return norm_out_; }
  Conv2d<T>& expand() { return expand_; }
  Conv2d<T>& dw3() { return dw3_; }
  Conv2d<T>& reduce() { return reduce_; }
  ChannelAttention<T>& attention() { return ca_; }
  ChannelScale<T>& scale() { return scale_; }

 private:
  Tensor<T> feed_forward(const Tensor<T>& z);
  Tensor<T> feed_forward_backward(const Tensor<T>& grad);
  Tensor<T> forward_standard(const Tensor<T>& x, Mode mode);
  Tensor<T> forward_literal(const Tensor<T>& x, Mode mode);
  Tensor<T> backward_standard(const Tensor<T>& grad_out);
  Tensor<T> backward_literal(const Tensor<T>& grad_out);

  bool use_attention_ = true;
  CefnForm form_ = CefnForm::standard;
  BatchNorm2d<T> norm_in_;
  Conv2d<T> expand_;
  Conv2d<T> dw3_;
  Conv2d<T> reduce_;
  ChannelAttention<T> ca_;
  BatchNorm2d<T> norm_out_;
  ChannelScale<T> scale_;
  Tensor<T> pre_gelu_;
  Tensor<T> ffn_out_;
  Tensor<T> gate_;  // CA output, or CA ⊙ α in the literal form
};

/// DLKCB followed by CEFN; shape-preserving.
template <typename T>
class LkdBlock {
 public:
  LkdBlock() = default;
  LkdBlock(const std::string& name, Index channels, const BlockOptions& opt, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const;

  Dlkcb<T>& dlkcb() { return dlkcb_; }
  Cefn<T>& cefn() { return cefn_; }

 private:
  Dlkcb<T> dlkcb_;
  Cefn<T> cefn_;
};

}  // namespace lkd
