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
#include <utility>
#include <vector>

#include "lkd/layers.hpp"

namespace lkd {

/// out = w_a ⊙ a + w_b ⊙ b where, per sample and channel, (w_a, w_b) is the
/// softmax of (logits[c], logits[C + c]). logits: [N, 2C, 1, 1]. The weights
/// are written to *weights (same layout as logits) when given.
template <typename T>
Tensor<T> sk_combine(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& logits, Tensor<T>* weights = nullptr);

template <typename T>
struct SkCombineGrads {
  Tensor<T> grad_a;
  Tensor<T> grad_b;
  Tensor<T> grad_logits;
};

template <typename T>
SkCombineGrads<T> sk_combine_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& weights,
                                      const Tensor<T>& grad_out);

/// Selective-kernel skip fusion: the skip branch passes through a 1x1
/// projection, then both branches are softmax-weighted per channel by an MLP
/// (C -> max(C / reduction, 4) -> 2C, no biases) on GAP(a + proj(b)).
template <typename T>
class SkFusion {
 public:
  SkFusion() = default;
  SkFusion(const std::string& name, Index channels, Index reduction, Rng& rng);

  /// a: decoder (upsampled) features, skip: encoder features of the same shape.
  Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& skip);
  /// Returns (grad_a, grad_skip).
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const;

  Conv2d<T>& projection() { return proj_; }
  Linear<T>& fc1() { return fc1_; }
  Linear<T>& fc2() { return fc2_; }
  const Tensor<T>& last_weights() const { return weights_; }

 private:
  Conv2d<T> proj_;
  Linear<T> fc1_;
  Linear<T> fc2_;
  Tensor<T> a_;
  Tensor<T> b_;
  Tensor<T> pre_relu_;
  Tensor<T> weights_;
};

/// Baseline skip fusion: concat(a, skip) -> 1x1 conv 2C -> C.
template <typename T>
class ConcatFusion {
 public:
  ConcatFusion() = default;
  ConcatFusion(const std::string& name, Index channels, Rng& rng);

  Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& skip);
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set) { conv_.collect(set); }
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const { conv_.costs(rows, h, w); }

 private:
  Index channels_ = 0;
  Conv2d<T> conv_;
};

/// 1x1 conv to 4 * out channels followed by pixel_shuffle(2).
template <typename T>
class Upsample {
 public:
  Upsample() = default;
  Upsample(const std::string& name, Index in, Index out, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& grad_out);

  void collect(ParamSet<T>& set) { conv_.collect(set); }
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const { conv_.costs(rows, h, w); }

 private:
  Conv2d<T> conv_;
};

/// Ĵ = K ⊙ I + B with head = [K | B]: channel 0 is a gain shared by the three
/// colour channels, channels 1..3 are a per-colour bias.
template <typename T>
Tensor<T> soft_reconstruction(const Tensor<T>& head, const Tensor<T>& image);

template <typename T>
struct ReconstructionGrads {
  Tensor<T> grad_head;
  Tensor<T> grad_image;
};

template <typename T>
ReconstructionGrads<T> soft_reconstruction_backward(const Tensor<T>& head, const Tensor<T>& image,
                                                    const Tensor<T>& grad_out);

}  // namespace lkd
