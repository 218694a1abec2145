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

#include "lkd/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "lkd/error.hpp"

namespace lkd {

template <typename T>
Tensor<T> sk_combine(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& logits, Tensor<T>* weights) {
  require_same_shape(a.shape(), b.shape(), "sk_fusion branches");
  const Shape& s = a.shape();
  require_same_shape(logits.shape(), Shape{s.n, 2 * s.c, 1, 1}, "sk_fusion logits");
  Tensor<T> w(logits.shape());
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      const T la = logits[n * 2 * s.c + c];
      const T lb = logits[n * 2 * s.c + s.c + c];
      const T m = std::max(la, lb);
      const T ea = std::exp(la - m);
      const T eb = std::exp(lb - m);
      w[n * 2 * s.c + c] = ea / (ea + eb);
      w[n * 2 * s.c + s.c + c] = eb / (ea + eb);
    }
  Tensor<T> out(s);
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      const T wa = w[n * 2 * s.c + c];
      const T wb = w[n * 2 * s.c + s.c + c];
      const T* pa = a.plane(n, c);
      const T* pb = b.plane(n, c);
      T* po = out.plane(n, c);
      for (Index i = 0; i < s.plane(); ++i) po[i] = wa * pa[i] + wb * pb[i];
    }
  if (weights) *weights = std::move(w);
  return out;
}

template <typename T>
SkCombineGrads<T> sk_combine_backward(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& weights,
                                      const Tensor<T>& grad_out) {
  const Shape& s = a.shape();
  require_same_shape(grad_out.shape(), s, "sk_fusion backward");
  SkCombineGrads<T> g{Tensor<T>(s), Tensor<T>(s), Tensor<T>(weights.shape())};
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      const T wa = weights[n * 2 * s.c + c];
      const T wb = weights[n * 2 * s.c + s.c + c];
      const T* pa = a.plane(n, c);
      const T* pb = b.plane(n, c);
      const T* go = grad_out.plane(n, c);
      T* ga = g.grad_a.plane(n, c);
      T* gb = g.grad_b.plane(n, c);
      T dwa = 0;
      T dwb = 0;
      for (Index i = 0; i < s.plane(); ++i) {
        ga[i] = wa * go[i];
        gb[i] = wb * go[i];
        dwa += go[i] * pa[i];
        dwb += go[i] * pb[i];
      }
      const T dot = wa * dwa + wb * dwb;
      g.grad_logits[n * 2 * s.c + c] = wa * (dwa - dot);
      g.grad_logits[n * 2 * s.c + s.c + c] = wb * (dwb - dot);
    }
  return g;
}

// --- SkFusion -------------------------------------------------------------------

template <typename T>
SkFusion<T>::SkFusion(const std::string& name, Index channels, Index reduction, Rng& rng) {
  const Index hidden = std::max<Index>(channels / std::max<Index>(1, reduction), 4);
  proj_ = Conv2d<T>(name + ".proj", ConvSpec::pointwise(channels, channels), rng);
  fc1_ = Linear<T>(name + ".fc1", channels, hidden, false, rng);
  fc2_ = Linear<T>(name + ".fc2", hidden, 2 * channels, false, rng);
}

template <typename T>
Tensor<T> SkFusion<T>::forward(const Tensor<T>& a, const Tensor<T>& skip) {
  require_same_shape(a.shape(), skip.shape(), "sk_fusion");
  a_ = a;
  b_ = proj_.forward(skip);
  pre_relu_ = fc1_.forward(global_avg_pool(add(a_, b_)));
  const Tensor<T> logits = fc2_.forward(activation_forward(Activation::relu, pre_relu_));
  return sk_combine(a_, b_, logits, &weights_);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SkFusion<T>::backward(const Tensor<T>& grad_out) {
  SkCombineGrads<T> g = sk_combine_backward(a_, b_, weights_, grad_out);
  const Tensor<T> g_pool =
      fc1_.backward(activation_backward(Activation::relu, pre_relu_, fc2_.backward(g.grad_logits)));
  const Shape& s = a_.shape();
  const T inv = T{1} / static_cast<T>(s.plane());
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      const T v = g_pool[n * s.c + c] * inv;
      T* ga = g.grad_a.plane(n, c);
      T* gb = g.grad_b.plane(n, c);
      for (Index i = 0; i < s.plane(); ++i) {
        ga[i] += v;
        gb[i] += v;
      }
    }
  return {std::move(g.grad_a), proj_.backward(g.grad_b)};
}

template <typename T>
void SkFusion<T>::collect(ParamSet<T>& set) {
  proj_.collect(set);
  fc1_.collect(set);
  fc2_.collect(set);
}

template <typename T>
void SkFusion<T>::costs(std::vector<LayerCost>& rows, Index h, Index w) const {
  proj_.costs(rows, h, w);
  fc1_.costs(rows);
  fc2_.costs(rows);
}

// --- ConcatFusion -------------------------------------------------------------

template <typename T>
ConcatFusion<T>::ConcatFusion(const std::string& name, Index channels, Rng& rng)
    : channels_(channels), conv_(name + ".conv", ConvSpec::pointwise(2 * channels, channels), rng) {}

template <typename T>
Tensor<T> ConcatFusion<T>::forward(const Tensor<T>& a, const Tensor<T>& skip) {
  require_same_shape(a.shape(), skip.shape(), "concat fusion");
  return conv_.forward(concat_channels(a, skip));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> ConcatFusion<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T> g = conv_.backward(grad_out);
  return {slice_channels(g, 0, channels_), slice_channels(g, channels_, channels_)};
}

// --- Upsample -------------------------------------------------------------------

template <typename T>
Upsample<T>::Upsample(const std::string& name, Index in, Index out, Rng& rng)
    : conv_(name + ".conv", ConvSpec::pointwise(in, 4 * out), rng) {}

template <typename T>
Tensor<T> Upsample<T>::forward(const Tensor<T>& x) {
  return pixel_shuffle(conv_.forward(x), 2);
}

template <typename T>
Tensor<T> Upsample<T>::backward(const Tensor<T>& grad_out) {
  return conv_.backward(pixel_unshuffle(grad_out, 2));
}

// --- Soft reconstruction ------------------------------------------------------

template <typename T>
Tensor<T> soft_reconstruction(const Tensor<T>& head, const Tensor<T>& image) {
  const Shape& hs = head.shape();
  const Shape& is = image.shape();
  if (hs.c != 4) throw ValidationError("soft_reconstruction: head must have 4 channels, got " + hs.str());
  if (is.c != 3 || hs.n != is.n || hs.h != is.h || hs.w != is.w) {
    throw ValidationError("soft_reconstruction: head " + hs.str() + " incompatible with image " + is.str());
  }
  Tensor<T> out(is);
  for (Index n = 0; n < is.n; ++n) {
    const T* k = head.plane(n, 0);
    for (Index c = 0; c < 3; ++c) {
      const T* b = head.plane(n, 1 + c);
      const T* x = image.plane(n, c);
      T* o = out.plane(n, c);
      for (Index i = 0; i < is.plane(); ++i) o[i] = k[i] * x[i] + b[i];
    }
  }
  return out;
}

template <typename T>
ReconstructionGrads<T> soft_reconstruction_backward(const Tensor<T>& head, const Tensor<T>& image,
                                                    const Tensor<T>& grad_out) {
  const Shape& is = image.shape();
  require_same_shape(grad_out.shape(), is, "soft_reconstruction backward");
  ReconstructionGrads<T> g{Tensor<T>(head.shape()), Tensor<T>(is)};
  for (Index n = 0; n < is.n; ++n) {
    const T* k = head.plane(n, 0);
    T* gk = g.grad_head.plane(n, 0);
    for (Index c = 0; c < 3; ++c) {
      const T* x = image.plane(n, c);
      const T* go = grad_out.plane(n, c);
      T* gb = g.grad_head.plane(n, 1 + c);
      T* gx = g.grad_image.plane(n, c);
      for (Index i = 0; i < is.plane(); ++i) {
        gk[i] += go[i] * x[i];
        gb[i] = go[i];
        gx[i] = go[i] * k[i];
      }
    }
  }
  return g;
}

#define LKD_INSTANTIATE(T)                                                                                  \
  template Tensor<T> sk_combine(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*);          \
  template SkCombineGrads<T> sk_combine_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                                 const Tensor<T>&);                                         \
  template class SkFusion<T>;                                                                               \
  template class ConcatFusion<T>;                                                                           \
  template class Upsample<T>;                                                                               \
  template Tensor<T> soft_reconstruction(const Tensor<T>&, const Tensor<T>&);                               \
  template ReconstructionGrads<T> soft_reconstruction_backward(const Tensor<T>&, const Tensor<T>&,          \
                                                               const Tensor<T>&);

LKD_INSTANTIATE(float)
LKD_INSTANTIATE(double)

}  // namespace lkd
