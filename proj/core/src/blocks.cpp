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

#include "lkd/blocks.hpp"

#include <algorithm>

#include "lkd/error.hpp"

namespace lkd {

void Decomposition::validate() const {
  if (kernel <= 0 || kernel % 2 == 0) {
    throw ValidationError("decomposition: kernel must be a positive odd integer, got " + std::to_string(kernel));
  }
  if (dilation < 1) throw ValidationError("decomposition: dilation must be >= 1");
  if ((dilation * (k_dilated() - 1) + 1) % 2 == 0) {
    throw ValidationError("decomposition: dilated leg " + std::to_string(k_dilated()) + " with dilation " +
                          std::to_string(dilation) + " has an even extent; \"same\" padding is impossible");
  }
}

// --- Dlkcb -------------------------------------------------------------------

template <typename T>
Dlkcb<T>::Dlkcb(const std::string& name, Index channels, const BlockOptions& opt, Rng& rng)
    : channels_(channels), gating_(opt.gating) {
  norm_ = BatchNorm2d<T>(name + ".norm", channels);
  pw_in_ = Conv2d<T>(name + ".pw_in", ConvSpec::pointwise(channels, channels), rng);
  if (opt.use_dlk) {
    opt.decomposition.validate();
    const Decomposition& d = opt.decomposition;
    legs_.emplace_back(name + ".dw_small", ConvSpec::depthwise(channels, d.k_small()), rng);
    legs_.emplace_back(name + ".dw_dilated", ConvSpec::depthwise(channels, d.k_dilated(), d.dilation), rng);
  } else {
    if (opt.plain_kernel <= 0 || opt.plain_kernel % 2 == 0) {
      throw ValidationError("plain depth-wise kernel must be odd, got " + std::to_string(opt.plain_kernel));
    }
    legs_.emplace_back(name + ".dw_plain", ConvSpec::depthwise(channels, opt.plain_kernel), rng);
  }
  pw_out_ = Conv2d<T>(name + ".pw_out", ConvSpec::pointwise(channels, channels), rng);
  scale_ = ChannelScale<T>(name + ".scale", channels, static_cast<T>(opt.scale_init));
}

template <typename T>
Tensor<T> Dlkcb<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.shape().c != channels_) {
    throw ValidationError("dlkcb: input has " + std::to_string(x.shape().c) + " channels, block expects " +
                          std::to_string(channels_));
  }
  projected_ = pw_in_.forward(norm_.forward(x, mode));
  Tensor<T> a = projected_;
  for (auto& leg : legs_) a = leg.forward(a);
  mixed_ = pw_out_.forward(a);
  const Tensor<T>& branch = gating_ == DlkcbGating::multiply ? mul(projected_, mixed_) : mixed_;
  return add(x, scale_.forward(branch));
}

template <typename T>
Tensor<T> Dlkcb<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g_branch = scale_.backward(grad_out);
  Tensor<T> g_mixed = gating_ == DlkcbGating::multiply ? mul(g_branch, projected_) : g_branch;
  Tensor<T> g = pw_out_.backward(g_mixed);
  for (auto it = legs_.rbegin(); it != legs_.rend(); ++it) g = it->backward(g);
  if (gating_ == DlkcbGating::multiply) add_inplace(g, mul(g_branch, mixed_));
  Tensor<T> gx = norm_.backward(pw_in_.backward(g));
  add_inplace(gx, grad_out);
  return gx;
}

template <typename T>
void Dlkcb<T>::collect(ParamSet<T>& set) {
  norm_.collect(set);
  pw_in_.collect(set);
  for (auto& leg : legs_) leg.collect(set);
  pw_out_.collect(set);
  scale_.collect(set);
}

template <typename T>
void Dlkcb<T>::costs(std::vector<LayerCost>& rows, Index h, Index w) const {
  norm_.costs(rows);
  pw_in_.costs(rows, h, w);
  for (const auto& leg : legs_) leg.costs(rows, h, w);
  pw_out_.costs(rows, h, w);
  scale_.costs(rows);
}

// --- ChannelAttention ---------------------------------------------------------------

template <typename T>
ChannelAttention<T>::ChannelAttention(const std::string& name, Index channels, Index reduction, Rng& rng)
    : hidden_(std::max<Index>(1, channels / std::max<Index>(1, reduction))) {
  fc1_ = Linear<T>(name + ".fc1", channels, hidden_, true, rng);
  fc2_ = Linear<T>(name + ".fc2", hidden_, channels, true, rng);
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x) {
  input_shape_ = x.shape();
  pre_relu_ = fc1_.forward(global_avg_pool(x));
  pre_sigmoid_ = fc2_.forward(activation_forward(Activation::relu, pre_relu_));
  return activation_forward(Activation::sigmoid, pre_sigmoid_);
}

template <typename T>
Tensor<T> ChannelAttention<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = activation_backward(Activation::sigmoid, pre_sigmoid_, grad_out);
  g = activation_backward(Activation::relu, pre_relu_, fc2_.backward(g));
  const Tensor<T> g_pool = fc1_.backward(g);
  const Shape& s = input_shape_;
  Tensor<T> gx(s);
  const T inv = T{1} / static_cast<T>(s.plane());
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) std::fill_n(gx.plane(n, c), s.plane(), g_pool[n * s.c + c] * inv);
  return gx;
}

template <typename T>
void ChannelAttention<T>::collect(ParamSet<T>& set) {
  fc1_.collect(set);
  fc2_.collect(set);
}

template <typename T>
void ChannelAttention<T>::costs(std::vector<LayerCost>& rows) const {
  fc1_.costs(rows);
  fc2_.costs(rows);
}

// --- Cefn ---------------------------------------------------------------------

template <typename T>
Cefn<T>::Cefn(const std::string& name, Index channels, const BlockOptions& opt, Rng& rng)
    : use_attention_(opt.use_cefn), form_(opt.cefn_form) {
  if (form_ == CefnForm::literal && !use_attention_) {
    throw ValidationError("cefn: the literal form needs channel attention (use_cefn = true)");
  }
  if (opt.mlp_ratio < 1) throw ValidationError("cefn: mlp_ratio must be >= 1");
  const Index hidden = channels * opt.mlp_ratio;
  norm_in_ = BatchNorm2d<T>(name + ".norm_in", channels);
  expand_ = Conv2d<T>(name + ".expand", ConvSpec::pointwise(channels, hidden), rng);
  if (use_attention_) dw3_ = Conv2d<T>(name + ".dw3", ConvSpec::depthwise(hidden, 3), rng);
  reduce_ = Conv2d<T>(name + ".reduce", ConvSpec::pointwise(hidden, channels), rng);
  if (use_attention_) ca_ = ChannelAttention<T>(name + ".ca", channels, opt.ca_reduction, rng);
  norm_out_ = BatchNorm2d<T>(name + ".norm_out", channels);
  scale_ = ChannelScale<T>(name + ".scale", channels, static_cast<T>(opt.scale_init));
}

template <typename T>
Tensor<T> Cefn<T>::feed_forward(const Tensor<T>& z) {
  Tensor<T> e = expand_.forward(z);
  pre_gelu_ = use_attention_ ? dw3_.forward(e) : std::move(e);
  return reduce_.forward(activation_forward(Activation::gelu, pre_gelu_));
}

template <typename T>
Tensor<T> Cefn<T>::feed_forward_backward(const Tensor<T>& grad) {
  Tensor<T> g = activation_backward(Activation::gelu, pre_gelu_, reduce_.backward(grad));
  if (use_attention_) g = dw3_.backward(g);
  return expand_.backward(g);
}

template <typename T>
Tensor<T> Cefn<T>::forward(const Tensor<T>& x, Mode mode) {
  if (x.shape().c != norm_out_.gamma().value.shape().c) {
    throw ValidationError("cefn: input has " + std::to_string(x.shape().c) + " channels, block expects " +
                          std::to_string(norm_out_.gamma().value.shape().c));
  }
  return form_ == CefnForm::standard ? forward_standard(x, mode) : forward_literal(x, mode);
}

template <typename T>
Tensor<T> Cefn<T>::backward(const Tensor<T>& grad_out) {
  return form_ == CefnForm::standard ? backward_standard(grad_out) : backward_literal(grad_out);
}

template <typename T>
Tensor<T> Cefn<T>::forward_standard(const Tensor<T>& x, Mode mode) {
  const Tensor<T> z = norm_in_.forward(x, mode);
  ffn_out_ = feed_forward(z);
  Tensor<T> p = ffn_out_;
  if (use_attention_) {
    gate_ = ca_.forward(z);
    p = mul(ffn_out_, gate_);
  }
  return add(x, scale_.forward(norm_out_.forward(p, mode)));
}

template <typename T>
Tensor<T> Cefn<T>::backward_standard(const Tensor<T>& grad_out) {
  const Tensor<T> gp = norm_out_.backward(scale_.backward(grad_out));
  Tensor<T> gz;
  if (use_attention_) {
    gz = feed_forward_backward(mul(gp, gate_));
    add_inplace(gz, ca_.backward(lkd::reduce(ReduceKind::sum, mul(gp, ffn_out_), ReduceAxes::spatial)));
  } else {
    gz = feed_forward_backward(gp);
  }
  Tensor<T> gx = norm_in_.backward(gz);
  add_inplace(gx, grad_out);
  return gx;
}

template <typename T>
Tensor<T> Cefn<T>::forward_literal(const Tensor<T>& x, Mode mode) {
  ffn_out_ = feed_forward(x);
  gate_ = scale_.forward(ca_.forward(x));
  const Tensor<T> p = mul(ffn_out_, gate_);
  return add(x, norm_out_.forward(norm_in_.forward(p, mode), mode));
}

template <typename T>
Tensor<T> Cefn<T>::backward_literal(const Tensor<T>& grad_out) {
  const Tensor<T> gp = norm_in_.backward(norm_out_.backward(grad_out));
  Tensor<T> gx = feed_forward_backward(mul(gp, gate_));
  const Tensor<T> g_gate = lkd::reduce(ReduceKind::sum, mul(gp, ffn_out_), ReduceAxes::spatial);
  add_inplace(gx, ca_.backward(scale_.backward(g_gate)));
  add_inplace(gx, grad_out);
  return gx;
}

template <typename T>
void Cefn<T>::collect(ParamSet<T>& set) {
  norm_in_.collect(set);
  expand_.collect(set);
  if (use_attention_) dw3_.collect(set);
  reduce_.collect(set);
  if (use_attention_) ca_.collect(set);
  norm_out_.collect(set);
  scale_.collect(set);
}

template <typename T>
void Cefn<T>::costs(std::vector<LayerCost>& rows, Index h, Index w) const {
  norm_in_.costs(rows);
  expand_.costs(rows, h, w);
  if (use_attention_) dw3_.costs(rows, h, w);
  reduce_.costs(rows, h, w);
  if (use_attention_) ca_.costs(rows);
  norm_out_.costs(rows);
  scale_.costs(rows);
}

// --- LkdBlock -------------------------------------------------------------------

template <typename T>
LkdBlock<T>::LkdBlock(const std::string& name, Index channels, const BlockOptions& opt, Rng& rng)
    : dlkcb_(name + ".dlkcb", channels, opt, rng), cefn_(name + ".cefn", channels, opt, rng) {}

template <typename T>
Tensor<T> LkdBlock<T>::forward(const Tensor<T>& x, Mode mode) {
  return cefn_.forward(dlkcb_.forward(x, mode), mode);
}

template <typename T>
Tensor<T> LkdBlock<T>::backward(const Tensor<T>& grad_out) {
  return dlkcb_.backward(cefn_.backward(grad_out));
}

template <typename T>
void LkdBlock<T>::collect(ParamSet<T>& set) {
  dlkcb_.collect(set);
  cefn_.collect(set);
}

template <typename T>
void LkdBlock<T>::costs(std::vector<LayerCost>& rows, Index h, Index w) const {
  dlkcb_.costs(rows, h, w);
  cefn_.costs(rows, h, w);
}

template class Dlkcb<float>;
template class Dlkcb<double>;
template class ChannelAttention<float>;
template class ChannelAttention<double>;
template class Cefn<float>;
template class Cefn<double>;
template class LkdBlock<float>;
template class LkdBlock<double>;

}  // namespace lkd
