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

#include "lkd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lkd/error.hpp"
#include "lkd/parallel.hpp"

namespace lkd {

// --- ConvSpec ----------------------------------------------------------------

Pair ConvSpec::resolved_padding() const {
  if (!same) return padding;
  const Pair e = extent();
  if (e.h % 2 == 0 || e.w % 2 == 0) {
    throw ValidationError("\"same\" padding needs an odd effective extent, got " + std::to_string(e.h) + "x" +
                          std::to_string(e.w));
  }
  return {e.h / 2, e.w / 2};
}

void ConvSpec::validate() const {
  if (in_ch <= 0 || out_ch <= 0 || groups <= 0) throw ValidationError("conv: channels and groups must be positive");
  if (in_ch % groups != 0 || out_ch % groups != 0) {
    throw ValidationError("conv: channels " + std::to_string(in_ch) + "->" + std::to_string(out_ch) +
                          " not divisible by groups " + std::to_string(groups));
  }
  if (kernel.h <= 0 || kernel.w <= 0 || stride.h <= 0 || stride.w <= 0 || dilation.h <= 0 || dilation.w <= 0) {
    throw ValidationError("conv: kernel, stride and dilation must be positive");
  }
  if (padding.h < 0 || padding.w < 0) throw ValidationError("conv: negative padding");
  (void)resolved_padding();
}

Shape ConvSpec::output_shape(const Shape& input) const {
  validate();
  if (input.c != in_ch) {
    throw ValidationError("conv: input has " + std::to_string(input.c) + " channels, spec expects " +
                          std::to_string(in_ch));
  }
  const Pair p = resolved_padding();
  const Pair e = extent();
  const Index oh = input.h + 2 * p.h - e.h;
  const Index ow = input.w + 2 * p.w - e.w;
  if (oh < 0 || ow < 0) throw ValidationError("conv: input " + input.str() + " smaller than kernel extent");
  return {input.n, out_ch, oh / stride.h + 1, ow / stride.w + 1};
}

Index ConvSpec::macs(Index h, Index w) const {
  const Shape out = output_shape({1, in_ch, h, w});
  return weight_count() * out.h * out.w;
}

ConvSpec ConvSpec::depthwise(Index channels, Index k, Index dilation, bool bias) {
  ConvSpec s;
  s.in_ch = s.out_ch = s.groups = channels;
  s.kernel = {k, k};
  s.dilation = {dilation, dilation};
  s.same = true;
  s.has_bias = bias;
  return s;
}

ConvSpec ConvSpec::pointwise(Index in, Index out, bool bias) {
  ConvSpec s;
  s.in_ch = in;
  s.out_ch = out;
  s.has_bias = bias;
  return s;
}

ConvSpec ConvSpec::dense(Index in, Index out, Index k, bool bias) {
  ConvSpec s;
  s.in_ch = in;
  s.out_ch = out;
  s.kernel = {k, k};
  s.same = true;
  s.has_bias = bias;
  return s;
}

std::string describe(const ConvSpec& s) {
  std::ostringstream os;
  os << "conv " << s.in_ch << "->" << s.out_ch << " k" << s.kernel.h << 'x' << s.kernel.w;
  if (s.stride.h != 1 || s.stride.w != 1) os << " s" << s.stride.h;
  if (s.dilation.h != 1 || s.dilation.w != 1) os << " d" << s.dilation.h;
  if (s.groups != 1) os << " g" << s.groups;
  return os.str();
}

// --- convolution ---------------------------------------------------------

namespace {

Index floor_div(Index a, Index b) {
  Index q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Output indices o in [lo, hi) for which o * stride + offset lands in [0, size).
struct Range {
  Index lo;
  Index hi;
};

Range valid_range(Index offset, Index stride, Index size, Index out_size) {
  const Index lo = std::max<Index>(0, -floor_div(offset, stride));
  const Index hi = std::min<Index>(out_size, floor_div(size - 1 - offset, stride) + 1);
  return {lo, std::max(lo, hi)};
}

template <typename T>
void check_weight(const ConvSpec& spec, const Tensor<T>& weight, const Tensor<T>* bias) {
  require_same_shape(weight.shape(), spec.weight_shape(), "conv weight");
  if (spec.has_bias) {
    if (bias == nullptr) throw ValidationError("conv: spec has bias but no bias tensor given");
    require_same_shape(bias->shape(), spec.bias_shape(), "conv bias");
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight, const Tensor<T>* bias) {
  const Shape os = spec.output_shape(x.shape());
  check_weight(spec, weight, spec.has_bias ? bias : nullptr);
  const Shape& is = x.shape();
  const Pair pad = spec.resolved_padding();
  const Index icpg = spec.in_ch / spec.groups;
  const Index ocpg = spec.out_ch / spec.groups;
  const Index kh = spec.kernel.h, kw = spec.kernel.w;
  const Index sh = spec.stride.h, sw = spec.stride.w;
  const Index dh = spec.dilation.h, dw = spec.dilation.w;
  Tensor<T> out(os);

  parallel_for(os.n * os.c, [&](Index idx) {
    const Index n = idx / os.c;
    const Index oc = idx % os.c;
    T* o = out.plane(n, oc);
    std::fill_n(o, os.plane(), spec.has_bias ? (*bias)[oc] : T{0});
    const Index g = oc / ocpg;
    for (Index icl = 0; icl < icpg; ++icl) {
      const T* in = x.plane(n, g * icpg + icl);
      const T* wk = weight.data() + (oc * icpg + icl) * kh * kw;
      for (Index ky = 0; ky < kh; ++ky) {
        const Index yoff = ky * dh - pad.h;
        const Range ry = valid_range(yoff, sh, is.h, os.h);
        for (Index kx = 0; kx < kw; ++kx) {
          const T wv = wk[ky * kw + kx];
          const Index xoff = kx * dw - pad.w;
          const Range rx = valid_range(xoff, sw, is.w, os.w);
          if (rx.lo >= rx.hi) continue;
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            const T* row = in + (oy * sh + yoff) * is.w;
            T* orow = o + oy * os.w;
            if (sw == 1) {
              const T* src = row + xoff;
              for (Index ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * src[ox];
            } else {
              for (Index ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += wv * row[ox * sw + xoff];
            }
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> conv2d_reference(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight,
                           const Tensor<T>* bias) {
  const Shape os = spec.output_shape(x.shape());
  check_weight(spec, weight, spec.has_bias ? bias : nullptr);
  const Shape& is = x.shape();
  const Pair pad = spec.resolved_padding();
  const Index icpg = spec.in_ch / spec.groups;
  const Index ocpg = spec.out_ch / spec.groups;
  Tensor<T> out(os);
  for (Index n = 0; n < os.n; ++n)
    for (Index oc = 0; oc < os.c; ++oc)
      for (Index oy = 0; oy < os.h; ++oy)
        for (Index ox = 0; ox < os.w; ++ox) {
          T acc = spec.has_bias ? (*bias)[oc] : T{0};
          const Index g = oc / ocpg;
          for (Index icl = 0; icl < icpg; ++icl)
            for (Index ky = 0; ky < spec.kernel.h; ++ky)
              for (Index kx = 0; kx < spec.kernel.w; ++kx) {
                const Index iy = oy * spec.stride.h - pad.h + ky * spec.dilation.h;
                const Index ix = ox * spec.stride.w - pad.w + kx * spec.dilation.w;
                if (iy < 0 || iy >= is.h || ix < 0 || ix >= is.w) continue;
                acc += weight.at(oc, icl, ky, kx) * x.at(n, g * icpg + icl, iy, ix);
              }
          out.at(n, oc, oy, ox) = acc;
        }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvSpec& spec, const Tensor<T>& weight,
                             const Tensor<T>& grad_out) {
  const Shape os = spec.output_shape(x.shape());
  require_same_shape(grad_out.shape(), os, "conv2d_backward grad_out");
  require_same_shape(weight.shape(), spec.weight_shape(), "conv weight");
  const Shape& is = x.shape();
  const Pair pad = spec.resolved_padding();
  const Index icpg = spec.in_ch / spec.groups;
  const Index ocpg = spec.out_ch / spec.groups;
  const Index kh = spec.kernel.h, kw = spec.kernel.w;
  const Index sh = spec.stride.h, sw = spec.stride.w;
  const Index dh = spec.dilation.h, dw = spec.dilation.w;

  ConvGrads<T> grads{Tensor<T>(is), Tensor<T>(spec.weight_shape()),
                     spec.has_bias ? Tensor<T>(spec.bias_shape()) : Tensor<T>()};

  // grad_x: scatter each output gradient back through the taps that produced it.
  parallel_for(is.n * is.c, [&](Index idx) {
    const Index n = idx / is.c;
    const Index ic = idx % is.c;
    const Index g = ic / icpg;
    const Index icl = ic % icpg;
    T* gx = grads.grad_x.plane(n, ic);
    for (Index ocl = 0; ocl < ocpg; ++ocl) {
      const Index oc = g * ocpg + ocl;
      const T* go = grad_out.plane(n, oc);
      const T* wk = weight.data() + (oc * icpg + icl) * kh * kw;
      for (Index ky = 0; ky < kh; ++ky) {
        const Index yoff = ky * dh - pad.h;
        const Range ry = valid_range(yoff, sh, is.h, os.h);
        for (Index kx = 0; kx < kw; ++kx) {
          const T wv = wk[ky * kw + kx];
          const Index xoff = kx * dw - pad.w;
          const Range rx = valid_range(xoff, sw, is.w, os.w);
          if (rx.lo >= rx.hi) continue;
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            T* row = gx + (oy * sh + yoff) * is.w;
            const T* grow = go + oy * os.w;
            if (sw == 1) {
              T* dst = row + xoff;
              for (Index ox = rx.lo; ox < rx.hi; ++ox) dst[ox] += wv * grow[ox];
            } else {
              for (Index ox = rx.lo; ox < rx.hi; ++ox) row[ox * sw + xoff] += wv * grow[ox];
            }
          }
        }
      }
    }
  });

  // grad_w: correlate input with output gradient; lanes keep the inner loop vectorisable.
  parallel_for(spec.out_ch, [&](Index oc) {
    const Index g = oc / ocpg;
    std::vector<T> lane(static_cast<std::size_t>(os.w));
    for (Index icl = 0; icl < icpg; ++icl) {
      for (Index ky = 0; ky < kh; ++ky) {
        const Index yoff = ky * dh - pad.h;
        const Range ry = valid_range(yoff, sh, is.h, os.h);
        for (Index kx = 0; kx < kw; ++kx) {
          const Index xoff = kx * dw - pad.w;
          const Range rx = valid_range(xoff, sw, is.w, os.w);
          std::fill(lane.begin(), lane.end(), T{0});
          for (Index n = 0; n < is.n; ++n) {
            const T* in = x.plane(n, g * icpg + icl);
            const T* go = grad_out.plane(n, oc);
            for (Index oy = ry.lo; oy < ry.hi; ++oy) {
              const T* row = in + (oy * sh + yoff) * is.w;
              const T* grow = go + oy * os.w;
              if (sw == 1) {
                const T* src = row + xoff;
                for (Index ox = rx.lo; ox < rx.hi; ++ox) lane[ox] += grow[ox] * src[ox];
              } else {
                for (Index ox = rx.lo; ox < rx.hi; ++ox) lane[ox] += grow[ox] * row[ox * sw + xoff];
              }
            }
          }
          T acc = 0;
          for (Index ox = rx.lo; ox < rx.hi; ++ox) acc += lane[ox];
          grads.grad_w[((oc * icpg + icl) * kh + ky) * kw + kx] = acc;
        }
      }
    }
    if (spec.has_bias) {
      T acc = 0;
      for (Index n = 0; n < os.n; ++n) {
        const T* go = grad_out.plane(n, oc);
        for (Index i = 0; i < os.plane(); ++i) acc += go[i];
      }
      grads.grad_b[oc] = acc;
    }
  });
  return grads;
}

// --- batch normalisation -----------------------------------------------

namespace {

template <typename T>
void check_channel_vector(const Tensor<T>& v, Index channels, const char* what) {
  require_same_shape(v.shape(), Shape{1, channels, 1, 1}, what);
}

}  // namespace

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          Tensor<T>& running_mean, Tensor<T>& running_var, double momentum, double eps,
                          BatchNormCache<T>* cache) {
  const Shape& s = x.shape();
  for (const Tensor<T>* v : {&gamma, &beta, &static_cast<const Tensor<T>&>(running_mean),
                             &static_cast<const Tensor<T>&>(running_var)}) {
    check_channel_vector(*v, s.c, "batchnorm parameter");
  }
  const Index count = s.n * s.plane();
  if (count < 2) {
    throw ValidationError("batchnorm (train): need N*H*W >= 2 per channel, got " + std::to_string(count));
  }
  Tensor<T> out(s);
  if (cache) {
    cache->x_hat = Tensor<T>(s);
    cache->inv_std.assign(static_cast<std::size_t>(s.c), T{0});
  }
  const Index plane = s.plane();
  for (Index c = 0; c < s.c; ++c) {
    T sum = 0;
    for (Index n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (Index i = 0; i < plane; ++i) sum += p[i];
    }
    const T mean = sum / static_cast<T>(count);
    T sq = 0;
    for (Index n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (Index i = 0; i < plane; ++i) {
        const T d = p[i] - mean;
        sq += d * d;
      }
    }
    const T var = sq / static_cast<T>(count);
    const T inv_std = T{1} / std::sqrt(var + static_cast<T>(eps));
    for (Index n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* o = out.plane(n, c);
      T* xh = cache ? cache->x_hat.plane(n, c) : nullptr;
      for (Index i = 0; i < plane; ++i) {
        const T h = (p[i] - mean) * inv_std;
        if (xh) xh[i] = h;
        o[i] = gamma[c] * h + beta[c];
      }
    }
    if (cache) cache->inv_std[static_cast<std::size_t>(c)] = inv_std;
    const T m = static_cast<T>(momentum);
    const T unbiased = sq / static_cast<T>(count - 1);
    running_mean[c] = (T{1} - m) * running_mean[c] + m * mean;
    running_var[c] = (T{1} - m) * running_var[c] + m * unbiased;
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm_eval(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                         const Tensor<T>& running_mean, const Tensor<T>& running_var, double eps) {
  const Shape& s = x.shape();
  for (const Tensor<T>* v : {&gamma, &beta, &running_mean, &running_var}) {
    check_channel_vector(*v, s.c, "batchnorm parameter");
  }
  Tensor<T> out(s);
  for (Index c = 0; c < s.c; ++c) {
    const T inv_std = T{1} / std::sqrt(running_var[c] + static_cast<T>(eps));
    const T a = gamma[c] * inv_std;
    const T b = beta[c] - running_mean[c] * a;
    for (Index n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* o = out.plane(n, c);
      for (Index i = 0; i < s.plane(); ++i) o[i] = a * p[i] + b;
    }
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_train_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                           const BatchNormCache<T>& cache) {
  const Shape& s = grad_out.shape();
  require_same_shape(cache.x_hat.shape(), s, "batchnorm backward");
  BatchNormGrads<T> g{Tensor<T>(s), Tensor<T>(Shape{1, s.c, 1, 1}), Tensor<T>(Shape{1, s.c, 1, 1})};
  const Index plane = s.plane();
  const T count = static_cast<T>(s.n * plane);
  for (Index c = 0; c < s.c; ++c) {
    T sum_g = 0;
    T sum_gx = 0;
    for (Index n = 0; n < s.n; ++n) {
      const T* go = grad_out.plane(n, c);
      const T* xh = cache.x_hat.plane(n, c);
      for (Index i = 0; i < plane; ++i) {
        sum_g += go[i];
        sum_gx += go[i] * xh[i];
      }
    }
    g.grad_gamma[c] = sum_gx;
    g.grad_beta[c] = sum_g;
    const T k = gamma[c] * cache.inv_std[static_cast<std::size_t>(c)] / count;
    for (Index n = 0; n < s.n; ++n) {
      const T* go = grad_out.plane(n, c);
      const T* xh = cache.x_hat.plane(n, c);
      T* gx = g.grad_x.plane(n, c);
      for (Index i = 0; i < plane; ++i) gx[i] = k * (count * go[i] - sum_g - xh[i] * sum_gx);
    }
  }
  return g;
}

template <typename T>
BatchNormGrads<T> batchnorm_eval_backward(const Tensor<T>& x, const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                          const Tensor<T>& running_mean, const Tensor<T>& running_var,
                                          double eps) {
  const Shape& s = grad_out.shape();
  require_same_shape(x.shape(), s, "batchnorm backward");
  BatchNormGrads<T> g{Tensor<T>(s), Tensor<T>(Shape{1, s.c, 1, 1}), Tensor<T>(Shape{1, s.c, 1, 1})};
  for (Index c = 0; c < s.c; ++c) {
    const T inv_std = T{1} / std::sqrt(running_var[c] + static_cast<T>(eps));
    T sum_g = 0;
    T sum_gx = 0;
    for (Index n = 0; n < s.n; ++n) {
      const T* go = grad_out.plane(n, c);
      const T* p = x.plane(n, c);
      T* gx = g.grad_x.plane(n, c);
      for (Index i = 0; i < s.plane(); ++i) {
        sum_g += go[i];
        sum_gx += go[i] * (p[i] - running_mean[c]) * inv_std;
        gx[i] = go[i] * gamma[c] * inv_std;
      }
    }
    g.grad_gamma[c] = sum_gx;
    g.grad_beta[c] = sum_g;
  }
  return g;
}

// --- activations -----------------------------------------------------------

namespace {

template <typename T>
constexpr T kSqrt2OverPi = static_cast<T>(0.79788456080286535587989211986876);

template <typename T>
inline T sigmoid(T v) {
  return T{1} / (T{1} + std::exp(-v));
}

}  // namespace

template <typename T>
Tensor<T> activation_forward(Activation kind, const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const Index n = x.numel();
  const T* p = x.data();
  T* o = out.data();
  switch (kind) {
    case Activation::relu:
      for (Index i = 0; i < n; ++i) o[i] = p[i] > T{0} ? p[i] : T{0};
      break;
    case Activation::sigmoid:
      for (Index i = 0; i < n; ++i) o[i] = sigmoid(p[i]);
      break;
    case Activation::gelu:
      for (Index i = 0; i < n; ++i) {
        const T v = p[i];
        const T u = kSqrt2OverPi<T> * (v + static_cast<T>(kGeluCubic) * v * v * v);
        o[i] = T{0.5} * v * (T{1} + std::tanh(u));
      }
      break;
  }
  return out;
}

template <typename T>
Tensor<T> activation_backward(Activation kind, const Tensor<T>& x, const Tensor<T>& grad_out) {
  require_same_shape(x.shape(), grad_out.shape(), "activation backward");
  Tensor<T> out(x.shape());
  const Index n = x.numel();
  const T* p = x.data();
  const T* g = grad_out.data();
  T* o = out.data();
  switch (kind) {
    case Activation::relu:
      for (Index i = 0; i < n; ++i) o[i] = p[i] > T{0} ? g[i] : T{0};
      break;
    case Activation::sigmoid:
      for (Index i = 0; i < n; ++i) {
        const T s = sigmoid(p[i]);
        o[i] = g[i] * s * (T{1} - s);
      }
      break;
    case Activation::gelu:
      for (Index i = 0; i < n; ++i) {
        const T v = p[i];
        const T c3 = static_cast<T>(kGeluCubic);
        const T th = std::tanh(kSqrt2OverPi<T> * (v + c3 * v * v * v));
        const T du = kSqrt2OverPi<T> * (T{1} + T{3} * c3 * v * v);
        o[i] = g[i] * (T{0.5} * (T{1} + th) + T{0.5} * v * (T{1} - th * th) * du);
      }
      break;
  }
  return out;
}

// --- linear ------------------------------------------------------------

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias) {
  const Shape& s = x.shape();
  if (s.h != 1 || s.w != 1) throw ValidationError("linear: input must be [N,C,1,1], got " + s.str());
  const Shape& ws = weight.shape();
  if (ws.c != s.c || ws.h != 1 || ws.w != 1) {
    throw ValidationError("linear: weight " + ws.str() + " incompatible with input " + s.str());
  }
  if (bias) require_same_shape(bias->shape(), Shape{ws.n, 1, 1, 1}, "linear bias");
  Tensor<T> out(Shape{s.n, ws.n, 1, 1});
  for (Index n = 0; n < s.n; ++n)
    for (Index o = 0; o < ws.n; ++o) {
      T acc = bias ? (*bias)[o] : T{0};
      for (Index i = 0; i < s.c; ++i) acc += weight[o * s.c + i] * x[n * s.c + i];
      out[n * ws.n + o] = acc;
    }
  return out;
}

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                               bool has_bias) {
  const Shape& s = x.shape();
  const Shape& ws = weight.shape();
  require_same_shape(grad_out.shape(), Shape{s.n, ws.n, 1, 1}, "linear backward");
  LinearGrads<T> g{Tensor<T>(s), Tensor<T>(ws), has_bias ? Tensor<T>(Shape{ws.n, 1, 1, 1}) : Tensor<T>()};
  for (Index n = 0; n < s.n; ++n)
    for (Index o = 0; o < ws.n; ++o) {
      const T go = grad_out[n * ws.n + o];
      if (has_bias) g.grad_b[o] += go;
      for (Index i = 0; i < s.c; ++i) {
        g.grad_x[n * s.c + i] += go * weight[o * s.c + i];
        g.grad_w[o * s.c + i] += go * x[n * s.c + i];
      }
    }
  return g;
}

// --- pixel shuffle ----------------------------------------------------

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, Index r) {
  const Shape& s = x.shape();
  if (r <= 0 || s.c % (r * r) != 0) {
    throw ValidationError("pixel_shuffle: channels " + std::to_string(s.c) + " not divisible by r^2 = " +
                          std::to_string(r * r));
  }
  const Index oc = s.c / (r * r);
  Tensor<T> out(Shape{s.n, oc, s.h * r, s.w * r});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < oc; ++c)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j) {
          const T* src = x.plane(n, c * r * r + i * r + j);
          T* dst = out.plane(n, c);
          for (Index h = 0; h < s.h; ++h)
            for (Index w = 0; w < s.w; ++w) dst[(h * r + i) * s.w * r + w * r + j] = src[h * s.w + w];
        }
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, Index r) {
  const Shape& s = x.shape();
  if (r <= 0 || s.h % r != 0 || s.w % r != 0) {
    throw ValidationError("pixel_unshuffle: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                          " not divisible by r = " + std::to_string(r));
  }
  const Index oh = s.h / r, ow = s.w / r;
  Tensor<T> out(Shape{s.n, s.c * r * r, oh, ow});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j) {
          const T* src = x.plane(n, c);
          T* dst = out.plane(n, c * r * r + i * r + j);
          for (Index h = 0; h < oh; ++h)
            for (Index w = 0; w < ow; ++w) dst[h * ow + w] = src[(h * r + i) * s.w + w * r + j];
        }
  return out;
}

#define LKD_INSTANTIATE(T)                                                                                     \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const ConvSpec&, const Tensor<T>&, const Tensor<T>*);   \
  template Tensor<T> conv2d_reference(const Tensor<T>&, const ConvSpec&, const Tensor<T>&, const Tensor<T>*); \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const ConvSpec&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> batchnorm_train(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&,          \
                                     Tensor<T>&, double, double, BatchNormCache<T>*);                           \
  template Tensor<T> batchnorm_eval(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    const Tensor<T>&, double);                                                 \
  template BatchNormGrads<T> batchnorm_train_backward(const Tensor<T>&, const Tensor<T>&,                      \
                                                      const BatchNormCache<T>&);                               \
  template BatchNormGrads<T> batchnorm_eval_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                                     const Tensor<T>&, const Tensor<T>&, double);              \
  template Tensor<T> activation_forward(Activation, const Tensor<T>&);                                          \
  template Tensor<T> activation_backward(Activation, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> linear_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                      \
  template LinearGrads<T> linear_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);          \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, Index);                                                    \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, Index);

LKD_INSTANTIATE(float)
LKD_INSTANTIATE(double)

}  // namespace lkd
