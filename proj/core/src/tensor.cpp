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

#include "lkd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lkd/error.hpp"
#include "lkd/parallel.hpp"

namespace lkd {

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << n << ", " << c << ", " << h << ", " << w << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ValidationError("negative tensor dimension " + shape.str());
  }
  data_.assign(static_cast<std::size_t>(shape.numel()), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (static_cast<Index>(data_.size()) != shape.numel()) {
    throw ValidationError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                          shape.str());
  }
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ValidationError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

namespace {

template <typename T>
inline T apply(BinaryOp op, T x, T y) {
  switch (op) {
    case BinaryOp::add:
      return x + y;
    case BinaryOp::sub:
      return x - y;
    case BinaryOp::mul:
      return x * y;
  }
  return x;
}

bool is_channel_broadcast(const Shape& a, const Shape& b) {
  return b.h == 1 && b.w == 1 && b.c == a.c && (b.n == a.n || b.n == 1);
}

}  // namespace

template <typename T>
Tensor<T> elementwise(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Tensor<T> out(sa);
  if (sa == sb) {
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    const Index n = a.numel();
    for (Index i = 0; i < n; ++i) po[i] = apply(op, pa[i], pb[i]);
    return out;
  }
  if (!is_channel_broadcast(sa, sb)) {
    throw ValidationError("elementwise: shape mismatch " + sa.str() + " vs " + sb.str() +
                          " (only [N,C,1,1] broadcast is supported)");
  }
  const Index plane = sa.plane();
  for (Index n = 0; n < sa.n; ++n) {
    for (Index c = 0; c < sa.c; ++c) {
      const T y = b[(sb.n == 1 ? 0 : n) * sb.c + c];
      const T* pa = a.plane(n, c);
      T* po = out.plane(n, c);
      for (Index i = 0; i < plane; ++i) po[i] = apply(op, pa[i], y);
    }
  }
  return out;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add_inplace");
  T* pa = a.data();
  const T* pb = b.data();
  const Index n = a.numel();
  for (Index i = 0; i < n; ++i) pa[i] += pb[i];
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  const Index n = a.numel();
  for (Index i = 0; i < n; ++i) out[i] = a[i] * factor;
  return out;
}

template <typename T>
Tensor<T> reduce(ReduceKind kind, const Tensor<T>& x, ReduceAxes axes) {
  const Shape& s = x.shape();
  if (x.empty()) throw ValidationError("reduce: empty tensor " + s.str());
  const Index plane = s.plane();
  if (axes == ReduceAxes::spatial) {
    Tensor<T> out(Shape{s.n, s.c, 1, 1});
    for (Index n = 0; n < s.n; ++n) {
      for (Index c = 0; c < s.c; ++c) {
        const T* p = x.plane(n, c);
        T acc = 0;
        for (Index i = 0; i < plane; ++i) acc += p[i];
        out[n * s.c + c] = kind == ReduceKind::mean ? acc / static_cast<T>(plane) : acc;
      }
    }
    return out;
  }
  Tensor<T> out(Shape{1, s.c, 1, 1});
  for (Index c = 0; c < s.c; ++c) {
    T acc = 0;
    for (Index n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (Index i = 0; i < plane; ++i) acc += p[i];
    }
    out[c] = kind == ReduceKind::mean ? acc / static_cast<T>(plane * s.n) : acc;
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ValidationError("concat_channels: incompatible shapes " + sa.str() + " and " + sb.str());
  }
  Tensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const Index plane = sa.plane();
  for (Index n = 0; n < sa.n; ++n) {
    std::copy_n(a.plane(n, 0), sa.c * plane, out.plane(n, 0));
    std::copy_n(b.plane(n, 0), sb.c * plane, out.plane(n, sa.c));
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, Index first, Index count) {
  const Shape& s = x.shape();
  if (first < 0 || count < 0 || first + count > s.c) {
    throw ValidationError("slice_channels: range [" + std::to_string(first) + ", " +
                          std::to_string(first + count) + ") outside " + s.str());
  }
  Tensor<T> out(Shape{s.n, count, s.h, s.w});
  for (Index n = 0; n < s.n; ++n) std::copy_n(x.plane(n, first), count * s.plane(), out.plane(n, 0));
  return out;
}

template <typename T>
void accumulate_grad(Parameter<T>& p, const Tensor<T>& g) {
  require_same_shape(p.value.shape(), g.shape(), ("accumulate_grad(" + p.name + ")").c_str());
  if (p.grad.shape() != p.value.shape()) p.grad = Tensor<T>(p.value.shape());
  add_inplace(p.grad, g);
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

namespace {
int g_threads = 1;
}

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }

#define LKD_INSTANTIATE(T)                                                                \
  template class Tensor<T>;                                                               \
  template Tensor<T> elementwise(BinaryOp, const Tensor<T>&, const Tensor<T>&);           \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                          \
  template Tensor<T> reduce(ReduceKind, const Tensor<T>&, ReduceAxes);                    \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> slice_channels(const Tensor<T>&, Index, Index);                      \
  template void accumulate_grad(Parameter<T>&, const Tensor<T>&);

LKD_INSTANTIATE(float)
LKD_INSTANTIATE(double)

}  // namespace lkd
