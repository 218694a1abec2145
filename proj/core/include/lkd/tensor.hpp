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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lkd {

using Index = std::int64_t;

/// Shape of a rank-4 tensor laid out as [N, C, H, W], row-major.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  constexpr Index numel() const { return n * c * h * w; }
  constexpr Index plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const;
};

/// Dense [N, C, H, W] array. Lower-rank data (per-channel vectors, linear
/// layer activations) is carried as [N, C, 1, 1].
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  static Tensor ones(Shape shape) { return Tensor(shape, T{1}); }
  static Tensor full(Shape shape, T value) { return Tensor(shape, value); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }
  static Tensor ones_like(const Tensor& t) { return Tensor(t.shape(), T{1}); }

  const Shape& shape() const { return shape_; }
  Index numel() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }

  T& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(Index n, Index c, Index h, Index w) { return data_[static_cast<std::size_t>(offset(n, c, h, w))]; }
  const T& at(Index n, Index c, Index h, Index w) const {
    return data_[static_cast<std::size_t>(offset(n, c, h, w))];
  }

  /// Pointer to the H*W plane of sample n, channel c.
  T* plane(Index n, Index c) { return data() + (n * shape_.c + c) * shape_.plane(); }
  const T* plane(Index n, Index c) const { return data() + (n * shape_.c + c) * shape_.plane(); }

  void fill(T value);

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

/// A named trainable tensor with a gradient buffer of identical shape.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }
};

/// A named non-trainable state tensor (e.g. batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T>* value = nullptr;
};

enum class BinaryOp { add, sub, mul };

/// result[i] = op(a[i], b[i]). b may also be [N, C, 1, 1] (or [1, C, 1, 1])
/// and is then broadcast over the spatial axes (and batch, for N == 1).
template <typename T>
Tensor<T> elementwise(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(BinaryOp::add, a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(BinaryOp::sub, a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(BinaryOp::mul, a, b);
}

/// In-place a += b for equal shapes.
template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

enum class ReduceKind { sum, mean };
enum class ReduceAxes {
  spatial,        // -> [N, C, 1, 1]
  batch_spatial,  // -> [1, C, 1, 1]
};

template <typename T>
Tensor<T> reduce(ReduceKind kind, const Tensor<T>& x, ReduceAxes axes);

/// Global average pooling: mean over H and W.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  return reduce(ReduceKind::mean, x, ReduceAxes::spatial);
}

/// Concatenates along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Channels [first, first + count) of x.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, Index first, Index count);

/// p.grad += g. Repeated calls sum, which is how a tensor consumed by several
/// branches collects its gradient.
template <typename T>
void accumulate_grad(Parameter<T>& p, const Tensor<T>& g);

/// Throws ValidationError naming both shapes unless a.shape() == b.shape().
void require_same_shape(const Shape& a, const Shape& b, const char* what);

bool all_finite(std::span<const float> values);
bool all_finite(std::span<const double> values);

}  // namespace lkd
