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
#include <filesystem>
#include <iosfwd>

#include "lkd/tensor.hpp"

namespace lkd {

// Binary tensor layout (little-endian):
//   "LKDT" | u16 version | u8 dtype (0 = f32, 1 = f64) | 4 x u64 shape | payload
inline constexpr std::uint16_t kTensorFormatVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 4 + 2 + 1 + 4 * 8;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct TensorHeader {
  std::uint16_t version = kTensorFormatVersion;
  DType dtype = DType::f32;
  Shape shape{};

  std::size_t payload_bytes() const {
    return static_cast<std::size_t>(shape.numel()) * (dtype == DType::f32 ? 4 : 8);
  }
};

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t);

/// Reads one tensor, converting to T if the stored dtype differs.
template <typename T>
Tensor<T> read_tensor(std::istream& is);

/// Reads only the header and skips the payload.
TensorHeader read_tensor_header(std::istream& is);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t);

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path);

}  // namespace lkd
