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

#include "lkd/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lkd/error.hpp"

namespace lkd {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw IoError("tensor file truncated in header");
  return v;
}

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::f32 : DType::f64;
}

TensorHeader parse_header(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4)) throw IoError("tensor file truncated before magic");
  if (std::memcmp(magic.data(), "LKDT", 4) != 0) throw IoError("bad tensor magic (expected LKDT)");
  TensorHeader h;
  h.version = get<std::uint16_t>(is);
  if (h.version != kTensorFormatVersion) {
    throw IoError("unsupported tensor format version " + std::to_string(h.version));
  }
  const auto dtype = get<std::uint8_t>(is);
  if (dtype > 1) throw IoError("unknown tensor dtype " + std::to_string(dtype));
  h.dtype = static_cast<DType>(dtype);
  std::array<std::uint64_t, 4> dims{};
  for (auto& d : dims) d = get<std::uint64_t>(is);
  for (auto d : dims) {
    if (d > (1ULL << 40)) throw IoError("implausible tensor dimension " + std::to_string(d));
  }
  h.shape = Shape{static_cast<Index>(dims[0]), static_cast<Index>(dims[1]), static_cast<Index>(dims[2]),
                  static_cast<Index>(dims[3])};
  return h;
}

template <typename Stored, typename T>
Tensor<T> read_payload(std::istream& is, const Shape& shape) {
  std::vector<Stored> raw(static_cast<std::size_t>(shape.numel()));
  const auto bytes = static_cast<std::streamsize>(raw.size() * sizeof(Stored));
  if (!is.read(reinterpret_cast<char*>(raw.data()), bytes)) throw IoError("tensor file truncated in payload");
  if constexpr (std::is_same_v<Stored, T>) {
    return Tensor<T>(shape, std::move(raw));
  } else {
    return Tensor<T>(shape, std::vector<T>(raw.begin(), raw.end()));
  }
}

}  // namespace

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.write("LKDT", 4);
  put<std::uint16_t>(os, kTensorFormatVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(dtype_of<T>()));
  const Shape& s = t.shape();
  for (Index d : {s.n, s.c, s.h, s.w}) put<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(T)));
  if (!os) throw IoError("failed writing tensor");
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  const TensorHeader h = parse_header(is);
  if (h.dtype == DType::f32) return read_payload<float, T>(is, h.shape);
  return read_payload<double, T>(is, h.shape);
}

TensorHeader read_tensor_header(std::istream& is) {
  TensorHeader h = parse_header(is);
  is.seekg(static_cast<std::streamoff>(h.payload_bytes()), std::ios::cur);
  if (!is) throw IoError("tensor file truncated in payload");
  return h;
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_tensor<T>(is);
}

template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template Tensor<float> read_tensor(std::istream&);
template Tensor<double> read_tensor(std::istream&);
template void save_tensor(const std::filesystem::path&, const Tensor<float>&);
template void save_tensor(const std::filesystem::path&, const Tensor<double>&);
template Tensor<float> load_tensor(const std::filesystem::path&);
template Tensor<double> load_tensor(const std::filesystem::path&);

}  // namespace lkd
