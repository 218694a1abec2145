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

#include "lkd/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "lkd/error.hpp"

namespace lkd {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is, const std::filesystem::path& path) {
  std::string tok;
  char ch = 0;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(is, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  if (tok.empty()) throw IoError("ppm: truncated header in " + path.string());
  return tok;
}

Index header_int(std::istream& is, const std::filesystem::path& path) {
  const std::string tok = header_token(is, path);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return static_cast<Index>(v);
  } catch (const std::exception&) {
    throw IoError("ppm: bad header value \"" + tok + "\" in " + path.string());
  }
}

}  // namespace

Tensor<float> read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("ppm: cannot open " + path.string());
  if (header_token(is, path) != "P6") throw IoError("ppm: " + path.string() + " is not a binary P6 file");
  const Index w = header_int(is, path);
  const Index h = header_int(is, path);
  const Index maxval = header_int(is, path);
  if (maxval > 255) throw IoError("ppm: 16-bit files are not supported (" + path.string() + ")");
  std::vector<unsigned char> raw(static_cast<std::size_t>(3 * h * w));
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (is.gcount() != static_cast<std::streamsize>(raw.size())) throw IoError("ppm: truncated pixel data in " + path.string());
  Tensor<float> out(Shape{1, 3, h, w});
  const float inv = 1.0f / static_cast<float>(maxval);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < 3; ++c) out.at(0, c, y, x) = static_cast<float>(raw[static_cast<std::size_t>((y * w + x) * 3 + c)]) * inv;
  return out;
}

template <typename T>
void write_ppm(const std::filesystem::path& path, const Tensor<T>& image) {
  const Shape& s = image.shape();
  if (s.n != 1 || (s.c != 3 && s.c != 1)) {
    throw ValidationError("ppm: expected a [1, 3, H, W] or [1, 1, H, W] tensor, got " + s.str());
  }
  std::vector<unsigned char> raw(static_cast<std::size_t>(3 * s.h * s.w));
  for (Index y = 0; y < s.h; ++y)
    for (Index x = 0; x < s.w; ++x)
      for (Index c = 0; c < 3; ++c) {
        const double v = static_cast<double>(image.at(0, s.c == 3 ? c : 0, y, x));
        const double q = std::round(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0) * 255.0);
        raw[static_cast<std::size_t>((y * s.w + x) * 3 + c)] = static_cast<unsigned char>(q);
      }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("ppm: cannot open " + path.string() + " for writing");
  os << "P6\n" << s.w << ' ' << s.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw IoError("ppm: write failed for " + path.string());
}

template void write_ppm(const std::filesystem::path&, const Tensor<float>&);
template void write_ppm(const std::filesystem::path&, const Tensor<double>&);

}  // namespace lkd
