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

#include <filesystem>

#include "lkd/tensor.hpp"

namespace lkd {

/// Binary PPM (P6, maxval <= 255) to [1, 3, H, W] in [0, 1].
Tensor<float> read_ppm(const std::filesystem::path& path);

/// Writes a [1, 3, H, W] or [1, 1, H, W] tensor as P6; values are clamped to
/// [0, 1] and rounded to 8 bits. Single-channel input is written as grey.
template <typename T>
void write_ppm(const std::filesystem::path& path, const Tensor<T>& image);

}  // namespace lkd
