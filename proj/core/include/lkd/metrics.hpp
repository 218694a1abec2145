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

#include <limits>

#include "lkd/tensor.hpp"

namespace lkd {

/// Returned by psnr for identical inputs.
inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

/// 10 log10(max_val^2 / MSE) over all elements; +inf when MSE == 0.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double max_val = 1.0);

struct SsimOptions {
  Index window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_val = 1.0;
};

/// Mean local SSIM with a Gaussian window over the valid region, computed per
/// image and channel and averaged. Images smaller than the window use the
/// largest odd window that fits.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& opt = {});

}  // namespace lkd
