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

#include "lkd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lkd/error.hpp"

namespace lkd {

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double max_val) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (a.empty()) throw ValidationError("psnr: empty input");
  double sse = 0;
  for (Index i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.numel());
  if (mse == 0) return kPsnrInfinite;
  return 10.0 * std::log10(max_val * max_val / mse);
}

namespace {

std::vector<double> gaussian_window(Index size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double mid = static_cast<double>(size - 1) / 2.0;
  double sum = 0;
  for (Index i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - mid;
    g[static_cast<std::size_t>(i)] = std::exp(-x * x / (2 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-region filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, Index h, Index w, const std::vector<double>& g) {
  const Index k = static_cast<Index>(g.size());
  const Index oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * ow));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < ow; ++x) {
      double acc = 0;
      for (Index i = 0; i < k; ++i) acc += g[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y * w + x + i)];
      rows[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < ow; ++x) {
      double acc = 0;
      for (Index i = 0; i < k; ++i) acc += g[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>((y + i) * ow + x)];
      out[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimOptions& opt) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  const Shape& s = a.shape();
  if (a.empty()) throw ValidationError("ssim: empty input");
  Index win = std::min({opt.window, s.h, s.w});
  if (win % 2 == 0) --win;
  const std::vector<double> g = gaussian_window(win, opt.sigma);
  const double c1 = (opt.k1 * opt.max_val) * (opt.k1 * opt.max_val);
  const double c2 = (opt.k2 * opt.max_val) * (opt.k2 * opt.max_val);
  const std::size_t plane = static_cast<std::size_t>(s.plane());
  std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
  double total = 0;
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      const T* pa = a.plane(n, c);
      const T* pb = b.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        x[i] = static_cast<double>(pa[i]);
        y[i] = static_cast<double>(pb[i]);
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
      const auto mx = filter_valid(x, s.h, s.w, g);
      const auto my = filter_valid(y, s.h, s.w, g);
      const auto sxx = filter_valid(xx, s.h, s.w, g);
      const auto syy = filter_valid(yy, s.h, s.w, g);
      const auto sxy = filter_valid(xy, s.h, s.w, g);
      double sum = 0;
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cov = sxy[i] - mx[i] * my[i];
        sum += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      }
      total += sum / static_cast<double>(mx.size());
    }
  return total / static_cast<double>(s.n * s.c);
}

template double psnr(const Tensor<float>&, const Tensor<float>&, double);
template double psnr(const Tensor<double>&, const Tensor<double>&, double);
template double ssim(const Tensor<float>&, const Tensor<float>&, const SsimOptions&);
template double ssim(const Tensor<double>&, const Tensor<double>&, const SsimOptions&);

}  // namespace lkd
