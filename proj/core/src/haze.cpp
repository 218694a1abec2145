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

#include "lkd/haze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "lkd/error.hpp"
#include "lkd/image_io.hpp"
#include "lkd/parallel.hpp"
#include "lkd/rng.hpp"

namespace lkd {

std::string depth_kind_name(DepthKind kind) {
  switch (kind) {
    case DepthKind::linear_ramp:
      return "linear-ramp";
    case DepthKind::radial:
      return "radial";
    case DepthKind::smoothed_noise:
      return "smoothed-noise";
  }
  return "?";
}

namespace {

void normalise_unit(std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo;
  const double span = *hi - *lo;
  for (double& x : v) x = span > 0 ? (x - a) / span : 0.0;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

template <typename T>
Tensor<T> render_depth(const DepthField& field, Index h, Index w) {
  if (h <= 0 || w <= 0) throw ValidationError("depth: image size must be positive");
  std::vector<double> v(static_cast<std::size_t>(h * w));
  switch (field.kind) {
    case DepthKind::linear_ramp: {
      const double ca = std::cos(field.angle), sa = std::sin(field.angle);
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w) - 0.5;
          const double t = (static_cast<double>(y) + 0.5) / static_cast<double>(h) - 0.5;
          v[static_cast<std::size_t>(y * w + x)] = u * ca + t * sa;
        }
      break;
    }
    case DepthKind::radial: {
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w) - field.cx;
          const double t = (static_cast<double>(y) + 0.5) / static_cast<double>(h) - field.cy;
          v[static_cast<std::size_t>(y * w + x)] = std::sqrt(u * u + t * t);
        }
      break;
    }
    case DepthKind::smoothed_noise: {
      if (field.length_scale <= 0) throw ValidationError("depth: length_scale must be positive");
      const Index cells = std::max<Index>(1, static_cast<Index>(std::ceil(1.0 / field.length_scale)));
      const Index g = cells + 1;
      Rng rng(field.seed);
      std::vector<double> lattice(static_cast<std::size_t>(g * g));
      for (double& x : lattice) x = rng.uniform();
      auto at = [&](Index gy, Index gx) { return lattice[static_cast<std::size_t>(gy * g + gx)]; };
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(h) * static_cast<double>(cells);
          const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(w) * static_cast<double>(cells);
          const Index iy = std::min<Index>(static_cast<Index>(fy), cells - 1);
          const Index ix = std::min<Index>(static_cast<Index>(fx), cells - 1);
          const double ty = smooth(fy - static_cast<double>(iy));
          const double tx = smooth(fx - static_cast<double>(ix));
          const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
          const double bottom = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
          v[static_cast<std::size_t>(y * w + x)] = top * (1 - ty) + bottom * ty;
        }
      break;
    }
  }
  normalise_unit(v);
  Tensor<T> out(Shape{1, 1, h, w});
  for (Index i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(v[static_cast<std::size_t>(i)]);
  return out;
}

template <typename T>
Tensor<T> transmission(const Tensor<T>& depth, double beta) {
  if (!(beta >= 0) || !std::isfinite(beta)) throw ValidationError("transmission: beta must be finite and >= 0");
  Tensor<T> t(depth.shape());
  for (Index i = 0; i < depth.numel(); ++i) {
    const T d = depth[i];
    if (!(d >= T{0}) || !std::isfinite(static_cast<double>(d))) {
      throw ValidationError("transmission: depth must be finite and >= 0 (found " +
                            std::to_string(static_cast<double>(d)) + " at index " + std::to_string(i) + ")");
    }
    t[i] = beta == 0 ? T{1} : static_cast<T>(std::exp(-beta * static_cast<double>(d)));
  }
  return t;
}

namespace {

template <typename T>
void check_haze_shapes(const Shape& img, const Shape& t, const char* what) {
  if (img.c != 3) throw ValidationError(std::string(what) + ": image must have 3 channels, got " + img.str());
  if (t.c != 1 || t.h != img.h || t.w != img.w || (t.n != 1 && t.n != img.n)) {
    throw ValidationError(std::string(what) + ": transmission " + t.str() + " does not match image " + img.str());
  }
}

}  // namespace

template <typename T>
Tensor<T> apply_haze(const Tensor<T>& clean, const std::array<double, 3>& A, const Tensor<T>& t) {
  check_haze_shapes<T>(clean.shape(), t.shape(), "apply_haze");
  const Shape& s = clean.shape();
  Tensor<T> out(s);
  for (Index n = 0; n < s.n; ++n) {
    const T* tp = t.plane(t.shape().n == 1 ? 0 : n, 0);
    for (Index c = 0; c < 3; ++c) {
      const T a = static_cast<T>(A[static_cast<std::size_t>(c)]);
      const T* j = clean.plane(n, c);
      T* o = out.plane(n, c);
      for (Index i = 0; i < s.plane(); ++i) o[i] = j[i] * tp[i] + a * (T{1} - tp[i]);
    }
  }
  return out;
}

template <typename T>
Tensor<T> apply_haze(const Tensor<T>& clean, const HazeParams& params) {
  const Shape& s = clean.shape();
  return apply_haze(clean, params.A, transmission(render_depth<T>(params.depth, s.h, s.w), params.beta));
}

template <typename T>
Tensor<T> invert_haze(const Tensor<T>& hazy, const std::array<double, 3>& A, const Tensor<T>& t, double t_min) {
  check_haze_shapes<T>(hazy.shape(), t.shape(), "invert_haze");
  for (Index i = 0; i < t.numel(); ++i) {
    if (!(static_cast<double>(t[i]) >= t_min)) {
      throw ValidationError("invert_haze: transmission " + std::to_string(static_cast<double>(t[i])) +
                            " below t_min " + std::to_string(t_min) + " at index " + std::to_string(i));
    }
  }
  const Shape& s = hazy.shape();
  Tensor<T> out(s);
  for (Index n = 0; n < s.n; ++n) {
    const T* tp = t.plane(t.shape().n == 1 ? 0 : n, 0);
    for (Index c = 0; c < 3; ++c) {
      const T a = static_cast<T>(A[static_cast<std::size_t>(c)]);
      const T* in = hazy.plane(n, c);
      T* o = out.plane(n, c);
      for (Index i = 0; i < s.plane(); ++i) o[i] = (in[i] - a * (T{1} - tp[i])) / tp[i];
    }
  }
  return out;
}

// --- Dataset --------------------------------------------------------------------

namespace {

std::array<float, 3> random_colour(Rng& rng) {
  return {static_cast<float>(rng.uniform(0.05, 0.95)), static_cast<float>(rng.uniform(0.05, 0.95)),
          static_cast<float>(rng.uniform(0.05, 0.95))};
}

void paint(Tensor<float>& img, Index y, Index x, const std::array<float, 3>& c) {
  for (Index k = 0; k < 3; ++k) img.at(0, k, y, x) = c[static_cast<std::size_t>(k)];
}

std::vector<std::filesystem::path> list_ppm(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("dataset: cannot read directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  if (ec) throw IoError("dataset: cannot list " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("dataset: no .ppm files in " + dir.string());
  return files;
}

Tensor<float> random_crop(const Tensor<float>& img, Index size, Rng& rng, const std::filesystem::path& src) {
  const Shape& s = img.shape();
  if (s.h < size || s.w < size) {
    throw ValidationError("dataset: " + src.string() + " is smaller than the " + std::to_string(size) + " crop");
  }
  const Index y0 = rng.uniform_int(0, s.h - size);
  const Index x0 = rng.uniform_int(0, s.w - size);
  Tensor<float> out(Shape{1, 3, size, size});
  for (Index c = 0; c < 3; ++c)
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x) out.at(0, c, y, x) = img.at(0, c, y0 + y, x0 + x);
  return out;
}

}  // namespace

Tensor<float> procedural_clean(Index size, std::uint64_t seed) {
  if (size <= 0) throw ValidationError("procedural_clean: size must be positive");
  Rng rng(seed);
  Tensor<float> img(Shape{1, 3, size, size});
  const auto c0 = random_colour(rng);
  const auto c1 = random_colour(rng);
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double fs = static_cast<double>(size);
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) {
      const double u = ((static_cast<double>(x) + 0.5) / fs - 0.5) * ca + ((static_cast<double>(y) + 0.5) / fs - 0.5) * sa;
      const float t = static_cast<float>(std::clamp(u + 0.5, 0.0, 1.0));
      for (std::size_t k = 0; k < 3; ++k) img.at(0, static_cast<Index>(k), y, x) = c0[k] * (1 - t) + c1[k] * t;
    }
  const Index shapes = rng.uniform_int(3, 7);
  for (Index s = 0; s < shapes; ++s) {
    const Index kind = rng.uniform_int(0, 2);
    const auto colour = random_colour(rng);
    if (kind == 0) {  // rectangle
      const Index rh = rng.uniform_int(std::max<Index>(1, size / 8), std::max<Index>(1, size / 2));
      const Index rw = rng.uniform_int(std::max<Index>(1, size / 8), std::max<Index>(1, size / 2));
      const Index y0 = rng.uniform_int(0, size - rh);
      const Index x0 = rng.uniform_int(0, size - rw);
      for (Index y = y0; y < y0 + rh; ++y)
        for (Index x = x0; x < x0 + rw; ++x) paint(img, y, x, colour);
    } else if (kind == 1) {  // disc
      const double r = rng.uniform(fs / 16.0, fs / 4.0);
      const double cy = rng.uniform(0.0, fs), cx = rng.uniform(0.0, fs);
      for (Index y = 0; y < size; ++y)
        for (Index x = 0; x < size; ++x) {
          const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
          if (dy * dy + dx * dx <= r * r) paint(img, y, x, colour);
        }
    } else {  // striped patch
      const auto other = random_colour(rng);
      const Index period = rng.uniform_int(4, 12);
      const bool vertical = rng.uniform() < 0.5;
      const Index rh = rng.uniform_int(std::max<Index>(1, size / 6), std::max<Index>(1, size / 2));
      const Index rw = rng.uniform_int(std::max<Index>(1, size / 6), std::max<Index>(1, size / 2));
      const Index y0 = rng.uniform_int(0, size - rh);
      const Index x0 = rng.uniform_int(0, size - rw);
      for (Index y = y0; y < y0 + rh; ++y)
        for (Index x = x0; x < x0 + rw; ++x) {
          const Index p = vertical ? x - x0 : y - y0;
          paint(img, y, x, (p % period) < period / 2 ? colour : other);
        }
    }
  }
  return img;
}

HazeParams sample_haze_params(std::uint64_t item_seed, const DatasetOptions& opt) {
  Rng rng(mix_seed(item_seed, 1));
  HazeParams p;
  for (double& a : p.A) a = rng.uniform(opt.a_min, opt.a_max);
  p.beta = rng.uniform(opt.beta_min, opt.beta_max);
  p.depth.kind = static_cast<DepthKind>(rng.uniform_int(0, 2));
  p.depth.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.depth.cx = rng.uniform(0.2, 0.8);
  p.depth.cy = rng.uniform(0.2, 0.8);
  p.depth.length_scale = rng.uniform(0.15, 0.4);
  p.depth.seed = rng.next();
  return p;
}

std::vector<HazePair> make_dataset(const DatasetOptions& opt) {
  if (opt.n < 0) throw ValidationError("dataset: n must be >= 0");
  if (opt.size <= 0 || opt.size % 4 != 0) throw ValidationError("dataset: size must be a positive multiple of 4");
  if (opt.n == 0) return {};
  std::vector<std::filesystem::path> files;
  if (!opt.clean_dir.empty()) files = list_ppm(opt.clean_dir);
  std::vector<HazePair> pairs(static_cast<std::size_t>(opt.n));
  parallel_for(opt.n, [&](Index k) {
    const std::uint64_t item_seed = mix_seed(opt.seed, static_cast<std::uint64_t>(opt.first_index + k));
    HazePair& pair = pairs[static_cast<std::size_t>(k)];
    if (files.empty()) {
      pair.clean = procedural_clean(opt.size, mix_seed(item_seed, 0));
    } else {
      const auto& src = files[static_cast<std::size_t>((opt.first_index + k) % static_cast<Index>(files.size()))];
      Rng crop_rng(mix_seed(item_seed, 2));
      pair.clean = random_crop(read_ppm(src), opt.size, crop_rng, src);
    }
    pair.params = sample_haze_params(item_seed, opt);
    pair.hazy = apply_haze(pair.clean, pair.params);
  });
  return pairs;
}

namespace {

std::string item_name(const char* prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << std::setw(5) << std::setfill('0') << i << ".ppm";
  return os.str();
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const std::vector<HazePair>& pairs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("dataset: cannot create " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("dataset: cannot write " + (dir / "manifest.txt").string());
  manifest << "# hazy clean A_r A_g A_b beta\n" << std::setprecision(17);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string hazy = item_name("hazy_", i);
    const std::string clean = item_name("clean_", i);
    write_ppm(dir / hazy, pairs[i].hazy);
    write_ppm(dir / clean, pairs[i].clean);
    const auto& p = pairs[i].params;
    manifest << hazy << ' ' << clean << ' ' << p.A[0] << ' ' << p.A[1] << ' ' << p.A[2] << ' ' << p.beta << '\n';
  }
  if (!manifest) throw IoError("dataset: manifest write failed in " + dir.string());
}

std::vector<HazePair> load_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("dataset: cannot read " + (dir / "manifest.txt").string());
  std::vector<HazePair> pairs;
  std::string line;
  Index line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string hazy, clean;
    HazePair p;
    if (!(ls >> hazy >> clean >> p.params.A[0] >> p.params.A[1] >> p.params.A[2] >> p.params.beta)) {
      throw IoError("dataset: malformed manifest line " + std::to_string(line_no) + " in " + dir.string());
    }
    p.hazy = read_ppm(dir / hazy);
    p.clean = read_ppm(dir / clean);
    if (p.hazy.shape() != p.clean.shape()) {
      throw ValidationError("dataset: " + hazy + " and " + clean + " differ in size");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

#define LKD_INSTANTIATE(T)                                                                                 \
  template Tensor<T> render_depth(const DepthField&, Index, Index);                                        \
  template Tensor<T> transmission(const Tensor<T>&, double);                                               \
  template Tensor<T> apply_haze(const Tensor<T>&, const std::array<double, 3>&, const Tensor<T>&);         \
  template Tensor<T> apply_haze(const Tensor<T>&, const HazeParams&);                                      \
  template Tensor<T> invert_haze(const Tensor<T>&, const std::array<double, 3>&, const Tensor<T>&, double);

LKD_INSTANTIATE(float)
LKD_INSTANTIATE(double)

}  // namespace lkd
