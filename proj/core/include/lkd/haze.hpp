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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lkd/tensor.hpp"

namespace lkd {

enum class DepthKind { linear_ramp, radial, smoothed_noise };

std::string depth_kind_name(DepthKind kind);

/// Procedural scene depth, rendered normalised to [0, 1].
struct DepthField {
  DepthKind kind = DepthKind::linear_ramp;
  double angle = 0.0;          // ramp direction, radians
  double cx = 0.5, cy = 0.5;   // radial centre, fractions of width / height
  double length_scale = 0.25;  // noise correlation length, fraction of the image side
  std::uint64_t seed = 0;      // noise lattice seed
};

/// [1, 1, h, w] depth map with values in [0, 1].
template <typename T>
Tensor<T> render_depth(const DepthField& field, Index h, Index w);

struct HazeParams {
  std::array<double, 3> A{1.0, 1.0, 1.0};  // atmospheric light per channel
  double beta = 1.0;                        // scattering coefficient
  DepthField depth{};
};

inline constexpr double kMinTransmission = 1e-3;

/// t = exp(-beta * d). Rejects negative (or non-finite) depth and negative beta.
template <typename T>
Tensor<T> transmission(const Tensor<T>& depth, double beta);

/// I = J t + A (1 - t). J: [N, 3, H, W]; t: [1 or N, 1, H, W].
template <typename T>
Tensor<T> apply_haze(const Tensor<T>& clean, const std::array<double, 3>& A, const Tensor<T>& t);

/// Renders params.depth at the image size and applies the scattering model.
template <typename T>
Tensor<T> apply_haze(const Tensor<T>& clean, const HazeParams& params);

/// J = (I - A (1 - t)) / t. Rejects any t below t_min.
template <typename T>
Tensor<T> invert_haze(const Tensor<T>& hazy, const std::array<double, 3>& A, const Tensor<T>& t,
                      double t_min = kMinTransmission);

struct HazePair {
  Tensor<float> hazy;   // [1, 3, S, S]
  Tensor<float> clean;  // [1, 3, S, S]
  HazeParams params;
};

struct DatasetOptions {
  Index n = 200;
  Index size = 64;
  std::uint64_t seed = 0;
  Index first_index = 0;  // item k uses the seed stream first_index + k
  double a_min = 0.7, a_max = 1.0;
  double beta_min = 0.4, beta_max = 2.0;
  std::filesystem::path clean_dir;  // empty: procedural clean images
};

/// Procedural clean image: a two-colour gradient background with random
/// rectangles, discs and stripes. [1, 3, size, size], values in [0, 1].
Tensor<float> procedural_clean(Index size, std::uint64_t seed);

/// Samples A, beta and a depth field from the item seed.
HazeParams sample_haze_params(std::uint64_t item_seed, const DatasetOptions& opt);

/// Item k depends only on (seed, first_index + k), never on generation order.
std::vector<HazePair> make_dataset(const DatasetOptions& opt);

/// Writes hazy_NNNNN.ppm / clean_NNNNN.ppm and manifest.txt into dir.
void save_dataset(const std::filesystem::path& dir, const std::vector<HazePair>& pairs);

/// Reads a directory written by save_dataset (values quantised to 8 bits).
std::vector<HazePair> load_dataset(const std::filesystem::path& dir);

}  // namespace lkd
