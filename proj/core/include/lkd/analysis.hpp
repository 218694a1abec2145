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
#include <string>
#include <utility>
#include <vector>

#include "lkd/model.hpp"

namespace lkd {

// --- Parameter formulae ---------------------------------------------------------

/// P(K, d) = C (ceil(K/d)^2 C + (2d - 1)^2), evaluated exactly as printed.
Index eval_eq3(Index K, Index d, Index C);
/// F(K, d) = P(K, d) H W.
Index eval_eq4(Index K, Index d, Index C, Index H, Index W);
/// C (ceil(K/d)^2 + (2d - 1)^2 + C): both depth-wise legs plus one C x C
/// pointwise conv, no biases. This is what the constructed layers hold.
Index decomposed_count(Index K, Index d, Index C);
/// C K^2: one direct K x K depth-wise conv, no bias.
Index direct_dw_count(Index K, Index C);

/// Side-by-side values of the printed formula and the exact counts.
struct FormulaReport {
  Index K = 0, d = 0, C = 0, H = 0, W = 0;
  Index eq3 = 0;
  Index eq4 = 0;
  Index legs = 0;          // both depth-wise legs, no bias
  Index decomposed = 0;    // legs + one pointwise conv, no bias
  Index dlkcb_branch = 0;  // the full block as built here (norm, two pointwise convs with biases, scale)
  Index direct = 0;
  std::string text() const;
};

FormulaReport formula_report(Index K, Index d, Index C, Index H = 1, Index W = 1);

// --- Cost accounting ------------------------------------------------------------

struct CostReport {
  Index h = 0, w = 0;
  std::vector<LayerCost> rows;
  Index total_params = 0;
  Index total_macs = 0;
  Index total_flops() const { return 2 * total_macs; }
  /// name,kind,params,macs,flops rows followed by a "total" row.
  std::string csv() const;
};

template <typename T>
CostReport count_costs(const Model<T>& model, Index h, Index w);

/// Rows for the direct-vs-decomposed comparison over a sweep of kernel sizes.
struct ComparisonRow {
  Index K = 0, d = 0, C = 0;
  Index direct = 0;
  Index legs = 0;
  Index decomposed = 0;
  Index eq3 = 0;
};

std::vector<ComparisonRow> compare_direct_vs_decomposed(const std::vector<Index>& kernels, Index d, Index C);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

// --- Footprint --------------------------------------------------------------------

/// Support of the impulse response of DW k_small followed by DW k_dilated
/// with dilation d, obtained by convolving indicator kernels.
struct Footprint {
  Decomposition decomposition{};
  Index extent = 0;           // side of the bounding box of the support
  Index holes = 0;            // zeros inside the bounding box
  bool covers_target = false; // the centred K x K square lies inside the support
  std::vector<std::uint8_t> mask;  // extent x extent, row-major
  bool contains(Index dy, Index dx) const;  // offsets relative to the centre
  std::string summary() const;
};

Footprint footprint(const Decomposition& decomposition);

// --- Effective receptive field ------------------------------------------------

struct ErfOptions {
  Index samples = 16;
  Index size = 64;
  std::uint64_t seed = 0;
  Tap tap = Tap::pre_head;
  std::vector<double> thresholds{0.2, 0.3, 0.5, 0.99};
};

struct ErfReport {
  Tensor<double> map;  // [1, 1, H, W], summed |gradient|
  std::vector<std::pair<double, double>> r_table;  // (t, r(t))
  Index samples = 0;
  std::uint64_t seed = 0;
  std::string tap;
  std::string model_id;
  std::string r_table_text() const;
};

/// Smallest fraction of pixels, taken in descending order, whose mass reaches
/// t of the total. Rejects maps with zero (or non-finite) mass.
double area_ratio(const Tensor<double>& map, double t);

ErfReport erf_probe(const Model<float>& model, const ErfOptions& opt, std::string model_id = "model");

/// Log-scaled map normalised to [0, 1], [1, 1, H, W].
Tensor<double> log_normalised(const Tensor<double>& map);

/// Writes <prefix>.lkdt (raw map), <prefix>.ppm (heat image) and <prefix>_r.txt.
void write_erf(const ErfReport& report, const std::filesystem::path& prefix);

}  // namespace lkd
