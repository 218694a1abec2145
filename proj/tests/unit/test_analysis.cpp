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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "lkd/analysis.hpp"
#include "lkd/error.hpp"
#include "lkd/tensor_io.hpp"

namespace lkd {
namespace {

namespace fs = std::filesystem;

TEST(Formulas, PrintedEquationValues) {
  EXPECT_EQ(eval_eq3(13, 3, 1), 50);
  EXPECT_EQ(eval_eq3(21, 3, 24), 28824);
  EXPECT_EQ(eval_eq4(13, 3, 1, 4, 4), 800);
}

TEST(Formulas, ExactCounts) {
  EXPECT_EQ(direct_dw_count(21, 24), 10584);
  EXPECT_EQ(decomposed_count(21, 3, 24) - 24 * 24, 1776);
  EXPECT_LT(decomposed_count(21, 3, 24) - 24 * 24, direct_dw_count(21, 24));
}

TEST(Formulas, ReportShowsTheDiscrepancy) {
  const FormulaReport r = formula_report(21, 3, 24);
  EXPECT_EQ(r.eq3, 28824);
  EXPECT_EQ(r.legs, 1776);
  EXPECT_EQ(r.decomposed, 2352);
  EXPECT_EQ(r.direct, 10584);
  const std::string text = r.text();
  EXPECT_NE(text.find("28824"), std::string::npos);
  EXPECT_NE(text.find("2352"), std::string::npos);
  EXPECT_NE(text.find("discrepancy"), std::string::npos);
  EXPECT_NE(text.find(std::to_string(28824 - 2352)), std::string::npos);
}

TEST(Comparison, GapGrowsWithKernelSize) {
  const auto rows = compare_direct_vs_decomposed({7, 13, 21, 31}, 3, 24);
  ASSERT_EQ(rows.size(), 4u);
  Index prev_gap = -1;
  for (const auto& r : rows) {
    EXPECT_EQ(r.direct, 24 * r.K * r.K);
    const Index gap = r.direct - r.legs;
    EXPECT_GT(gap, prev_gap) << r.K;
    prev_gap = gap;
  }
  const std::string csv = comparison_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "K,d,C,direct_dw,decomposed_legs,decomposed_with_pointwise,eq3,gap_direct_minus_legs");
}

// Independent oracle: the composed support is the Minkowski sum of the two
// legs' tap offsets. With "same" padding, tap j of a k-tap leg with dilation d
// sits at j d - d (k - 1) / 2.
std::vector<Index> taps(Index k, Index d) {
  std::vector<Index> out;
  for (Index j = 0; j < k; ++j) out.push_back(j * d - d * (k - 1) / 2);
  return out;
}

std::set<std::pair<Index, Index>> minkowski(const Decomposition& d) {
  std::set<std::pair<Index, Index>> out;
  const auto small = taps(d.k_small(), 1), dilated = taps(d.k_dilated(), d.dilation);
  for (Index a : small)
    for (Index b : small)
      for (Index c : dilated)
        for (Index e : dilated) out.insert({a + c, b + e});
  return out;
}

TEST(Footprint, MatchesSetSumOracle) {
  for (Index K : {5, 7, 9, 13, 21, 31}) {
    for (Index d : {1, 2, 3, 4}) {
      const Decomposition dec{K, d};
      if ((d * (dec.k_dilated() - 1) + 1) % 2 == 0) continue;
      const Footprint f = footprint(dec);
      const auto oracle = minkowski(dec);
      Index count = 0;
      const Index half = f.extent / 2;
      for (Index y = -half; y <= half; ++y)
        for (Index x = -half; x <= half; ++x) {
          EXPECT_EQ(f.contains(y, x), oracle.contains({y, x})) << K << "," << d << " @ " << y << "," << x;
          count += f.contains(y, x);
        }
      EXPECT_EQ(count, static_cast<Index>(oracle.size()));
      EXPECT_EQ(f.holes, f.extent * f.extent - count);
    }
  }
}

TEST(Footprint, PaperDecompositions) {
  const Footprint f21 = footprint({21, 3});
  EXPECT_EQ(f21.extent, 23);
  EXPECT_EQ(f21.holes, 0);
  EXPECT_TRUE(f21.covers_target);
  EXPECT_EQ(f21.summary(), "legs 5×5 + 7×7(d=3), extent 23, holes 0, covers 21: yes");
  const Footprint f13 = footprint({13, 3});
  EXPECT_EQ(f13.extent, 17);
  EXPECT_EQ(f13.summary(), "legs 5×5 + 5×5(d=3), extent 17, holes 0, covers 13: yes");
}

TEST(Footprint, UnitDilationIsExactlyTheKernel) {
  const Footprint f = footprint({9, 1});
  EXPECT_EQ(f.extent, 9);
  EXPECT_EQ(f.holes, 0);
  EXPECT_TRUE(f.covers_target);
}

TEST(Footprint, SymmetricUnderRotationAndReflection) {
  const Footprint f = footprint({21, 4});
  const Index h = f.extent / 2;
  for (Index y = -h; y <= h; ++y)
    for (Index x = -h; x <= h; ++x) {
      EXPECT_EQ(f.contains(y, x), f.contains(x, -y));
      EXPECT_EQ(f.contains(y, x), f.contains(-y, x));
      EXPECT_EQ(f.contains(y, x), f.contains(x, y));
    }
}

TEST(AreaRatio, UniformMapGivesT) {
  Tensor<double> map({1, 1, 10, 10}, 1.0);
  for (double t : {0.2, 0.3, 0.5, 0.99, 1.0}) EXPECT_NEAR(area_ratio(map, t), std::ceil(t * 100) / 100, 1e-12) << t;
}

TEST(AreaRatio, PointMass) {
  Tensor<double> map({1, 1, 8, 8});
  map[27] = 3;
  for (double t : {0.2, 0.5, 0.99, 1.0}) EXPECT_DOUBLE_EQ(area_ratio(map, t), 1.0 / 64);
}

TEST(AreaRatio, RejectsZeroMass) {
  EXPECT_THROW(area_ratio(Tensor<double>({1, 1, 4, 4}), 0.5), ValidationError);
}

TEST(Costs, OneByOneConvExample) {
  Rng rng(0);
  Conv2d<float> conv("c", ConvSpec::pointwise(3, 3, true), rng);
  std::vector<LayerCost> rows;
  conv.costs(rows, 4, 4);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].params, 12);
  EXPECT_EQ(rows[0].macs, 144);
}

TEST(Costs, TotalsEqualRowSumsAndCsvShape) {
  const auto m = Model<float>::build(variant_config("t"), 0);
  const CostReport r = count_costs(m, 256, 256);
  Index p = 0, macs = 0;
  for (const auto& row : r.rows) {
    p += row.params;
    macs += row.macs;
  }
  EXPECT_EQ(r.total_params, p);
  EXPECT_EQ(r.total_macs, macs);
  EXPECT_EQ(r.total_flops(), 2 * macs);
  EXPECT_EQ(r.total_params, m.param_count());
  const std::string csv = r.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "name,kind,params,macs,flops");
  EXPECT_NE(csv.find("total,," + std::to_string(p) + "," + std::to_string(macs)), std::string::npos);
}

TEST(Costs, VariantsNearTheReportedCounts) {
  const std::pair<const char*, double> want[] = {{"t", 0.343e6}, {"s", 0.634e6}, {"b", 1.216e6}, {"l", 2.38e6}};
  for (const auto& [v, n] : want) {
    const Index got = Model<float>::build(variant_config(v), 0).param_count();
    EXPECT_NEAR(static_cast<double>(got) / n, 1.0, 0.05) << v;
  }
}

ErfReport tiny_erf(Tap tap) {
  LkdConfig c = variant_config("desk");
  c.decomposition = {9, 3};
  const auto m = Model<float>::build(c, 1);
  ErfOptions o;
  o.samples = 3;
  o.size = 32;
  o.seed = 4;
  o.tap = tap;
  return erf_probe(m, o, "tiny");
}

TEST(Erf, MapAndTableInvariants) {
  for (Tap tap : {Tap::bottleneck, Tap::pre_head, Tap::output}) {
    const ErfReport r = tiny_erf(tap);
    EXPECT_EQ(r.map.shape(), (Shape{1, 1, 32, 32}));
    for (double v : r.map.span()) EXPECT_GE(v, 0);
    ASSERT_EQ(r.r_table.size(), 4u);
    double prev = 0;
    for (const auto& [t, ratio] : r.r_table) {
      EXPECT_GT(ratio, 0);
      EXPECT_LE(ratio, 1);
      EXPECT_GE(ratio, prev);
      prev = ratio;
    }
    EXPECT_EQ(r.tap, tap_name(tap));
  }
}

TEST(Erf, DeterministicForASeed) {
  const ErfReport a = tiny_erf(Tap::pre_head);
  const ErfReport b = tiny_erf(Tap::pre_head);
  EXPECT_EQ(a.map, b.map);
  EXPECT_EQ(a.r_table, b.r_table);
}

TEST(Erf, RejectsSizesNotDivisibleByFour) {
  const auto m = Model<float>::build(variant_config("desk"), 0);
  ErfOptions o;
  o.size = 30;
  EXPECT_THROW(erf_probe(m, o), ValidationError);
}

TEST(Erf, WritesTensorHeatImageAndTable) {
  const ErfReport r = tiny_erf(Tap::pre_head);
  const fs::path prefix = fs::temp_directory_path() / "lkd_erf_test";
  write_erf(r, prefix);
  EXPECT_EQ(load_tensor<double>(prefix.string() + ".lkdt"), r.map);
  EXPECT_TRUE(fs::exists(prefix.string() + ".ppm"));
  std::ifstream in(prefix.string() + "_r.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), r.r_table_text());
  const auto lg = log_normalised(r.map);
  for (double v : lg.span()) {
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 1);
  }
  for (const char* ext : {".lkdt", ".ppm", "_r.txt"}) fs::remove(prefix.string() + ext);
}

}  // namespace
}  // namespace lkd
