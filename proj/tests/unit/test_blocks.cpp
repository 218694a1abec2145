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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lkd/blocks.hpp"
#include "lkd/error.hpp"
#include "lkd/gradcheck.hpp"

namespace lkd {
namespace {

Tensor<double> random_input(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t(s);
  for (auto& v : t.span()) v = rng.uniform(-1, 1);
  return t;
}

void set_all(Tensor<double>& t, double v) { t.fill(v); }

void zero_params(ParamSet<double>& set, const std::string& part) {
  for (auto* p : set.params) {
    if (p->name.find(part) != std::string::npos) p->value.fill(0);
  }
}

TEST(Decomposition, DerivedLegs) {
  const Decomposition d21{21, 3};
  EXPECT_EQ(d21.k_small(), 5);
  EXPECT_EQ(d21.k_dilated(), 7);
  EXPECT_EQ(d21.composed_extent(), 23);
  const Decomposition d13{13, 3};
  EXPECT_EQ(d13.k_dilated(), 5);
  EXPECT_EQ(d13.composed_extent(), 17);
  const Decomposition d1{9, 1};
  EXPECT_EQ(d1.k_small(), 1);
  EXPECT_EQ(d1.k_dilated(), 9);
  for (Index K : {5, 7, 9, 13, 21, 31}) {
    for (Index d : {1, 2, 3, 4}) {
      const Decomposition dec{K, d};
      EXPECT_GE(dec.k_small(), d);
      EXPECT_GE(dec.composed_extent(), K);
    }
  }
}

TEST(Decomposition, RejectsEvenKernelAndZeroDilation) {
  EXPECT_THROW((Decomposition{20, 3}.validate()), ValidationError);
  EXPECT_THROW((Decomposition{21, 0}.validate()), ValidationError);
  EXPECT_NO_THROW((Decomposition{21, 3}.validate()));
}

TEST(Dlkcb, ZeroWeightsGiveIdentity) {
  Rng rng(1);
  Dlkcb<double> b("b", 6, BlockOptions{}, rng);
  ParamSet<double> set;
  b.collect(set);
  zero_params(set, "pw_out");
  const auto x = random_input({2, 6, 8, 8}, 2);
  EXPECT_EQ(b.forward(x, Mode::train), x);
}

TEST(Dlkcb, ZeroScaleGivesIdentity) {
  Rng rng(1);
  BlockOptions o;
  o.scale_init = 0;
  Dlkcb<double> b("b", 6, o, rng);
  const auto x = random_input({1, 6, 8, 8}, 3);
  EXPECT_EQ(b.forward(x, Mode::train), x);
  EXPECT_EQ(b.forward(x, Mode::eval), x);
}

TEST(Dlkcb, ImpulseResponseIsDense23x23) {
  Rng rng(1);
  BlockOptions o;
  o.scale_init = 1;
  Dlkcb<double> b("b", 1, o, rng);
  b.norm().running_var().fill(1 - kBatchNormEps);
  set_all(b.pw_in().weight().value, 1);
  set_all(b.pw_in().bias().value, 0);
  set_all(b.pw_out().weight().value, 1);
  set_all(b.pw_out().bias().value, 0);
  for (auto& leg : b.legs()) {
    set_all(leg.weight().value, 1);
    set_all(leg.bias().value, 0);
  }
  Tensor<double> x({1, 1, 31, 31});
  x.at(0, 0, 15, 15) = 1;
  const auto branch = sub(b.forward(x, Mode::eval), x);
  Index lo = 31, hi = -1, nonzero = 0;
  for (Index y = 0; y < 31; ++y)
    for (Index xx = 0; xx < 31; ++xx)
      if (branch.at(0, 0, y, xx) != 0) {
        ++nonzero;
        lo = std::min({lo, y, xx});
        hi = std::max({hi, y, xx});
      }
  EXPECT_EQ(hi - lo + 1, 23);
  EXPECT_EQ(nonzero, 23 * 23);
}

TEST(Dlkcb, BranchParameterCount) {
  Rng rng(0);
  Dlkcb<float> b("b", 24, BlockOptions{}, rng);
  std::vector<LayerCost> rows;
  b.costs(rows, 1, 1);
  Index total = 0;
  for (const auto& r : rows) total += r.params;
  // BN 2C, PW_in C^2 + C, legs C(25 + 49) + 2C, PW_out C^2 + C, scale C
  EXPECT_EQ(total, 48 + 600 + 24 * 74 + 48 + 600 + 24);
  EXPECT_EQ(total, 3096);
}

TEST(Dlkcb, PlainKernelAblationHasOneLeg) {
  Rng rng(0);
  BlockOptions o;
  o.use_dlk = false;
  o.plain_kernel = 9;
  Dlkcb<float> b("b", 4, o, rng);
  ASSERT_EQ(b.legs().size(), 1u);
  EXPECT_EQ(b.legs()[0].spec().kernel, (Pair{9, 9}));
  o.plain_kernel = 8;
  EXPECT_THROW(Dlkcb<float>("b", 4, o, rng), ValidationError);
}

TEST(Dlkcb, RejectsChannelMismatch) {
  Rng rng(0);
  Dlkcb<double> b("b", 4, BlockOptions{}, rng);
  EXPECT_THROW(b.forward(Tensor<double>({1, 5, 8, 8}), Mode::train), ValidationError);
}

TEST(ChannelAttention, ZeroMlpGivesOneHalf) {
  Rng rng(0);
  ChannelAttention<double> ca("ca", 16, 8, rng);
  ParamSet<double> set;
  ca.collect(set);
  for (auto* p : set.params) p->value.fill(0);
  const auto g = ca.forward(random_input({2, 16, 4, 4}, 1));
  EXPECT_EQ(g.shape(), (Shape{2, 16, 1, 1}));
  for (double v : g.span()) EXPECT_EQ(v, 0.5);
}

TEST(ChannelAttention, OutputInOpenUnitInterval) {
  Rng rng(5);
  ChannelAttention<double> ca("ca", 8, 8, rng);
  auto x = random_input({3, 8, 5, 5}, 6);
  for (auto& v : x.span()) v *= 5;
  const auto gate = ca.forward(x);
  for (double v : gate.span()) {
    EXPECT_GT(v, 0);
    EXPECT_LT(v, 1);
  }
}

TEST(ChannelAttention, SmallChannelCountsKeepOneHiddenUnit) {
  Rng rng(0);
  ChannelAttention<double> ca("ca", 4, 8, rng);
  EXPECT_GE(ca.hidden(), 1);
}

TEST(ChannelAttention, InvariantToPixelPermutation) {
  Rng rng(7);
  ChannelAttention<double> ca("ca", 8, 8, rng);
  const auto x = random_input({1, 8, 4, 4}, 8);
  Tensor<double> flipped(x.shape());
  for (Index c = 0; c < 8; ++c)
    for (Index i = 0; i < 16; ++i) flipped.plane(0, c)[i] = x.plane(0, c)[(i * 5 + 3) % 16];
  const auto a = ca.forward(x);
  const auto b = ca.forward(flipped);
  for (Index i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Cefn, ZeroScaleGivesIdentity) {
  Rng rng(0);
  BlockOptions o;
  o.scale_init = 0;
  Cefn<double> c("c", 8, o, rng);
  const auto x = random_input({2, 8, 6, 6}, 1);
  EXPECT_EQ(c.forward(x, Mode::train), x);
}

TEST(Cefn, ZeroFeedForwardGivesIdentity) {
  Rng rng(0);
  BlockOptions o;
  o.scale_init = 1;
  Cefn<double> c("c", 8, o, rng);
  c.reduce().weight().value.fill(0);
  c.reduce().bias().value.fill(0);
  const auto x = random_input({2, 8, 6, 6}, 1);
  EXPECT_EQ(c.forward(x, Mode::eval), x);
  EXPECT_EQ(c.forward(x, Mode::train), x);
}

TEST(Cefn, LiteralFormNeedsAttention) {
  Rng rng(0);
  BlockOptions o;
  o.cefn_form = CefnForm::literal;
  o.use_cefn = false;
  EXPECT_THROW(Cefn<double>("c", 8, o, rng), ValidationError);
}

TEST(LkdBlock, ShapeContract) {
  Rng rng(0);
  LkdBlock<float> b("blk", 24, BlockOptions{}, rng);
  Tensor<float> x({1, 24, 16, 16}, 0.25f);
  EXPECT_EQ(b.forward(x, Mode::train).shape(), x.shape());
  EXPECT_EQ(b.forward(x, Mode::eval).shape(), x.shape());
}

TEST(LkdBlock, ZeroScalesGiveIdentity) {
  Rng rng(0);
  BlockOptions o;
  o.scale_init = 0;
  for (auto form : {CefnForm::standard}) {
    o.cefn_form = form;
    LkdBlock<double> b("blk", 8, o, rng);
    const auto x = random_input({2, 8, 8, 8}, 4);
    EXPECT_EQ(b.forward(x, Mode::train), x);
  }
}

TEST(LkdBlock, GradientReachesEveryParameter) {
  Rng rng(3);
  BlockOptions o;
  o.scale_init = 0.5;
  LkdBlock<double> b("blk", 8, o, rng);
  ParamSet<double> set;
  b.collect(set);
  const auto x = random_input({2, 8, 8, 8}, 5);
  b.forward(x, Mode::eval);
  b.backward(random_input(x.shape(), 6));
  for (auto* p : set.params) {
    const double mass = std::accumulate(p->grad.span().begin(), p->grad.span().end(), 0.0,
                                        [](double a, double v) { return a + std::abs(v); });
    EXPECT_GT(mass, 0) << p->name;
  }
}

TEST(LkdBlock, TrainModeNormCancelsThePrecedingBias) {
  // A per-channel shift right before a batch-statistics norm cannot change the
  // output, so its exact gradient is zero. With one sample the channel gate is
  // constant per channel, so the gated shift still is one.
  Rng rng(3);
  BlockOptions o;
  o.scale_init = 0.5;
  LkdBlock<double> b("blk", 8, o, rng);
  ParamSet<double> set;
  b.collect(set);
  const auto x = random_input({1, 8, 8, 8}, 5);
  b.forward(x, Mode::train);
  b.backward(random_input(x.shape(), 6));
  const auto& g = b.cefn().reduce().bias().grad;
  const auto& w = b.cefn().reduce().weight().grad;
  const double wmax = std::abs(*std::max_element(w.span().begin(), w.span().end(),
                                                 [](double a, double c) { return std::abs(a) < std::abs(c); }));
  for (double v : g.span()) EXPECT_LT(std::abs(v), 1e-12 * std::max(1.0, wmax));
}

class BlockGradients : public ::testing::TestWithParam<std::string> {};

TEST_P(BlockGradients, CentralDifferencesAgree) {
  const GradCheckResult r = run_gradcheck(GetParam());
  EXPECT_GE(r.seeds, 5);
  EXPECT_GT(r.checked, 0);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_TRUE(r.passed);
  // Eval-mode runs cover every parameter.
  if (GetParam().find("_train") == std::string::npos) EXPECT_TRUE(r.excluded.empty());
}

INSTANTIATE_TEST_SUITE_P(Suite, BlockGradients,
                         ::testing::Values("channel_attention", "cefn", "cefn_train", "cefn_literal",
                                           "cefn_literal_train", "fn_plain", "fn_plain_train", "dlkcb",
                                           "dlkcb_train", "dlkcb_multiply", "dlkcb_multiply_train",
                                           "dlkcb_plain_kernel", "dlkcb_plain_kernel_train", "lkd_block",
                                           "lkd_block_train"),
                         [](const auto& info) { return info.param; });

}  // namespace
}  // namespace lkd
