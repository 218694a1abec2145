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
#include <string>

#include "lkd/analysis.hpp"
#include "lkd/config.hpp"
#include "lkd/error.hpp"
#include "lkd/fusion.hpp"
#include "lkd/gradcheck.hpp"
#include "lkd/model.hpp"

namespace lkd {
namespace {

namespace fs = std::filesystem;

template <typename T>
Tensor<T> random_input(Shape s, std::uint64_t seed, double lo = 0, double hi = 1) {
  Rng rng(seed);
  Tensor<T> t(s);
  for (auto& v : t.span()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("lkd_model_test_" + name); }

LkdConfig tiny_config() {
  LkdConfig c = variant_config("desk");
  c.decomposition = {9, 3};
  return c;
}

TEST(Variants, PresetsMatchTheConfigurationTable) {
  const std::array<std::array<Index, 5>, 4> blocks{{{1, 1, 2, 1, 1}, {2, 2, 4, 2, 2}, {4, 4, 8, 4, 4}, {8, 8, 16, 8, 8}}};
  const char* names[] = {"t", "s", "b", "l"};
  for (int i = 0; i < 4; ++i) {
    const LkdConfig c = variant_config(names[i]);
    EXPECT_EQ(c.blocks, blocks[static_cast<std::size_t>(i)]) << names[i];
    EXPECT_EQ(c.dims, (std::array<Index, 5>{24, 48, 96, 48, 24}));
    EXPECT_EQ(c.mlp_ratio, (std::array<Index, 5>{4, 4, 4, 4, 4}));
  }
  EXPECT_THROW(variant_config("xl"), ValidationError);
}

TEST(Config, RejectsAsymmetricDims) {
  LkdConfig c;
  c.dims = {24, 48, 96, 48, 32};
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(Model<float>::build(c, 0), ValidationError);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  LkdConfig c = variant_config("s");
  c.use_sk_fusion = false;
  c.dlkcb_gating = DlkcbGating::multiply;
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  EXPECT_THROW(config_from_json(nlohmann::json{{"blockz", {1, 1, 1, 1, 1}}}), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"cefn_form", "sideways"}}), ValidationError);
  EXPECT_EQ(config_from_json(nlohmann::json{{"variant", "desk"}}), variant_config("desk"));
}

TEST(Model, ShapeContractAndFiniteOutput) {
  auto m = Model<float>::build(variant_config("t"), 1);
  const auto x = random_input<float>({1, 3, 64, 64}, 2);
  const auto y = m.forward(x);
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_TRUE(all_finite(y.span()));
}

TEST(Model, AllVariantsPreserveShape) {
  for (const char* v : {"t", "s", "b", "l"}) {
    auto m = Model<float>::build(variant_config(v), 0);
    const auto x = random_input<float>({1, 3, 16, 16}, 3);
    EXPECT_EQ(m.predict(x).shape(), x.shape()) << v;
  }
}

TEST(Model, RejectsIndivisibleSize) {
  auto m = Model<float>::build(tiny_config(), 0);
  EXPECT_THROW(m.forward(Tensor<float>({1, 3, 63, 63})), ValidationError);
  EXPECT_THROW(m.forward(Tensor<float>({1, 4, 64, 64})), ValidationError);
}

TEST(Model, EvalOutputIsClamped) {
  auto m = Model<float>::build(tiny_config(), 4);
  m.set_mode(Mode::eval);
  const auto y = m.forward(random_input<float>({2, 3, 16, 16}, 5, -3, 4));
  for (float v : y.span()) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
}

TEST(Model, FreshSoftReconstructionStartsNearIdentity) {
  auto m = Model<float>::build(tiny_config(), 4);
  const auto x = random_input<float>({1, 3, 16, 16}, 6, 0.2, 0.8);
  const auto y = m.predict(x);
  double err = 0;
  for (Index i = 0; i < x.numel(); ++i) err = std::max(err, std::abs(static_cast<double>(y[i] - x[i])));
  EXPECT_LT(err, 0.5);
}

TEST(Model, CountsMonotoneInVariantSize) {
  Index prev = 0;
  for (const char* v : {"t", "s", "b", "l"}) {
    const Index n = Model<float>::build(variant_config(v), 0).param_count();
    EXPECT_GT(n, prev) << v;
    prev = n;
  }
}

TEST(Model, AblationFlagsOffIsSmaller) {
  LkdConfig off = variant_config("t");
  off.use_dlk = off.use_cefn = off.use_sk_fusion = off.use_soft_recon = false;
  EXPECT_LT(Model<float>::build(off, 0).param_count(), Model<float>::build(variant_config("t"), 0).param_count());
}

TEST(Model, ParameterNamesAreUnique) {
  auto m = Model<float>::build(variant_config("t"), 0);
  auto set = m.parameters();
  std::set<std::string> names;
  for (auto* p : set.params) EXPECT_TRUE(names.insert(p->name).second) << p->name;
  for (auto& b : set.buffers) EXPECT_TRUE(names.insert(b.name).second) << b.name;
}

TEST(Model, SameSeedSameWeights) {
  auto a = Model<float>::build(tiny_config(), 9);
  auto b = Model<float>::build(tiny_config(), 9);
  auto c = Model<float>::build(tiny_config(), 10);
  const auto x = random_input<float>({1, 3, 16, 16}, 1);
  EXPECT_EQ(a.predict(x), b.predict(x));
  EXPECT_NE(a.predict(x), c.predict(x));
}

TEST(SkFusion, EqualLogitsAverage) {
  const auto a = random_input<double>({2, 3, 4, 4}, 1);
  const auto b = random_input<double>({2, 3, 4, 4}, 2);
  Tensor<double> w;
  const auto y = sk_combine(a, b, Tensor<double>({2, 6, 1, 1}), &w);
  for (Index i = 0; i < y.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], 0.5 * a[i] + 0.5 * b[i]);
  for (double v : w.span()) EXPECT_EQ(v, 0.5);
}

TEST(SkFusion, WeightsAreConvex) {
  const auto a = random_input<double>({2, 3, 4, 4}, 1);
  const auto logits = random_input<double>({2, 6, 1, 1}, 3, -20, 20);
  Tensor<double> w;
  const auto y = sk_combine(a, a, logits, &w);
  for (Index i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], a[i], 1e-15);
  for (Index n = 0; n < 2; ++n)
    for (Index c = 0; c < 3; ++c) {
      const double wa = w.at(n, c, 0, 0), wb = w.at(n, 3 + c, 0, 0);
      EXPECT_NEAR(wa + wb, 1, 1e-15);
      EXPECT_GT(wa, 0);
      EXPECT_GT(wb, 0);
    }
}

TEST(SkFusion, RejectsShapeMismatch) {
  Rng rng(0);
  SkFusion<double> f("f", 4, 8, rng);
  EXPECT_THROW(f.forward(Tensor<double>({1, 4, 4, 4}), Tensor<double>({1, 4, 2, 2})), ValidationError);
}

TEST(SoftReconstruction, IdentityAndPurePrediction) {
  const auto image = random_input<double>({1, 3, 4, 4}, 1);
  Tensor<double> head({1, 4, 4, 4});
  for (Index i = 0; i < 16; ++i) head.plane(0, 0)[i] = 1;
  EXPECT_EQ(soft_reconstruction(head, image), image);
  const auto bias = random_input<double>({1, 4, 4, 4}, 2);
  Tensor<double> zero_gain = bias;
  for (Index i = 0; i < 16; ++i) zero_gain.plane(0, 0)[i] = 0;
  const auto y = soft_reconstruction(zero_gain, image);
  EXPECT_EQ(slice_channels(y, 0, 3), slice_channels(bias, 1, 3));
  EXPECT_THROW(soft_reconstruction(Tensor<double>({1, 3, 4, 4}), image), ValidationError);
}

TEST(Taps, NamesRoundTrip) {
  for (Tap t : {Tap::bottleneck, Tap::pre_head, Tap::output}) EXPECT_EQ(parse_tap(tap_name(t)), t);
  EXPECT_THROW(parse_tap("middle"), ValidationError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto m = Model<float>::build(tiny_config(), 3);
  // one training-mode pass so the running statistics differ from their init
  m.forward(random_input<float>({2, 3, 16, 16}, 4));
  const fs::path path = temp_path("roundtrip.ckpt");
  m.save(path);
  auto loaded = Model<float>::load(path);
  EXPECT_EQ(loaded.config(), m.config());
  const auto x = random_input<float>({1, 3, 16, 16}, 5);
  EXPECT_EQ(loaded.predict(x), m.predict(x));
  auto a = m.parameters();
  auto b = loaded.parameters();
  ASSERT_EQ(a.buffers.size(), b.buffers.size());
  for (std::size_t i = 0; i < a.buffers.size(); ++i) EXPECT_EQ(*a.buffers[i].value, *b.buffers[i].value);
  fs::remove(path);
}

TEST(Checkpoint, ParamCountMatchesPayload) {
  auto m = Model<float>::build(variant_config("t"), 0);
  const fs::path path = temp_path("count.ckpt");
  m.save(path);
  EXPECT_EQ(checkpoint_param_count(path), m.param_count());
  EXPECT_EQ(checkpoint_param_count(path), count_costs(m, 64, 64).total_params);
  // 4 bytes per scalar plus headers and the small buffers
  const auto bytes = static_cast<double>(fs::file_size(path));
  EXPECT_GT(bytes, 4.0 * m.param_count());
  EXPECT_LT(bytes, 4.0 * m.param_count() * 1.2);
  EXPECT_EQ(checkpoint_config(path), m.config());
  fs::remove(path);
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  auto m = Model<float>::build(tiny_config(), 0);
  const fs::path path = temp_path("trunc.ckpt");
  m.save(path);
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 17);
  EXPECT_THROW(Model<float>::load(path), IoError);
  fs::resize_file(path, 20);
  EXPECT_THROW(Model<float>::load(path), IoError);
  fs::remove(path);
  EXPECT_THROW(Model<float>::load(path), IoError);
}

TEST(Checkpoint, NameMismatchListsMissingAndExtra) {
  auto m = Model<float>::build(tiny_config(), 0);
  const fs::path path = temp_path("names.ckpt");
  m.save(path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = bytes.find("param head.weight");
  ASSERT_NE(pos, std::string::npos);
  bytes.replace(pos, 17, "param head.wrongs");
  std::ofstream(path, std::ios::binary) << bytes;
  try {
    Model<float>::load(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("head.weight"), std::string::npos) << msg;
    EXPECT_NE(msg.find("head.wrongs"), std::string::npos) << msg;
  }
  fs::remove(path);
}

TEST(Checkpoint, BadMagicIsRejected) {
  const fs::path path = temp_path("magic.ckpt");
  std::ofstream(path) << "NOTACKPT 1\n{}\n";
  EXPECT_THROW(Model<float>::load(path), IoError);
  fs::remove(path);
}

class ModelGradients : public ::testing::TestWithParam<std::string> {};

TEST_P(ModelGradients, CentralDifferencesAgree) {
  const GradCheckResult r = run_gradcheck(GetParam());
  EXPECT_GE(r.seeds, 5);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_TRUE(r.passed);
  if (GetParam().find("_train") == std::string::npos) EXPECT_TRUE(r.excluded.empty());
}

INSTANTIATE_TEST_SUITE_P(Suite, ModelGradients,
                         ::testing::Values("sk_fusion", "concat_fusion", "upsample", "soft_reconstruction",
                                           "model_tiny", "model_tiny_train"),
                         [](const auto& info) { return info.param; });

}  // namespace
}  // namespace lkd
