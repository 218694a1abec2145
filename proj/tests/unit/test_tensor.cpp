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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lkd/error.hpp"
#include "lkd/parallel.hpp"
#include "lkd/rng.hpp"
#include "lkd/tensor.hpp"
#include "lkd/tensor_io.hpp"

namespace lkd {
namespace {

namespace fs = std::filesystem;

TEST(Shape, NumelAndString) {
  const Shape s{2, 3, 4, 5};
  EXPECT_EQ(s.numel(), 120);
  EXPECT_EQ(s.plane(), 20);
  EXPECT_EQ(s.str(), "[2, 3, 4, 5]");
}

TEST(Tensor, RowMajorOffsets) {
  Tensor<float> t({2, 3, 4, 5});
  EXPECT_EQ(t.offset(0, 0, 0, 1), 1);
  EXPECT_EQ(t.offset(0, 0, 1, 0), 5);
  EXPECT_EQ(t.offset(0, 1, 0, 0), 20);
  EXPECT_EQ(t.offset(1, 0, 0, 0), 60);
  t.at(1, 2, 3, 4) = 7.f;
  EXPECT_EQ(t[119], 7.f);
  EXPECT_EQ(t.plane(1, 2)[19], 7.f);
}

TEST(Tensor, DataSizeMustMatchShape) {
  EXPECT_THROW(Tensor<float>(Shape{1, 1, 2, 2}, std::vector<float>(3)), ValidationError);
}

TEST(Elementwise, BroadcastsPerChannelVectors) {
  Tensor<double> a({2, 2, 1, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor<double> b({1, 2, 1, 1}, {10, 100});
  const auto r = add(a, b);
  EXPECT_EQ(r.span()[0], 11);
  EXPECT_EQ(r.span()[2], 103);
  EXPECT_EQ(r.span()[4], 15);
  EXPECT_EQ(r.span()[7], 108);
  Tensor<double> bad({1, 3, 1, 1});
  EXPECT_THROW(add(a, bad), ValidationError);
}

TEST(Reduce, SpatialAndBatch) {
  Tensor<double> x({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const auto s = reduce(ReduceKind::sum, x, ReduceAxes::spatial);
  EXPECT_EQ(s.shape(), (Shape{2, 1, 1, 1}));
  EXPECT_EQ(s[0], 10);
  EXPECT_EQ(s[1], 26);
  const auto m = reduce(ReduceKind::mean, x, ReduceAxes::batch_spatial);
  EXPECT_EQ(m.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(m[0], 4.5);
}

TEST(Channels, ConcatThenSliceRoundTrips) {
  Tensor<float> a({1, 2, 2, 2}, 1.f), b({1, 3, 2, 2}, 2.f);
  const auto c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{1, 5, 2, 2}));
  EXPECT_EQ(slice_channels(c, 0, 2), a);
  EXPECT_EQ(slice_channels(c, 2, 3), b);
  EXPECT_THROW(slice_channels(c, 4, 2), ValidationError);
}

TEST(Parameter, GradAccumulatesAcrossConsumers) {
  Parameter<double> p("w", Tensor<double>({1, 1, 1, 2}, {1, 2}));
  accumulate_grad(p, Tensor<double>({1, 1, 1, 2}, {0.5, 1}));
  accumulate_grad(p, Tensor<double>({1, 1, 1, 2}, {0.25, -1}));
  EXPECT_EQ(p.grad[0], 0.75);
  EXPECT_EQ(p.grad[1], 0);
  p.zero_grad();
  EXPECT_EQ(p.grad[0], 0);
}

TEST(Finite, DetectsNanAndInf) {
  std::vector<float> v{1.f, 2.f};
  EXPECT_TRUE(all_finite(std::span<const float>(v)));
  v[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_FALSE(all_finite(std::span<const float>(v)));
  std::vector<double> d{std::numeric_limits<double>::infinity()};
  EXPECT_FALSE(all_finite(std::span<const double>(d)));
}

TEST(TensorIo, RoundTripIsBitExact) {
  Rng rng(4);
  Tensor<double> t({2, 3, 4, 5});
  for (auto& v : t.span()) v = rng.normal();
  std::stringstream ss;
  write_tensor(ss, t);
  EXPECT_EQ(ss.str().size(), kTensorHeaderBytes + 120 * 8);
  EXPECT_EQ(read_tensor<double>(ss), t);
}

TEST(TensorIo, ConvertsDtypeOnRead) {
  Tensor<float> t({1, 1, 1, 3}, {0.5f, -1.f, 2.f});
  std::stringstream ss;
  write_tensor(ss, t);
  const auto d = read_tensor<double>(ss);
  EXPECT_EQ(d[0], 0.5);
  EXPECT_EQ(d[2], 2.0);
}

TEST(TensorIo, HeaderOnlyReadSkipsPayload) {
  Tensor<float> a({1, 2, 3, 4}, 1.f), b({1, 1, 1, 1}, 9.f);
  std::stringstream ss;
  write_tensor(ss, a);
  write_tensor(ss, b);
  const TensorHeader h = read_tensor_header(ss);
  EXPECT_EQ(h.shape, a.shape());
  EXPECT_EQ(h.payload_bytes(), 24u * 4u);
  EXPECT_EQ(read_tensor<float>(ss), b);
}

TEST(TensorIo, RejectsTruncatedAndForeignFiles) {
  Tensor<float> t({1, 1, 4, 4}, 3.f);
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string full = ss.str();
  std::stringstream truncated(full.substr(0, full.size() - 5));
  EXPECT_THROW(read_tensor<float>(truncated), IoError);
  std::stringstream header_only(full.substr(0, 10));
  EXPECT_THROW(read_tensor<float>(header_only), IoError);
  std::stringstream foreign("NOPE" + full.substr(4));
  EXPECT_THROW(read_tensor<float>(foreign), IoError);
}

TEST(TensorIo, FileHelpers) {
  const fs::path path = fs::temp_directory_path() / "lkd_tensor_io_test.lkdt";
  Tensor<float> t({1, 2, 1, 2}, {1, 2, 3, 4});
  save_tensor(path, t);
  EXPECT_EQ(load_tensor<float>(path), t);
  fs::remove(path);
  EXPECT_THROW(load_tensor<float>(path), IoError);
}

TEST(Rng, SeededStreamsRepeat) {
  Rng a(11), b(11), c(12);
  for (int i = 0; i < 5; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}

TEST(Parallel, CoversEveryIndexOnce) {
  set_num_threads(4);
  std::vector<std::atomic<int>> hits(103);
  parallel_for(103, [&](std::int64_t i) { hits[static_cast<std::size_t>(i)]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  set_num_threads(1);
}

TEST(Parallel, PropagatesWorkerExceptions) {
  set_num_threads(3);
  EXPECT_THROW(parallel_for(9, [](std::int64_t i) {
                 if (i == 7) throw ValidationError("boom");
               }),
               ValidationError);
  set_num_threads(1);
}

}  // namespace
}  // namespace lkd
