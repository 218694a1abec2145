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

#include <benchmark/benchmark.h>

#include "lkd/analysis.hpp"
#include "lkd/config.hpp"
#include "lkd/model.hpp"
#include "lkd/ops.hpp"
#include "lkd/parallel.hpp"
#include "lkd/rng.hpp"

namespace {

using lkd::Index;

lkd::Tensor<float> random(lkd::Shape s, std::uint64_t seed) {
  lkd::Rng rng(seed);
  lkd::Tensor<float> t(s);
  for (auto& v : t.span()) v = static_cast<float>(rng.normal());
  return t;
}

// Args: channels, spatial side.
void BM_DepthwiseDilated(benchmark::State& state) {
  lkd::set_num_threads(1);
  const Index c = state.range(0), hw = state.range(1);
  const auto spec = lkd::ConvSpec::depthwise(c, 7, 3);
  const auto x = random({1, c, hw, hw}, 1);
  const auto w = random(spec.weight_shape(), 2);
  const auto b = random(spec.bias_shape(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(lkd::conv2d_forward(x, spec, w, &b));
  state.counters["MACs"] = benchmark::Counter(static_cast<double>(spec.macs(hw, hw)), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_DepthwiseDilated)->Args({24, 64})->Args({48, 32})->Unit(benchmark::kMicrosecond);

void BM_DirectLargeDepthwise(benchmark::State& state) {
  lkd::set_num_threads(1);
  const Index c = state.range(0), hw = state.range(1);
  const auto spec = lkd::ConvSpec::depthwise(c, 21);
  const auto x = random({1, c, hw, hw}, 1);
  const auto w = random(spec.weight_shape(), 2);
  const auto b = random(spec.bias_shape(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(lkd::conv2d_forward(x, spec, w, &b));
  state.counters["MACs"] = benchmark::Counter(static_cast<double>(spec.macs(hw, hw)), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_DirectLargeDepthwise)->Args({24, 64})->Unit(benchmark::kMicrosecond);

void BM_Pointwise(benchmark::State& state) {
  lkd::set_num_threads(1);
  const Index c = state.range(0), hw = state.range(1);
  const auto spec = lkd::ConvSpec::pointwise(c, c);
  const auto x = random({1, c, hw, hw}, 1);
  const auto w = random(spec.weight_shape(), 2);
  const auto b = random(spec.bias_shape(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(lkd::conv2d_forward(x, spec, w, &b));
  state.counters["MACs"] = benchmark::Counter(static_cast<double>(spec.macs(hw, hw)), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Pointwise)->Args({24, 64})->Args({96, 16})->Unit(benchmark::kMicrosecond);

void BM_DepthwiseBackward(benchmark::State& state) {
  lkd::set_num_threads(1);
  const Index c = state.range(0), hw = state.range(1);
  const auto spec = lkd::ConvSpec::depthwise(c, 7, 3);
  const auto x = random({1, c, hw, hw}, 1);
  const auto w = random(spec.weight_shape(), 2);
  const auto g = random(spec.output_shape(x.shape()), 3);
  for (auto _ : state) benchmark::DoNotOptimize(lkd::conv2d_backward(x, spec, w, g));
}
BENCHMARK(BM_DepthwiseBackward)->Args({24, 64})->Unit(benchmark::kMicrosecond);

// Whole-network eval forward; arg: spatial side.
void BM_ModelForward(benchmark::State& state, const char* variant) {
  lkd::set_num_threads(1);
  const Index hw = state.range(0);
  const auto model = lkd::Model<float>::build(lkd::variant_config(variant), 0);
  const auto x = random({1, 3, hw, hw}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
  state.counters["MACs"] = benchmark::Counter(static_cast<double>(lkd::count_costs(model, hw, hw).total_macs),
                                              benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK_CAPTURE(BM_ModelForward, desk, "desk")->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ModelForward, tiny, "t")->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  lkd::set_num_threads(1);
  auto model = lkd::Model<float>::build(lkd::variant_config("desk"), 0);
  const auto x = random({4, 3, 64, 64}, 5);
  for (auto _ : state) {
    const auto y = model.forward(x);
    benchmark::DoNotOptimize(model.backward(y));
    model.zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
