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
#include <vector>

#include "lkd/haze.hpp"
#include "lkd/model.hpp"

namespace lkd {

struct TrainConfig {
  double lr0 = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double eps = 1e-8;
  Index steps = 2000;
  Index batch = 4;
  Index patch = 64;
  double lr_min = 0.0;
  std::uint64_t seed = 0;
  Index eval_every = 200;  // 0: evaluate only after the last step

  void validate() const;
};

template <typename T>
struct Loss {
  double value = 0;
  Tensor<T> grad;  // d value / d pred
};

/// Mean absolute error and its (sub)gradient; the gradient is 0 at exact ties.
template <typename T>
Loss<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// lr0 -> lr_min along a half cosine; 0 <= step <= total, total > 0.
double cosine_lr(Index step, Index total, double lr0, double lr_min);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay followed by the bias-corrected Adam update. State
/// is matched to parameters by position; grads are zeroed after each step.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  /// Throws NumericError (and changes nothing) if any gradient is non-finite.
  void step(const std::vector<Parameter<T>*>& params, double lr);

  Index steps_taken() const { return t_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  AdamWConfig cfg_;
  Index t_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

struct EvalResult {
  std::vector<double> psnr;
  std::vector<double> ssim;
  std::vector<double> hazy_psnr;
  double mean_psnr = 0;
  double mean_ssim = 0;
  double mean_hazy_psnr = 0;
};

/// Eval-mode restoration of every pair at full size.
EvalResult evaluate(const Model<float>& model, const std::vector<HazePair>& pairs);

struct TrainRecord {
  Index step = 0;
  double lr = 0;
  double loss = 0;  // mean training loss since the previous record
  double psnr = 0;
  double ssim = 0;
};

struct TrainResult {
  std::vector<double> losses;  // one per step
  std::vector<TrainRecord> records;
};

/// Batches of random crops, L1 loss, AdamW with a cosine schedule. Evaluates
/// on eval_pairs (or the first few training pairs when empty) every
/// eval_every steps and after the last step. When out_dir is non-empty,
/// writes out_dir/metrics.csv and out_dir/model.ckpt. A non-finite loss
/// restores the last evaluated weights, saves them, and throws NumericError.
/// Deterministic for a fixed config and seed.
TrainResult train(Model<float>& model, const std::vector<HazePair>& train_pairs,
                  const std::vector<HazePair>& eval_pairs, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {});

void write_metrics_csv(const std::filesystem::path& path, const std::vector<TrainRecord>& records);

}  // namespace lkd
