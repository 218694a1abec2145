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

#include "lkd/blocks.hpp"
#include "lkd/config.hpp"
#include "lkd/fusion.hpp"

namespace lkd {

/// Points in the network where a forward pass can stop and a backward pass
/// can start. Ordered from input to output.
enum class Tap {
  bottleneck,  // output of the bottleneck stage
  pre_head,    // output of the last decoder stage, before the head conv
  output,      // the restored image
};

Tap parse_tap(std::string_view name);
std::string tap_name(Tap tap);

/// Skip-connection fusion: SK fusion or the concatenation baseline.
template <typename T>
class SkipFusion {
 public:
  SkipFusion() = default;
  SkipFusion(const std::string& name, Index channels, bool selective, Index reduction, Rng& rng);

  Tensor<T> forward(const Tensor<T>& a, const Tensor<T>& skip);
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& grad_out);
  void collect(ParamSet<T>& set);
  void costs(std::vector<LayerCost>& rows, Index h, Index w) const;

  bool selective() const { return selective_; }
  SkFusion<T>& sk() { return sk_; }

 private:
  bool selective_ = true;
  SkFusion<T> sk_;
  ConcatFusion<T> concat_;
};

/// The five-stage U-shaped dehazing network.
template <typename T>
class Model {
 public:
  static Model build(const LkdConfig& config, std::uint64_t seed);

  const LkdConfig& config() const { return config_; }
  void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const { return mode_; }
  /// Eval-mode outputs are clamped to [0, 1] unless this is turned off.
  void set_eval_clamp(bool on) { eval_clamp_ = on; }

  /// image: [N, 3, H, W] with H, W divisible by 4. In eval mode the result is
  /// clamped to [0, 1].
  Tensor<T> forward(const Tensor<T>& image);
  /// Gradient of the last forward() w.r.t. its input image; parameter
  /// gradients are accumulated.
  Tensor<T> backward(const Tensor<T>& grad_out);

  /// Runs forward up to tap and returns the feature map there.
  Tensor<T> forward_to(const Tensor<T>& image, Tap tap);
  /// Backpropagates from tap after forward_to(image, tap); returns the input gradient.
  Tensor<T> backward_from(const Tensor<T>& grad, Tap tap);

  /// Eval-mode forward on a copy; does not touch this model.
  Tensor<T> predict(const Tensor<T>& image) const;

  /// Parameters and buffers in a stable order. Pointers stay valid until the
  /// model is moved or copied.
  ParamSet<T> parameters();
  void zero_grad();
  Index param_count() const;
  std::vector<LayerCost> costs(Index h, Index w) const;

  /// Checkpoint: a text header (magic, config JSON, entry count) followed by
  /// one "param|buffer <name>" line plus one tensor blob per entry.
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  Tensor<T> run_stage(int stage, Tensor<T> x);
  Tensor<T> back_stage(int stage, Tensor<T> g);
  Tensor<T> backward_range(Tensor<T> grad, Tap start);

  LkdConfig config_;
  Mode mode_ = Mode::train;
  bool eval_clamp_ = true;
  Conv2d<T> stem_;
  std::vector<LkdBlock<T>> stages_[5];
  Conv2d<T> down_[2];
  Upsample<T> up_[2];
  SkipFusion<T> fuse_[2];
  Conv2d<T> head_;

  Tensor<T> image_;
  Tensor<T> head_out_;
  Tensor<T> unclamped_;
  bool clamped_ = false;
};

/// Number of scalars stored as parameters (not buffers) in a checkpoint,
/// derived from the tensor headers' payload sizes.
Index checkpoint_param_count(const std::filesystem::path& path);

/// The config stored in a checkpoint header.
LkdConfig checkpoint_config(const std::filesystem::path& path);

}  // namespace lkd
