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
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lkd/blocks.hpp"

namespace lkd {

/// One network variant: five stages (encoder, encoder, bottleneck, decoder,
/// decoder), each with a block count, an embedding width and an MLP ratio.
struct LkdConfig {
  std::array<Index, 5> blocks{1, 1, 2, 1, 1};
  std::array<Index, 5> dims{24, 48, 96, 48, 24};
  std::array<Index, 5> mlp_ratio{4, 4, 4, 4, 4};
  Decomposition decomposition{21, 3};

  // Ablation switches. All on is the full network.
  bool use_dlk = true;         // off: plain depth-wise conv of plain_kernel
  bool use_cefn = true;        // off: plain feed-forward
  bool use_sk_fusion = true;   // off: concatenation + 1x1 conv
  bool use_soft_recon = true;  // off: global residual
  Index plain_kernel = 7;

  DlkcbGating dlkcb_gating = DlkcbGating::residual;
  CefnForm cefn_form = CefnForm::standard;
  Index ca_reduction = 8;
  Index sk_reduction = 8;
  double scale_init = 1e-2;

  void validate() const;
  BlockOptions block_options(int stage) const;

  bool operator==(const LkdConfig&) const = default;
};

/// LKD-T / S / B / L ("t", "s", "b", "l"), plus "desk": blocks [1,1,1,1,1],
/// dims [8,16,32,16,8].
LkdConfig variant_config(std::string_view name);
std::vector<std::string> variant_names();

/// Ablation ladder on LKD-T: "base", "base+sf", "base+sf+sr",
/// "base+sf+sr+dlk", "base+sf+sr+cefn", "full".
LkdConfig ablation_config(std::string_view name);
std::vector<std::string> ablation_names();

nlohmann::json config_to_json(const LkdConfig& cfg);

/// Accepts every LkdConfig field (all optional) plus an optional "variant"
/// preset applied first. Unknown keys are rejected.
LkdConfig config_from_json(const nlohmann::json& j);

/// Throws ValidationError naming the first key of j not in allowed.
void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, std::string_view where);

}  // namespace lkd
