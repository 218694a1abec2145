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
#include <optional>

#include <nlohmann/json.hpp>

#include "lkd/analysis.hpp"
#include "lkd/config.hpp"
#include "lkd/haze.hpp"
#include "lkd/train.hpp"

namespace lkd::tools {

/// Everything a subcommand needs, read from one JSON document:
///
///   {"seed": 0,
///    "model": {LkdConfig fields or "variant"},
///    "train": {lr0, beta1, beta2, weight_decay, eps, steps, batch, patch, lr_min, eval_every},
///    "data":  {n, size, first_index, a_min, a_max, beta_min, beta_max, clean_dir},
///    "erf":   {samples, size, tap, thresholds}}
///
/// Every key is optional; unknown keys are rejected. The single seed feeds
/// data synthesis, weight init, batch sampling and the ERF probe.
struct RunConfig {
  std::uint64_t seed = 0;
  LkdConfig model{};
  TrainConfig train{};
  DatasetOptions data{};
  ErfOptions erf{};

  /// Copies seed into the per-module options.
  void apply_seed(std::uint64_t s);
  /// Seed used for weight initialisation.
  std::uint64_t model_seed() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Reads a JSON file; IoError when unreadable, ValidationError when malformed.
RunConfig load_run_config(const std::filesystem::path& path);

TrainConfig train_config_from_json(const nlohmann::json& j);
DatasetOptions dataset_options_from_json(const nlohmann::json& j);
ErfOptions erf_options_from_json(const nlohmann::json& j);

/// Seed precedence: explicit flag, then the LKD_SEED environment variable,
/// then the config file. Returns nothing when neither override is set.
/// Throws ValidationError when LKD_SEED is not an unsigned integer.
std::optional<std::uint64_t> seed_override(std::optional<std::uint64_t> flag);

}  // namespace lkd::tools
