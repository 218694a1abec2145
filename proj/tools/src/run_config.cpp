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

#include "lkd_tools/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <string>

#include "lkd/error.hpp"
#include "lkd/rng.hpp"

namespace lkd::tools {
namespace {

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out, const char* where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(where) + ": bad value for \"" + key + "\": " + e.what());
  }
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"lr0", "beta1", "beta2", "weight_decay", "eps", "steps", "batch", "patch", "lr_min",
                       "eval_every"},
                      "train config");
  TrainConfig c;
  read(j, "lr0", c.lr0, "train config");
  read(j, "beta1", c.beta1, "train config");
  read(j, "beta2", c.beta2, "train config");
  read(j, "weight_decay", c.weight_decay, "train config");
  read(j, "eps", c.eps, "train config");
  read(j, "steps", c.steps, "train config");
  read(j, "batch", c.batch, "train config");
  read(j, "patch", c.patch, "train config");
  read(j, "lr_min", c.lr_min, "train config");
  read(j, "eval_every", c.eval_every, "train config");
  c.validate();
  return c;
}

DatasetOptions dataset_options_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"n", "size", "first_index", "a_min", "a_max", "beta_min", "beta_max", "clean_dir"},
                      "data config");
  DatasetOptions d;
  read(j, "n", d.n, "data config");
  read(j, "size", d.size, "data config");
  read(j, "first_index", d.first_index, "data config");
  read(j, "a_min", d.a_min, "data config");
  read(j, "a_max", d.a_max, "data config");
  read(j, "beta_min", d.beta_min, "data config");
  read(j, "beta_max", d.beta_max, "data config");
  std::string dir;
  read(j, "clean_dir", dir, "data config");
  d.clean_dir = dir;
  if (d.n < 0 || d.size <= 0 || d.size % 4 != 0 || d.first_index < 0) {
    throw ValidationError("data config: need n >= 0, size a positive multiple of 4, first_index >= 0");
  }
  if (!(d.a_min <= d.a_max) || !(d.beta_min <= d.beta_max) || d.beta_min < 0) {
    throw ValidationError("data config: need a_min <= a_max and 0 <= beta_min <= beta_max");
  }
  return d;
}

ErfOptions erf_options_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"samples", "size", "tap", "thresholds"}, "erf config");
  ErfOptions o;
  read(j, "samples", o.samples, "erf config");
  read(j, "size", o.size, "erf config");
  std::string tap = tap_name(o.tap);
  read(j, "tap", tap, "erf config");
  o.tap = parse_tap(tap);
  read(j, "thresholds", o.thresholds, "erf config");
  if (o.samples <= 0 || o.size <= 0 || o.size % 4 != 0) {
    throw ValidationError("erf config: samples must be positive and size a positive multiple of 4");
  }
  for (double t : o.thresholds) {
    if (!(t > 0 && t <= 1)) throw ValidationError("erf config: thresholds must lie in (0, 1]");
  }
  return o;
}

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  train.seed = s;
  data.seed = s;
  erf.seed = s;
}

std::uint64_t RunConfig::model_seed() const { return mix_seed(seed, 0x6d6f64656cULL); }

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"seed", "model", "train", "data", "erf"}, "config");
  RunConfig c;
  if (j.contains("model")) c.model = config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("data")) c.data = dataset_options_from_json(j.at("data"));
  if (j.contains("erf")) c.erf = erf_options_from_json(j.at("erf"));
  std::uint64_t seed = 0;
  read(j, "seed", seed, "config");
  c.apply_seed(seed);
  return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"model", config_to_json(c.model)},
      {"train",
       {{"lr0", c.train.lr0},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"weight_decay", c.train.weight_decay},
        {"eps", c.train.eps},
        {"steps", c.train.steps},
        {"batch", c.train.batch},
        {"patch", c.train.patch},
        {"lr_min", c.train.lr_min},
        {"eval_every", c.train.eval_every}}},
      {"data",
       {{"n", c.data.n},
        {"size", c.data.size},
        {"first_index", c.data.first_index},
        {"a_min", c.data.a_min},
        {"a_max", c.data.a_max},
        {"beta_min", c.data.beta_min},
        {"beta_max", c.data.beta_max},
        {"clean_dir", c.data.clean_dir.string()}}},
      {"erf",
       {{"samples", c.erf.samples},
        {"size", c.erf.size},
        {"tap", tap_name(c.erf.tap)},
        {"thresholds", c.erf.thresholds}}},
  };
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::optional<std::uint64_t> seed_override(std::optional<std::uint64_t> flag) {
  if (flag) return flag;
  const char* env = std::getenv("LKD_SEED");
  if (env == nullptr || *env == '\0') return std::nullopt;
  const std::string s(env);
  if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 19) {
    throw ValidationError("LKD_SEED must be an unsigned integer, got \"" + s + "\"");
  }
  return std::stoull(s);
}

}  // namespace lkd::tools
