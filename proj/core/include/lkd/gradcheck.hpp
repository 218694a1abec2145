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
#include <string>
#include <vector>

#include "lkd/tensor.hpp"

namespace lkd {

struct GradCheckOptions {
  double step = 1e-4;       // central-difference step
  double tolerance = 1e-4;  // on |a - n| / max(|a|, |n|, floor)
  double floor = 1e-8;
  int seeds = 5;
  std::uint64_t base_seed = 0;
  Index param_samples = 24;  // entries checked per parameter tensor (inputs are checked in full)
};

struct GradCheckResult {
  std::string name;
  int seeds = 0;
  Index checked = 0;  // gradient entries compared, over all seeds
  double max_rel_error = 0;
  std::string worst;  // where max_rel_error occurred
  std::vector<std::string> excluded;  // parameters left out (gradient is 0 by construction)
  bool passed = false;
};

/// Names of every check in the suite, in run order.
std::vector<std::string> gradcheck_names();

/// Runs the checks whose name contains filter (all when empty). Throws
/// ValidationError when the filter matches nothing.
std::vector<GradCheckResult> run_gradchecks(const std::string& filter = "", const GradCheckOptions& opt = {});

/// Runs the single check with exactly this name.
GradCheckResult run_gradcheck(const std::string& name, const GradCheckOptions& opt = {});

/// Elementwise relative error with the documented floor.
double relative_error(double analytic, double numeric, double floor = 1e-8);

}  // namespace lkd
