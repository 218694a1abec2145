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

#include <ostream>
#include <string>
#include <vector>

namespace lkd::tools {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitValidation = 2,
  kExitNumeric = 3,
};

/// Runs the lkd command line. args excludes the program name. Results go to
/// out; a one-line JSON error record goes to err on failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Full --help text of the top-level command and of every subcommand.
std::string help_text();

}  // namespace lkd::tools
