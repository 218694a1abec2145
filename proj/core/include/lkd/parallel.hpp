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

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lkd {

/// Caps the worker count used by parallel_for. Values < 1 are treated as 1.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, count). Work is split into contiguous chunks, one
/// per worker; callers must only write to outputs owned by index i, which
/// keeps results independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
  const int workers = static_cast<int>(std::min<std::int64_t>(num_threads(), count));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::int64_t chunk = (count + workers - 1) / workers;
  auto run = [&](std::int64_t begin, std::int64_t end) {
    try {
      for (std::int64_t i = begin; i < end; ++i) fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  for (int w = 1; w < workers; ++w) {
    const std::int64_t begin = w * chunk;
    pool.emplace_back(run, begin, std::min(count, begin + chunk));
  }
  run(0, std::min(count, chunk));
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace lkd
