/* Copyright 2026 The waspseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <functional>

namespace waspseg {

// Worker count used by parallel_for. Read once from WASPSEG_THREADS, falling
// back to std::thread::hardware_concurrency().
int thread_count() noexcept;
void set_thread_count(int threads) noexcept;

// Runs fn(i) for i in [begin, end), split into contiguous chunks. Each index
// is processed by exactly one worker, so per-element results do not depend on
// the number of threads.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn);

}  // namespace waspseg
