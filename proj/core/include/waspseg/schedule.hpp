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

namespace waspseg {

// lr(iter) = base_lr * (1 - iter / max_iter)^power.
struct PolySchedule {
  double base_lr = 0.007;
  int max_iter = 1;
  double power = 0.9;

  // ConfigError unless 0 <= iter <= max_iter.
  double lr(int iter) const;
  void validate() const;
};

}  // namespace waspseg
