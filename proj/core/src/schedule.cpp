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

#include "waspseg/schedule.hpp"

#include <cmath>
#include <string>

#include "waspseg/error.hpp"

namespace waspseg {

void PolySchedule::validate() const {
  if (!(base_lr >= 0.0)) throw ConfigError("poly schedule: base_lr must be >= 0");
  if (max_iter < 1) throw ConfigError("poly schedule: max_iter must be >= 1");
  if (!(power >= 0.0)) throw ConfigError("poly schedule: power must be >= 0");
}

double PolySchedule::lr(int iter) const {
  validate();
  if (iter < 0 || iter > max_iter) {
    throw ConfigError("poly schedule: iteration " + std::to_string(iter) + " outside [0, " +
                      std::to_string(max_iter) + "]");
  }
  if (iter == 0) return base_lr;
  return base_lr * std::pow(1.0 - static_cast<double>(iter) / max_iter, power);
}

}  // namespace waspseg
