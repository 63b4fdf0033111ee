/* Copyright 2026 The gradsync Authors. All Rights Reserved.

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

#include "gradsync/lr_schedule.h"

#include <cmath>
#include <stdexcept>

namespace gradsync::lars {

void Schedule::validate() const {
  if (!(base_lr >= 0.0f) || !(end_lr >= 0.0f)) {
    throw std::invalid_argument("learning rates must be non-negative");
  }
  if (kind == ScheduleKind::kLinearWarmupThenPoly) {
    if (total_steps < warmup_steps) {
      throw std::invalid_argument("total_steps must be >= warmup_steps");
    }
    if (!(poly_power > 0.0f)) {
      throw std::invalid_argument("poly_power must be positive");
    }
  }
}

float schedule_lr(const Schedule& schedule, std::uint64_t step) {
  if (schedule.kind == ScheduleKind::kConstant) return schedule.base_lr;

  if (step < schedule.warmup_steps) {
    return static_cast<float>(static_cast<double>(schedule.base_lr) *
                              static_cast<double>(step) /
                              static_cast<double>(schedule.warmup_steps));
  }
  const std::uint64_t decay_steps = schedule.total_steps - schedule.warmup_steps;
  if (decay_steps == 0 || step >= schedule.total_steps) {
    return step == schedule.warmup_steps ? schedule.base_lr : schedule.end_lr;
  }
  const double progress = static_cast<double>(step - schedule.warmup_steps) /
                          static_cast<double>(decay_steps);
  const double remaining = std::pow(1.0 - progress, schedule.poly_power);
  return static_cast<float>(
      schedule.end_lr +
      (static_cast<double>(schedule.base_lr) - schedule.end_lr) * remaining);
}

}  // namespace gradsync::lars
