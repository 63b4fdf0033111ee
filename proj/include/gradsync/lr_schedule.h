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

#ifndef GRADSYNC_LR_SCHEDULE_H_
#define GRADSYNC_LR_SCHEDULE_H_

#include <cstdint>

namespace gradsync::lars {

enum class ScheduleKind { kConstant, kLinearWarmupThenPoly };

// Global learning rate schedule.
//
// kLinearWarmupThenPoly ramps linearly from 0 to base_lr over warmup_steps,
// then decays as
//   end_lr + (base_lr - end_lr) * (1 - (step - warmup) / (total - warmup))^power
// and holds end_lr once step >= total_steps.
struct Schedule {
  ScheduleKind kind = ScheduleKind::kConstant;
  float base_lr = 0.1f;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 0;
  float poly_power = 2.0f;
  float end_lr = 0.0f;

  // Throws std::invalid_argument for negative rates, or a decay window
  // that ends before the warmup does.
  void validate() const;
};

float schedule_lr(const Schedule& schedule, std::uint64_t step);

}  // namespace gradsync::lars

#endif  // GRADSYNC_LR_SCHEDULE_H_
