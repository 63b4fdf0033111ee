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

#ifndef GRADSYNC_LARS_H_
#define GRADSYNC_LARS_H_

// Mixed-precision LARS optimizer.
//
// Each layer keeps an FP32 master copy of its weights and an FP16 working
// copy used by forward/backward. A step casts nothing down until the very
// end: weight decay, the layer-wise trust ratio, momentum and the weight
// update all run on FP32 values, and only the refreshed master weights are
// narrowed into the working copy.
//
//   g'    = g + lambda * w             (skipped for decay-exempt groups)
//   local = eta * |w| / (|g'| + eps)   (1.0 when LARS is off for the group)
//   v     = momentum * v + local * lr(step) * g'
//   w     = w - v

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradsync/errors.h"
#include "gradsync/halfprec.h"
#include "gradsync/lr_schedule.h"

namespace gradsync::lars {

enum class ParamKind : std::uint8_t { kWeight = 0, kBias = 1, kBnBeta = 2, kBnGamma = 3 };

std::string_view to_string(ParamKind kind);
ParamKind param_kind_from_string(std::string_view name);

// Which groups get weight decay and which get the LARS trust ratio.
struct ExemptionPolicy {
  bool exempt_bias = true;
  bool exempt_bn = true;
  bool lars_on_weights = true;
  bool lars_on_bias_and_bn = false;
};

struct ParamGroup {
  std::string name;
  ParamKind kind = ParamKind::kWeight;
  std::vector<float> master_w;
  std::vector<float> grad;
  std::vector<float> velocity;
  std::vector<halfprec::HalfBits> working_w16;
  bool decay_exempt = false;
  bool lars_enabled = true;

  std::size_t size() const { return master_w.size(); }

  // Weights as seen by FP16 compute, widened back to FP32.
  std::vector<float> working_weights() const;

  // Re-derives working_w16 from master_w.
  void refresh_working_copy();
};

ParamGroup make_param_group(std::string name, ParamKind kind,
                            std::vector<float> initial_weights,
                            const ExemptionPolicy& policy = {});

struct LarsConfig {
  float eta = 0.001f;  // trust coefficient
  float epsilon = 0.0f;
  Schedule schedule;
  float weight_decay = 0.0001f;
  float momentum = 0.9f;

  // Throws std::invalid_argument on the first violated bound.
  void validate() const;
};

// Weight decay raised for very large global batches (64K images).
inline constexpr float kLargeBatchWeightDecay = 0.0005f;

// eta * |w|_2 / (|g|_2 + eps). Norms accumulate in double and the quotient
// is rounded to FP32 once. Returns 1.0 when |w| == 0 or |g| + eps == 0.
float lars_local_lr(std::span<const float> w, std::span<const float> g,
                    const LarsConfig& config);

// g + lambda * w, or g unchanged when exempt.
std::vector<float> apply_weight_decay(std::span<const float> g,
                                      std::span<const float> w, float lambda,
                                      bool exempt);

enum class StepStatus { kApplied, kRejectedNonFinite };

// One optimizer step over every group. If any gradient is non-finite the
// step is rejected before any group is touched.
StepStatus lars_step(std::span<ParamGroup> groups, const LarsConfig& config,
                     std::uint64_t step);

}  // namespace gradsync::lars

#endif  // GRADSYNC_LARS_H_
