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

#ifndef GRADSYNC_LOSS_SCALE_H_
#define GRADSYNC_LOSS_SCALE_H_

#include <cstdint>
#include <span>
#include <vector>

namespace gradsync::halfprec {

enum class LossScalePolicy { kFixed, kDynamic };

struct LossScaleOptions {
  LossScalePolicy policy = LossScalePolicy::kDynamic;
  float initial_scale = 1024.0f;  // 2^10
  float growth_factor = 2.0f;
  float backoff_factor = 0.5f;
  std::uint32_t growth_interval = 200;
};

// Loss scaling state. The scale stays strictly positive; a dynamic scaler
// halves on overflow and doubles after `growth_interval` clean steps.
class LossScale {
 public:
  explicit LossScale(LossScaleOptions options = {});

  static LossScale fixed(float scale);

  float scale() const { return scale_; }
  LossScalePolicy policy() const { return options_.policy; }
  std::uint32_t clean_steps() const { return clean_steps_; }

  float apply(float loss) const { return loss * scale_; }

  // Divides `grads` by the current scale in place. Returns false (and leaves
  // the values untouched) if any element is non-finite; in that case the
  // caller must discard the step. Under the dynamic policy the scale backs
  // off, but the new scale only takes effect for the next step.
  bool unscale(std::span<float> grads);

  // Same check without dividing, for callers that hold several tensors.
  static bool all_finite(std::span<const float> grads);

  // Records the outcome of one optimizer step.
  void update(bool found_non_finite);

 private:
  LossScaleOptions options_;
  float scale_;
  std::uint32_t clean_steps_ = 0;
};

float apply_loss_scale(float loss, const LossScale& scale);

struct UnscaleResult {
  std::vector<float> grads;  // empty when skip is set
  bool skip = false;
};

// Divides a copy of `grads` by the scale. A non-finite element sets `skip`
// and records the overflow on `scale` (backoff under the dynamic policy).
UnscaleResult unscale_gradients(std::span<const float> grads, LossScale& scale);

}  // namespace gradsync::halfprec

#endif  // GRADSYNC_LOSS_SCALE_H_
