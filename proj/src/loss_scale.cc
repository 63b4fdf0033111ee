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

#include "gradsync/loss_scale.h"

#include <cmath>
#include <stdexcept>

namespace gradsync::halfprec {

LossScale::LossScale(LossScaleOptions options)
    : options_(options), scale_(options.initial_scale) {
  if (!(options_.initial_scale > 0.0f) || !std::isfinite(options_.initial_scale)) {
    throw std::invalid_argument("loss scale must be positive and finite");
  }
  if (options_.policy == LossScalePolicy::kDynamic) {
    if (!(options_.backoff_factor > 0.0f && options_.backoff_factor < 1.0f)) {
      throw std::invalid_argument("loss scale backoff must lie in (0, 1)");
    }
    if (!(options_.growth_factor >= 1.0f)) {
      throw std::invalid_argument("loss scale growth must be >= 1");
    }
    if (options_.growth_interval == 0) {
      throw std::invalid_argument("loss scale growth interval must be > 0");
    }
  }
}

LossScale LossScale::fixed(float scale) {
  LossScaleOptions options;
  options.policy = LossScalePolicy::kFixed;
  options.initial_scale = scale;
  return LossScale(options);
}

bool LossScale::all_finite(std::span<const float> grads) {
  for (float g : grads) {
    if (!std::isfinite(g)) return false;
  }
  return true;
}

bool LossScale::unscale(std::span<float> grads) {
  if (!all_finite(grads)) return false;
  for (float& g : grads) g /= scale_;
  return true;
}

void LossScale::update(bool found_non_finite) {
  if (options_.policy == LossScalePolicy::kFixed) return;
  if (found_non_finite) {
    const float next = scale_ * options_.backoff_factor;
    // Never let the scale underflow to zero.
    if (next > 0.0f) scale_ = next;
    clean_steps_ = 0;
    return;
  }
  if (++clean_steps_ >= options_.growth_interval) {
    const float next = scale_ * options_.growth_factor;
    if (std::isfinite(next)) scale_ = next;
    clean_steps_ = 0;
  }
}

float apply_loss_scale(float loss, const LossScale& scale) {
  return scale.apply(loss);
}

UnscaleResult unscale_gradients(std::span<const float> grads,
                                LossScale& scale) {
  UnscaleResult result;
  if (!LossScale::all_finite(grads)) {
    scale.update(true);
    result.skip = true;
    return result;
  }
  result.grads.assign(grads.begin(), grads.end());
  scale.unscale(result.grads);
  return result;
}

}  // namespace gradsync::halfprec
