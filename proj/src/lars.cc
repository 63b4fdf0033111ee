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

#include "gradsync/lars.h"

#include <cmath>

namespace gradsync::lars {

namespace {

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

void check_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ContractViolation(std::string(what) + ": length mismatch (" +
                            std::to_string(a) + " vs " + std::to_string(b) +
                            ")");
  }
}

}  // namespace

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::kWeight:
      return "weight";
    case ParamKind::kBias:
      return "bias";
    case ParamKind::kBnBeta:
      return "bn_beta";
    case ParamKind::kBnGamma:
      return "bn_gamma";
  }
  return "unknown";
}

ParamKind param_kind_from_string(std::string_view name) {
  if (name == "weight") return ParamKind::kWeight;
  if (name == "bias") return ParamKind::kBias;
  if (name == "bn_beta") return ParamKind::kBnBeta;
  if (name == "bn_gamma") return ParamKind::kBnGamma;
  throw std::invalid_argument("unknown parameter kind: " + std::string(name));
}

std::vector<float> ParamGroup::working_weights() const {
  return halfprec::to_float(working_w16);
}

void ParamGroup::refresh_working_copy() {
  working_w16 = halfprec::to_half(master_w);
}

ParamGroup make_param_group(std::string name, ParamKind kind,
                            std::vector<float> initial_weights,
                            const ExemptionPolicy& policy) {
  ParamGroup group;
  group.name = std::move(name);
  group.kind = kind;
  group.master_w = std::move(initial_weights);
  group.grad.assign(group.master_w.size(), 0.0f);
  group.velocity.assign(group.master_w.size(), 0.0f);
  group.refresh_working_copy();
  switch (kind) {
    case ParamKind::kWeight:
      group.decay_exempt = false;
      group.lars_enabled = policy.lars_on_weights;
      break;
    case ParamKind::kBias:
      group.decay_exempt = policy.exempt_bias;
      group.lars_enabled = policy.lars_on_bias_and_bn;
      break;
    case ParamKind::kBnBeta:
    case ParamKind::kBnGamma:
      group.decay_exempt = policy.exempt_bn;
      group.lars_enabled = policy.lars_on_bias_and_bn;
      break;
  }
  return group;
}

void LarsConfig::validate() const {
  if (!(eta > 0.0f)) throw std::invalid_argument("LARS eta must be > 0");
  if (!(epsilon >= 0.0f)) throw std::invalid_argument("LARS epsilon must be >= 0");
  if (!(weight_decay >= 0.0f)) {
    throw std::invalid_argument("weight decay must be >= 0");
  }
  if (!(momentum >= 0.0f && momentum < 1.0f)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  schedule.validate();
}

float lars_local_lr(std::span<const float> w, std::span<const float> g,
                    const LarsConfig& config) {
  check_same_length(w.size(), g.size(), "lars_local_lr");
  const double w_norm = l2_norm(w);
  const double denom = l2_norm(g) + static_cast<double>(config.epsilon);
  if (w_norm == 0.0 || denom == 0.0) return 1.0f;
  return static_cast<float>(static_cast<double>(config.eta) * w_norm / denom);
}

std::vector<float> apply_weight_decay(std::span<const float> g,
                                      std::span<const float> w, float lambda,
                                      bool exempt) {
  check_same_length(g.size(), w.size(), "apply_weight_decay");
  std::vector<float> out(g.begin(), g.end());
  if (exempt || lambda == 0.0f) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += lambda * w[i];
  return out;
}

StepStatus lars_step(std::span<ParamGroup> groups, const LarsConfig& config,
                     std::uint64_t step) {
  for (const ParamGroup& group : groups) {
    check_same_length(group.master_w.size(), group.grad.size(), group.name.c_str());
    check_same_length(group.master_w.size(), group.velocity.size(),
                      group.name.c_str());
    for (float g : group.grad) {
      if (!std::isfinite(g)) return StepStatus::kRejectedNonFinite;
    }
  }

  const float lr = schedule_lr(config.schedule, step);
  for (ParamGroup& group : groups) {
    const std::vector<float> decayed = apply_weight_decay(
        group.grad, group.master_w, config.weight_decay, group.decay_exempt);
    const float local =
        group.lars_enabled ? lars_local_lr(group.master_w, decayed, config) : 1.0f;
    const float rate = local * lr;
    for (std::size_t i = 0; i < group.master_w.size(); ++i) {
      group.velocity[i] = config.momentum * group.velocity[i] + rate * decayed[i];
      group.master_w[i] -= group.velocity[i];
    }
    group.refresh_working_copy();
  }
  return StepStatus::kApplied;
}

}  // namespace gradsync::lars
