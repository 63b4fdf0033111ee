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

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <random>

#include "gradsync/checkpoint.h"
#include "gradsync/halfprec.h"
#include "gradsync/lars.h"
#include "gradsync/lr_schedule.h"

namespace gradsync::lars {
namespace {

std::vector<float> random_vector(std::mt19937_64& rng, std::size_t n, float scale) {
  std::normal_distribution<float> d(0.0f, scale);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

// eta * |w| / (|g| + eps) with every operation in long double.
long double oracle_local_lr(const std::vector<float>& w, const std::vector<float>& g,
                            long double eta, long double eps) {
  long double ws = 0, gs = 0;
  for (float x : w) ws += static_cast<long double>(x) * x;
  for (float x : g) gs += static_cast<long double>(x) * x;
  return eta * std::sqrt(ws) / (std::sqrt(gs) + eps);
}

TEST(LarsLocalLr, AgreesWithExtendedPrecisionOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 5000);
  std::uniform_real_distribution<float> mag(-6.0f, 3.0f);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = len(rng);
    const auto w = random_vector(rng, n, std::pow(10.0f, mag(rng)));
    const auto g = random_vector(rng, n, std::pow(10.0f, mag(rng)));
    LarsConfig cfg;
    cfg.eta = 0.001f;
    cfg.epsilon = trial % 2 ? 1e-9f : 0.0f;
    const long double expected = oracle_local_lr(w, g, cfg.eta, cfg.epsilon);
    const float got = lars_local_lr(w, g, cfg);
    EXPECT_LE(std::fabs((got - expected) / expected), 1e-7L) << "trial " << trial;
  }
}

TEST(LarsLocalLr, DegenerateNormsFallBackToOne) {
  LarsConfig cfg;
  const std::vector<float> zeros(4, 0.0f), ones(4, 1.0f);
  EXPECT_EQ(lars_local_lr(zeros, ones, cfg), 1.0f);
  EXPECT_EQ(lars_local_lr(ones, zeros, cfg), 1.0f);
  cfg.epsilon = 0.5f;
  EXPECT_FLOAT_EQ(lars_local_lr(ones, zeros, cfg), 0.001f * 2.0f / 0.5f);
}

TEST(LarsLocalLr, WorkedExample) {
  // |w| = 5, |g| = 0.5 -> 0.001 * 5 / 0.5 = 0.01
  LarsConfig cfg;
  EXPECT_FLOAT_EQ(lars_local_lr(std::vector<float>{3, 4}, std::vector<float>{0.3f, 0.4f}, cfg),
                  0.01f);
}

TEST(LarsLocalLr, LengthMismatchIsContractViolation) {
  EXPECT_THROW(lars_local_lr(std::vector<float>{1, 2}, std::vector<float>{1}, LarsConfig{}),
               ContractViolation);
}

TEST(WeightDecay, AddsLambdaWUnlessExempt) {
  const std::vector<float> g = {1.0f, -2.0f}, w = {10.0f, 20.0f};
  const auto d = apply_weight_decay(g, w, 0.5f, false);
  EXPECT_EQ(d, (std::vector<float>{6.0f, 8.0f}));
  EXPECT_EQ(apply_weight_decay(g, w, 0.5f, true), g);
}

TEST(ExemptionPolicy, DefaultsExemptBiasAndBnAndLimitLarsToWeights) {
  const auto w = make_param_group("w", ParamKind::kWeight, {1.0f});
  const auto b = make_param_group("b", ParamKind::kBias, {1.0f});
  const auto beta = make_param_group("beta", ParamKind::kBnBeta, {1.0f});
  const auto gamma = make_param_group("gamma", ParamKind::kBnGamma, {1.0f});
  EXPECT_FALSE(w.decay_exempt);
  EXPECT_TRUE(w.lars_enabled);
  for (const auto* g : {&b, &beta, &gamma}) {
    EXPECT_TRUE(g->decay_exempt);
    EXPECT_FALSE(g->lars_enabled);
  }
  ExemptionPolicy all;
  all.exempt_bias = all.exempt_bn = false;
  EXPECT_FALSE(make_param_group("b", ParamKind::kBias, {1.0f}, all).decay_exempt);
  EXPECT_FALSE(make_param_group("g", ParamKind::kBnGamma, {1.0f}, all).decay_exempt);
}

TEST(ParamKindNames, RoundTrip) {
  for (auto k : {ParamKind::kWeight, ParamKind::kBias, ParamKind::kBnBeta, ParamKind::kBnGamma}) {
    EXPECT_EQ(param_kind_from_string(to_string(k)), k);
  }
}

TEST(LarsStep, MatchesHandRolledMomentumReference) {
  std::mt19937_64 rng(5);
  LarsConfig cfg;
  cfg.schedule.base_lr = 0.5f;
  cfg.weight_decay = 1e-4f;
  cfg.momentum = 0.9f;
  std::vector<ParamGroup> groups;
  groups.push_back(make_param_group("w", ParamKind::kWeight, random_vector(rng, 64, 1.0f)));
  groups.push_back(make_param_group("b", ParamKind::kBias, random_vector(rng, 8, 1.0f)));

  std::vector<std::vector<float>> w, v;
  for (const auto& g : groups) {
    w.push_back(g.master_w);
    v.push_back(std::vector<float>(g.size(), 0.0f));
  }
  for (std::uint64_t step = 0; step < 20; ++step) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
      groups[i].grad = random_vector(rng, groups[i].size(), 0.1f);
      // Reference: same formula, written out independently.
      std::vector<float> gd = groups[i].grad;
      if (!groups[i].decay_exempt) {
        for (std::size_t j = 0; j < gd.size(); ++j) gd[j] += cfg.weight_decay * w[i][j];
      }
      float local = 1.0f;
      if (groups[i].lars_enabled) {
        double wn = 0, gn = 0;
        for (float x : w[i]) wn += static_cast<double>(x) * x;
        for (float x : gd) gn += static_cast<double>(x) * x;
        local = static_cast<float>(cfg.eta * std::sqrt(wn) / std::sqrt(gn));
      }
      const float rate = local * cfg.schedule.base_lr;
      for (std::size_t j = 0; j < gd.size(); ++j) {
        v[i][j] = cfg.momentum * v[i][j] + rate * gd[j];
        w[i][j] -= v[i][j];
      }
    }
    ASSERT_EQ(lars_step(groups, cfg, step), StepStatus::kApplied);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      ASSERT_EQ(groups[i].master_w, w[i]) << "step " << step;
      ASSERT_EQ(groups[i].velocity, v[i]);
      ASSERT_EQ(groups[i].working_weights(), halfprec::quantize_tensor(w[i]));
    }
  }
}

TEST(LarsStep, UpdateIsInvariantToGradientScale) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> log_scale(-4.0f, 4.0f);
  LarsConfig cfg;
  cfg.epsilon = 0.0f;
  cfg.weight_decay = 0.0f;
  cfg.momentum = 0.0f;
  cfg.schedule.base_lr = 1.0f;
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = random_vector(rng, 256, 1.0f);
    const auto g = random_vector(rng, 256, 0.01f);
    const float c = std::pow(10.0f, log_scale(rng));
    std::vector<float> gc(g);
    for (float& x : gc) x *= c;

    std::vector<ParamGroup> a{make_param_group("w", ParamKind::kWeight, w)};
    std::vector<ParamGroup> b{make_param_group("w", ParamKind::kWeight, w)};
    a[0].grad = g;
    b[0].grad = gc;
    lars_step(a, cfg, 0);
    lars_step(b, cfg, 0);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const float da = a[0].velocity[j];
      const float db = b[0].velocity[j];
      ASSERT_LE(std::fabs(da - db), 1e-6f * std::fabs(da)) << "trial " << trial << " c " << c;
    }
  }
}

TEST(LarsStep, NonFiniteGradientRejectsWholeStep) {
  std::vector<ParamGroup> groups{make_param_group("a", ParamKind::kWeight, {1.0f, 2.0f}),
                                 make_param_group("b", ParamKind::kWeight, {3.0f})};
  groups[0].grad = {0.1f, 0.1f};
  groups[1].grad = {INFINITY};
  const auto before = groups;
  EXPECT_EQ(lars_step(groups, LarsConfig{}, 0), StepStatus::kRejectedNonFinite);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    EXPECT_EQ(groups[i].master_w, before[i].master_w);
    EXPECT_EQ(groups[i].velocity, before[i].velocity);
  }
}

TEST(LarsStep, MasterWeightsAccumulateWhatFp16Loses) {
  // lr * g = 1e-8 per step is below half an ulp of 1.0 in FP32 and below the
  // smallest binary16 subnormal. Momentum lets the FP32 velocity grow to
  // 1e-7, which the FP32 master absorbs; an all-FP16 optimizer flushes the
  // velocity to zero and never moves.
  LarsConfig cfg;
  cfg.weight_decay = 0.0f;
  cfg.momentum = 0.9f;
  cfg.schedule.base_lr = 1e-8f;
  ExemptionPolicy no_lars;
  no_lars.lars_on_weights = false;
  std::vector<ParamGroup> g{make_param_group("w", ParamKind::kWeight, {1.0f}, no_lars)};

  halfprec::HalfBits w16 = halfprec::f32_to_f16(1.0f);
  halfprec::HalfBits v16{0};
  using halfprec::f16_to_f32;
  using halfprec::f32_to_f16;
  for (int step = 0; step < 10000; ++step) {
    g[0].grad = {1.0f};
    ASSERT_EQ(lars_step(g, cfg, static_cast<std::uint64_t>(step)), StepStatus::kApplied);
    v16 = f32_to_f16(f16_to_f32(f32_to_f16(cfg.momentum)) * f16_to_f32(v16) +
                     f16_to_f32(f32_to_f16(cfg.schedule.base_lr)));
    w16 = f32_to_f16(f16_to_f32(w16) - f16_to_f32(v16));
  }
  // Scalar FP32 reference of the same recurrence.
  float w32 = 1.0f, v32 = 0.0f;
  for (int step = 0; step < 10000; ++step) {
    v32 = cfg.momentum * v32 + cfg.schedule.base_lr * 1.0f;
    w32 -= v32;
  }
  EXPECT_EQ(g[0].master_w[0], w32);
  // Exact-arithmetic displacement is 1e-8 * sum_k (1 - 0.9^k) / 0.1 ~ 1e-3.
  // Each ~1e-7 step lands on the 5.96e-8 grid below 1.0, so FP32 drifts from
  // it by up to a third.
  double exact = 0.0;
  for (int k = 1; k <= 10000; ++k) exact += 1e-7 * (1.0 - std::pow(0.9, k));
  EXPECT_GT(1.0 - g[0].master_w[0], 0.66 * exact);
  EXPECT_LT(1.0 - g[0].master_w[0], 1.34 * exact);
  EXPECT_EQ(f16_to_f32(w16), 1.0f);
  EXPECT_EQ(f16_to_f32(v16), 0.0f);
}

TEST(Schedule, ConstantAndWarmupThenPoly) {
  Schedule s;
  s.base_lr = 2.0f;
  EXPECT_EQ(schedule_lr(s, 123), 2.0f);
  s.kind = ScheduleKind::kLinearWarmupThenPoly;
  s.warmup_steps = 4;
  s.total_steps = 14;
  s.poly_power = 2.0f;
  s.end_lr = 0.0f;
  EXPECT_FLOAT_EQ(schedule_lr(s, 0), 0.0f);
  EXPECT_FLOAT_EQ(schedule_lr(s, 2), 1.0f);
  EXPECT_FLOAT_EQ(schedule_lr(s, 4), 2.0f);
  EXPECT_FLOAT_EQ(schedule_lr(s, 9), 2.0f * 0.25f);
  EXPECT_FLOAT_EQ(schedule_lr(s, 14), 0.0f);
  EXPECT_FLOAT_EQ(schedule_lr(s, 100), 0.0f);
  s.total_steps = 2;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(LarsConfig, RejectsBadValues) {
  LarsConfig c;
  c.momentum = 1.0f;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = LarsConfig{};
  c.weight_decay = -1.0f;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = LarsConfig{};
  c.eta = 0.0f;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_NO_THROW(LarsConfig{}.validate());
  EXPECT_EQ(kLargeBatchWeightDecay, 0.0005f);
}

OptimizerState sample_state() {
  std::mt19937_64 rng(3);
  OptimizerState s;
  s.step = 4242;
  s.groups.push_back(make_param_group("conv1/w", ParamKind::kWeight, random_vector(rng, 33, 1.0f)));
  s.groups.push_back(make_param_group("bn1/gamma", ParamKind::kBnGamma, random_vector(rng, 5, 1.0f)));
  s.groups[0].velocity = random_vector(rng, 33, 0.01f);
  s.groups[1].lars_enabled = true;
  return s;
}

TEST(Checkpoint, RoundTripIsExact) {
  const OptimizerState s = sample_state();
  const auto bytes = encode_checkpoint(s);
  ASSERT_GE(bytes.size(), 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LARS");
  const OptimizerState r = decode_checkpoint(bytes);
  EXPECT_EQ(r.step, s.step);
  ASSERT_EQ(r.groups.size(), s.groups.size());
  for (std::size_t i = 0; i < s.groups.size(); ++i) {
    EXPECT_EQ(r.groups[i].name, s.groups[i].name);
    EXPECT_EQ(r.groups[i].kind, s.groups[i].kind);
    EXPECT_EQ(r.groups[i].decay_exempt, s.groups[i].decay_exempt);
    EXPECT_EQ(r.groups[i].lars_enabled, s.groups[i].lars_enabled);
    EXPECT_EQ(r.groups[i].master_w, s.groups[i].master_w);
    EXPECT_EQ(r.groups[i].velocity, s.groups[i].velocity);
    EXPECT_EQ(r.groups[i].working_weights(), halfprec::quantize_tensor(s.groups[i].master_w));
  }
  EXPECT_EQ(encode_checkpoint(r), bytes);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gradsync_ckpt_test.bin";
  save_checkpoint(path, sample_state());
  EXPECT_EQ(encode_checkpoint(load_checkpoint(path)), encode_checkpoint(sample_state()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
}

TEST(Checkpoint, CorruptInputIsRejected) {
  auto bytes = encode_checkpoint(sample_state());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), CheckpointError);
  auto bad_version = bytes;
  bad_version[4] = 99;
  EXPECT_THROW(decode_checkpoint(bad_version), CheckpointError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint(std::span(bytes).first(cut)), CheckpointError) << cut;
  }
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), CheckpointError);
}

}  // namespace
}  // namespace gradsync::lars
