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
#include <cstdint>
#include <limits>
#include <random>

#include "gradsync/halfprec.h"
#include "gradsync/loss_scale.h"

namespace gradsync::halfprec {
namespace {

// Independent narrowing oracle: exact value of every finite binary16
// pattern in double, then nearest-neighbour search with ties to the even
// mantissa. Anything at or past 65520 overflows.
double half_value(std::uint16_t bits) {
  const int e = (bits >> 10) & 0x1f;
  const int m = bits & 0x3ff;
  const double mag = e == 0 ? std::ldexp(m, -24) : std::ldexp(1024 + m, e - 25);
  return (bits & 0x8000) ? -mag : mag;
}

std::uint16_t oracle_narrow(float x) {
  if (std::isnan(x)) return 0x7e00;
  const double a = std::fabs(static_cast<double>(x));
  const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  if (a >= 65520.0) return sign | 0x7c00;
  // Positive finite patterns are ordered like their values.
  std::uint16_t lo = 0, hi = 0x7bff;
  while (lo < hi) {
    const std::uint16_t mid = static_cast<std::uint16_t>((lo + hi + 1) / 2);
    if (half_value(mid) <= a) lo = mid; else hi = mid - 1;
  }
  std::uint16_t best = lo;
  if (lo < 0x7bff) {
    const double dlo = a - half_value(lo);
    const double dhi = half_value(static_cast<std::uint16_t>(lo + 1)) - a;
    if (dhi < dlo || (dhi == dlo && (lo & 1))) best = static_cast<std::uint16_t>(lo + 1);
  }
  return sign | best;
}

TEST(HalfPrec, ExhaustiveRoundTripOfEveryPattern) {
  for (std::uint32_t b = 0; b <= 0xffff; ++b) {
    const HalfBits h{static_cast<std::uint16_t>(b)};
    const float f = f16_to_f32(h);
    if (h.is_nan()) {
      EXPECT_TRUE(std::isnan(f));
      EXPECT_EQ(f32_to_f16(f).bits, kHalfCanonicalNaN.bits);
      continue;
    }
    ASSERT_EQ(f32_to_f16(f).bits, h.bits) << std::hex << b;
    if (h.is_finite()) {
      ASSERT_EQ(static_cast<double>(f), half_value(h.bits)) << std::hex << b;
    }
  }
}

TEST(HalfPrec, NarrowingMatchesNearestNeighbourOracle) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (int i = 0; i < 2000000; ++i) {
    std::uint32_t u = bits(rng);
    // Bias half of the samples towards the binary16 exponent range.
    if (i & 1) u = (u & 0x80000000u) | (0x33000000u + (u % (0x47800000u - 0x33000000u)));
    const float x = std::bit_cast<float>(u);
    ASSERT_EQ(f32_to_f16(x).bits, oracle_narrow(x)) << std::hexfloat << x;
  }
}

TEST(HalfPrec, MidpointsBetweenAdjacentHalvesTieToEven) {
  for (std::uint16_t b = 0; b < 0x7bff; ++b) {
    const double mid = (half_value(b) + half_value(static_cast<std::uint16_t>(b + 1))) / 2;
    const float x = static_cast<float>(mid);
    ASSERT_EQ(static_cast<double>(x), mid);  // midpoints are exact in FP32
    const std::uint16_t even = (b & 1) ? static_cast<std::uint16_t>(b + 1) : b;
    ASSERT_EQ(f32_to_f16(x).bits, even) << b;
    ASSERT_EQ(f32_to_f16(-x).bits, 0x8000 | even) << b;
  }
}

TEST(HalfPrec, OverflowBoundary) {
  EXPECT_EQ(f32_to_f16(65504.0f).bits, 0x7bff);
  EXPECT_EQ(f32_to_f16(65519.996f).bits, 0x7bff);
  EXPECT_EQ(f32_to_f16(65520.0f).bits, 0x7c00);
  EXPECT_EQ(f32_to_f16(-65520.0f).bits, 0xfc00);
  EXPECT_EQ(f32_to_f16(1e30f).bits, 0x7c00);
  EXPECT_EQ(f32_to_f16(std::numeric_limits<float>::infinity()).bits, 0x7c00);
  EXPECT_EQ(f32_to_f16(-std::numeric_limits<float>::infinity()).bits, 0xfc00);
}

TEST(HalfPrec, UnderflowBoundary) {
  const float two_m24 = std::ldexp(1.0f, -24);
  const float two_m25 = std::ldexp(1.0f, -25);
  EXPECT_EQ(f32_to_f16(two_m24).bits, 0x0001);
  EXPECT_EQ(f32_to_f16(two_m25).bits, 0x0000);  // tie to even zero
  EXPECT_EQ(f32_to_f16(std::nextafter(two_m25, 1.0f)).bits, 0x0001);
  EXPECT_EQ(f32_to_f16(-two_m25).bits, 0x8000);
  EXPECT_EQ(f32_to_f16(std::ldexp(1.0f, -30)).bits, 0x0000);
  EXPECT_EQ(f32_to_f16(std::numeric_limits<float>::denorm_min()).bits, 0x0000);
  EXPECT_EQ(f32_to_f16(-0.0f).bits, 0x8000);
  // Largest subnormal rounds up into the smallest normal.
  EXPECT_EQ(f32_to_f16(std::ldexp(1.0f, -14) - std::ldexp(1.0f, -26)).bits, 0x0400);
}

TEST(HalfPrec, NanIsCanonical) {
  EXPECT_EQ(f32_to_f16(std::numeric_limits<float>::quiet_NaN()).bits, 0x7e00);
  EXPECT_EQ(f32_to_f16(std::bit_cast<float>(0xffc00001u)).bits, 0x7e00);
  EXPECT_EQ(f32_to_f16(std::bit_cast<float>(0x7f800001u)).bits, 0x7e00);
}

TEST(HalfPrec, QuantizeTensorIsElementwiseRoundTrip) {
  const std::vector<float> in = {0.1f, -3.14159f, 1e-9f, 70000.0f, 0.0f};
  const auto q = quantize_tensor(in);
  ASSERT_EQ(q.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float expected = f16_to_f32(f32_to_f16(in[i]));
    EXPECT_EQ(std::bit_cast<std::uint32_t>(q[i]), std::bit_cast<std::uint32_t>(expected));
  }
  EXPECT_TRUE(std::isinf(q[3]));
  std::vector<float> copy = in;
  quantize_in_place(copy);
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(copy[i]), std::bit_cast<std::uint32_t>(q[i]));
  }
}

TEST(HalfPrec, DecomposeAndParse) {
  auto f = decompose(HalfBits{0x3c00});
  EXPECT_EQ(f.sign, 0u);
  EXPECT_EQ(f.exponent, 15u);
  EXPECT_EQ(f.mantissa, 0u);
  EXPECT_EQ(f.category, "normal");
  EXPECT_EQ(f.value, 1.0f);
  EXPECT_EQ(decompose(HalfBits{0x0001}).category, "subnormal");
  EXPECT_EQ(decompose(HalfBits{0x8000}).category, "zero");
  EXPECT_EQ(decompose(HalfBits{0xfc00}).category, "inf");
  EXPECT_EQ(decompose(HalfBits{0x7e00}).category, "nan");
  EXPECT_EQ(parse_half("0x3c00").bits, 0x3c00);
  EXPECT_EQ(parse_half("65520").bits, 0x7c00);
  EXPECT_EQ(parse_half("-2").bits, 0xc000);
  EXPECT_THROW(parse_half("zzz"), std::invalid_argument);
  EXPECT_THROW(parse_half("0x1ffff"), std::invalid_argument);
}

TEST(LossScale, DefaultsToDynamic1024) {
  LossScale s;
  EXPECT_EQ(s.scale(), 1024.0f);
  EXPECT_EQ(s.policy(), LossScalePolicy::kDynamic);
  EXPECT_EQ(apply_loss_scale(0.5f, s), 512.0f);
}

TEST(LossScale, BacksOffOnOverflowAndGrowsAfterCleanInterval) {
  LossScaleOptions o;
  o.growth_interval = 3;
  LossScale s(o);
  s.update(true);
  EXPECT_EQ(s.scale(), 512.0f);
  s.update(false);
  s.update(false);
  EXPECT_EQ(s.scale(), 512.0f);
  s.update(false);
  EXPECT_EQ(s.scale(), 1024.0f);
  EXPECT_EQ(s.clean_steps(), 0u);
}

TEST(LossScale, ScaleStaysPositive) {
  LossScale s;
  for (int i = 0; i < 1000; ++i) s.update(true);
  EXPECT_GT(s.scale(), 0.0f);
}

TEST(LossScale, FixedNeverMoves) {
  LossScale s = LossScale::fixed(8.0f);
  s.update(true);
  for (int i = 0; i < 500; ++i) s.update(false);
  EXPECT_EQ(s.scale(), 8.0f);
}

TEST(LossScale, UnscaleRejectsNonFiniteWithoutTouchingValues) {
  LossScale s;
  std::vector<float> g = {2048.0f, std::numeric_limits<float>::infinity()};
  EXPECT_FALSE(s.unscale(g));
  EXPECT_EQ(g[0], 2048.0f);
  std::vector<float> ok = {2048.0f, -1024.0f};
  EXPECT_TRUE(s.unscale(ok));
  EXPECT_EQ(ok[0], 2.0f);
  EXPECT_EQ(ok[1], -1.0f);

  const UnscaleResult r = unscale_gradients(std::vector<float>{1.0f, NAN}, s);
  EXPECT_TRUE(r.skip);
  EXPECT_TRUE(r.grads.empty());
  EXPECT_EQ(s.scale(), 512.0f);
}

TEST(LossScale, RescuesGradientBelowHalfUnderflow) {
  const float g = std::ldexp(1.0f, -30);
  EXPECT_EQ(f16_to_f32(f32_to_f16(g)), 0.0f);
  LossScale s = LossScale::fixed(1024.0f);
  const float through_fp16 = f16_to_f32(f32_to_f16(g * s.scale()));
  std::vector<float> v = {through_fp16};
  ASSERT_TRUE(s.unscale(v));
  EXPECT_EQ(v[0], g);
}

}  // namespace
}  // namespace gradsync::halfprec
