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

#ifndef GRADSYNC_HALFPREC_H_
#define GRADSYNC_HALFPREC_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gradsync::halfprec {

// Raw IEEE-754 binary16 bit pattern: 1 sign, 5 exponent, 10 mantissa bits.
// FP16 tensors are stored as arrays of these, never widened in place.
struct HalfBits {
  std::uint16_t bits = 0;

  constexpr bool is_nan() const {
    return (bits & 0x7c00u) == 0x7c00u && (bits & 0x03ffu) != 0;
  }
  constexpr bool is_inf() const { return (bits & 0x7fffu) == 0x7c00u; }
  constexpr bool is_finite() const { return (bits & 0x7c00u) != 0x7c00u; }

  friend constexpr bool operator==(HalfBits a, HalfBits b) = default;
};

static_assert(sizeof(HalfBits) == 2);

inline constexpr HalfBits kHalfPositiveInf{0x7c00};
inline constexpr HalfBits kHalfNegativeInf{0xfc00};
inline constexpr HalfBits kHalfCanonicalNaN{0x7e00};
inline constexpr HalfBits kHalfMinSubnormal{0x0001};
inline constexpr HalfBits kHalfMax{0x7bff};
inline constexpr float kHalfMaxValue = 65504.0f;

// Round-to-nearest-even narrowing. Overflow produces signed infinity, every
// NaN input becomes kHalfCanonicalNaN.
HalfBits f32_to_f16(float x);

// Exact widening. NaN patterns keep their payload bits.
float f16_to_f32(HalfBits h);

// Elementwise f16_to_f32(f32_to_f16(x)).
std::vector<float> quantize_tensor(std::span<const float> values);
void quantize_in_place(std::span<float> values);

std::vector<HalfBits> to_half(std::span<const float> values);
std::vector<float> to_float(std::span<const HalfBits> values);

// Sign, biased exponent, mantissa and class of a pattern, for the CLI's
// inspect subcommand.
struct HalfFields {
  unsigned sign = 0;
  unsigned exponent = 0;
  unsigned mantissa = 0;
  std::string category;  // "zero", "subnormal", "normal", "inf", "nan"
  float value = 0.0f;
};

HalfFields decompose(HalfBits h);

// Parses "0x3c00" style hex patterns or decimal numbers (narrowed with
// f32_to_f16). Throws std::invalid_argument on malformed input.
HalfBits parse_half(const std::string& text);

}  // namespace gradsync::halfprec

#endif  // GRADSYNC_HALFPREC_H_
