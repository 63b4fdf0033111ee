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

#include "gradsync/halfprec.h"

#include <bit>
#include <cerrno>
#include <cstdlib>
#include <stdexcept>

namespace gradsync::halfprec {

namespace {

constexpr std::uint32_t kF32ExpMask = 0x7f800000u;
// 65520.0f: halfway between 65504 and the first unrepresentable power 65536.
// The tie rounds to the even neighbour, which is infinity.
constexpr std::uint32_t kOverflowThreshold = 0x477ff000u;
// 2^-14, the smallest normal binary16 magnitude.
constexpr std::uint32_t kMinNormal = 0x38800000u;
// 2^-25, half the smallest subnormal. Ties at this point go to zero.
constexpr std::uint32_t kFlushToZeroBound = 0x33000000u;

}  // namespace

HalfBits f32_to_f16(float x) {
  const std::uint32_t f = std::bit_cast<std::uint32_t>(x);
  const auto sign = static_cast<std::uint16_t>((f >> 16) & 0x8000u);
  const std::uint32_t abs = f & 0x7fffffffu;

  if (abs > kF32ExpMask) return kHalfCanonicalNaN;
  if (abs >= kOverflowThreshold) {
    return HalfBits{static_cast<std::uint16_t>(sign | 0x7c00u)};
  }

  if (abs < kMinNormal) {
    if (abs <= kFlushToZeroBound) return HalfBits{sign};
    // Result is a subnormal count of 2^-24 units, possibly carrying into the
    // smallest normal (0x0400), which is the correct encoding as well.
    const std::uint32_t mantissa = (abs & 0x007fffffu) | 0x00800000u;
    const std::uint32_t exponent = abs >> 23;
    const std::uint32_t shift = 126u - exponent;  // in [14, 24]
    std::uint32_t q = mantissa >> shift;
    const std::uint32_t rem = mantissa & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1u);
    if (rem > halfway || (rem == halfway && (q & 1u))) ++q;
    return HalfBits{static_cast<std::uint16_t>(sign | q)};
  }

  std::uint32_t h = (abs >> 13) - (112u << 10);
  const std::uint32_t rem = abs & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
  return HalfBits{static_cast<std::uint16_t>(sign | h)};
}

float f16_to_f32(HalfBits h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h.bits & 0x8000u) << 16;
  const std::uint32_t exponent = (h.bits >> 10) & 0x1fu;
  std::uint32_t mantissa = h.bits & 0x03ffu;

  if (exponent == 0x1fu) {
    return std::bit_cast<float>(sign | kF32ExpMask | (mantissa << 13));
  }
  if (exponent == 0) {
    if (mantissa == 0) return std::bit_cast<float>(sign);
    // Renormalize the subnormal: value = mantissa * 2^-24.
    std::uint32_t e = 113;
    while ((mantissa & 0x0400u) == 0) {
      mantissa <<= 1;
      --e;
    }
    mantissa &= 0x03ffu;
    return std::bit_cast<float>(sign | (e << 23) | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent + 112u) << 23) |
                              (mantissa << 13));
}

std::vector<float> quantize_tensor(std::span<const float> values) {
  std::vector<float> out(values.begin(), values.end());
  quantize_in_place(out);
  return out;
}

void quantize_in_place(std::span<float> values) {
  for (float& v : values) v = f16_to_f32(f32_to_f16(v));
}

std::vector<HalfBits> to_half(std::span<const float> values) {
  std::vector<HalfBits> out;
  out.reserve(values.size());
  for (float v : values) out.push_back(f32_to_f16(v));
  return out;
}

std::vector<float> to_float(std::span<const HalfBits> values) {
  std::vector<float> out;
  out.reserve(values.size());
  for (HalfBits h : values) out.push_back(f16_to_f32(h));
  return out;
}

HalfFields decompose(HalfBits h) {
  HalfFields fields;
  fields.sign = (h.bits >> 15) & 1u;
  fields.exponent = (h.bits >> 10) & 0x1fu;
  fields.mantissa = h.bits & 0x03ffu;
  fields.value = f16_to_f32(h);
  if (fields.exponent == 0x1f) {
    fields.category = fields.mantissa == 0 ? "inf" : "nan";
  } else if (fields.exponent == 0) {
    fields.category = fields.mantissa == 0 ? "zero" : "subnormal";
  } else {
    fields.category = "normal";
  }
  return fields;
}

HalfBits parse_half(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty half-precision literal");
  const bool hex = text.size() > 2 && text[0] == '0' &&
                   (text[1] == 'x' || text[1] == 'X');
  errno = 0;
  char* end = nullptr;
  if (hex) {
    const unsigned long pattern = std::strtoul(text.c_str() + 2, &end, 16);
    if (*end != '\0' || errno != 0 || pattern > 0xffffu) {
      throw std::invalid_argument("not a 16-bit hex pattern: " + text);
    }
    return HalfBits{static_cast<std::uint16_t>(pattern)};
  }
  const float value = std::strtof(text.c_str(), &end);
  if (*end != '\0' || end == text.c_str()) {
    throw std::invalid_argument("not a decimal number: " + text);
  }
  // ERANGE on underflow/overflow is fine: strtof already returned the
  // correctly rounded float (0 or inf), which narrows as usual.
  return f32_to_f16(value);
}

}  // namespace gradsync::halfprec
