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

#ifndef GRADSYNC_FUSION_H_
#define GRADSYNC_FUSION_H_

// Tensor fusion: gradient tensors arrive in backward order and are packed
// into one contiguous payload until the pool holds more than `theta` bytes.
// Only then does the fused payload go out to a collective. The training
// loop drains whatever is left with flush() at the end of every backward
// pass; there is no timer.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradsync::fusion {

// Stable layer name plus the per-step arrival index.
struct TensorId {
  std::string layer;
  std::uint32_t seq = 0;

  std::string str() const { return layer + "#" + std::to_string(seq); }
  friend bool operator==(const TensorId&, const TensorId&) = default;
};

struct GradientTensor {
  TensorId id;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const GradientTensor&, const GradientTensor&) = default;
};

struct UnpackEntry {
  TensorId id;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct FusedBatch {
  std::vector<std::uint8_t> payload;
  std::vector<UnpackEntry> unpack_map;
  bool from_flush = false;

  std::size_t bytes() const { return payload.size(); }
};

class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FusionBuffer {
 public:
  explicit FusionBuffer(std::size_t theta_bytes) : theta_(theta_bytes) {}

  std::size_t theta() const { return theta_; }
  std::size_t pending_bytes() const { return pending_bytes_; }
  std::size_t pending_count() const { return pending_.size(); }

  // Appends `tensor`. Emits the pool as one batch as soon as it holds
  // strictly more than theta bytes, counting the tensor that crossed.
  // Throws std::invalid_argument for an empty payload.
  std::optional<FusedBatch> enqueue(GradientTensor tensor);

  // Emits whatever is pending, even if below theta. Empty pool -> nullopt.
  std::optional<FusedBatch> flush();

 private:
  FusedBatch drain(bool from_flush);

  std::size_t theta_;
  std::vector<GradientTensor> pending_;
  std::size_t pending_bytes_ = 0;
};

// Splits a batch back into its tensors. Throws IntegrityError when the map
// does not tile the payload contiguously.
std::vector<GradientTensor> unpack(const FusedBatch& batch);

// Batch payloads as FP32 elements and back (little-endian host layout).
std::vector<float> payload_as_floats(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> floats_as_payload(std::span<const float> values);

// One JSON-lines trace record per emitted batch.
struct FusionTraceRecord {
  std::uint64_t step = 0;
  std::uint64_t batch_index = 0;
  std::vector<std::string> tensor_ids;
  std::size_t bytes = 0;
};

FusionTraceRecord make_trace_record(std::uint64_t step,
                                    std::uint64_t batch_index,
                                    const FusedBatch& batch);
std::string to_json_line(const FusionTraceRecord& record);

}  // namespace gradsync::fusion

#endif  // GRADSYNC_FUSION_H_
