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

#include "gradsync/fusion.h"

#include <cstring>

#include "json.hpp"

namespace gradsync::fusion {

std::optional<FusedBatch> FusionBuffer::enqueue(GradientTensor tensor) {
  if (tensor.payload.empty()) {
    throw std::invalid_argument("cannot fuse empty tensor " + tensor.id.str());
  }
  pending_bytes_ += tensor.payload.size();
  pending_.push_back(std::move(tensor));
  if (pending_bytes_ > theta_) return drain(false);
  return std::nullopt;
}

std::optional<FusedBatch> FusionBuffer::flush() {
  if (pending_.empty()) return std::nullopt;
  return drain(true);
}

FusedBatch FusionBuffer::drain(bool from_flush) {
  FusedBatch batch;
  batch.from_flush = from_flush;
  batch.payload.reserve(pending_bytes_);
  batch.unpack_map.reserve(pending_.size());
  for (GradientTensor& t : pending_) {
    batch.unpack_map.push_back(
        UnpackEntry{std::move(t.id), batch.payload.size(), t.payload.size()});
    batch.payload.insert(batch.payload.end(), t.payload.begin(), t.payload.end());
  }
  pending_.clear();
  pending_bytes_ = 0;
  return batch;
}

std::vector<GradientTensor> unpack(const FusedBatch& batch) {
  std::vector<GradientTensor> out;
  out.reserve(batch.unpack_map.size());
  std::size_t expected_offset = 0;
  for (const UnpackEntry& e : batch.unpack_map) {
    if (e.offset != expected_offset) {
      throw IntegrityError("unpack map entry " + e.id.str() + " at offset " +
                           std::to_string(e.offset) + ", expected " +
                           std::to_string(expected_offset));
    }
    if (e.length > batch.payload.size() ||
        e.offset > batch.payload.size() - e.length) {
      throw IntegrityError("unpack map entry " + e.id.str() +
                           " runs past the payload end");
    }
    const auto begin = batch.payload.begin() + static_cast<std::ptrdiff_t>(e.offset);
    out.push_back(GradientTensor{
        e.id, std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(e.length))});
    expected_offset += e.length;
  }
  if (expected_offset != batch.payload.size()) {
    throw IntegrityError("unpack map covers " + std::to_string(expected_offset) +
                         " of " + std::to_string(batch.payload.size()) + " bytes");
  }
  return out;
}

std::vector<float> payload_as_floats(std::span<const std::uint8_t> payload) {
  if (payload.size() % sizeof(float) != 0) {
    throw IntegrityError("payload size " + std::to_string(payload.size()) +
                         " is not a multiple of 4");
  }
  std::vector<float> out(payload.size() / sizeof(float));
  std::memcpy(out.data(), payload.data(), payload.size());
  return out;
}

std::vector<std::uint8_t> floats_as_payload(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size() * sizeof(float));
  std::memcpy(out.data(), values.data(), out.size());
  return out;
}

FusionTraceRecord make_trace_record(std::uint64_t step,
                                    std::uint64_t batch_index,
                                    const FusedBatch& batch) {
  FusionTraceRecord record;
  record.step = step;
  record.batch_index = batch_index;
  record.bytes = batch.bytes();
  for (const UnpackEntry& e : batch.unpack_map) {
    record.tensor_ids.push_back(e.id.str());
  }
  return record;
}

std::string to_json_line(const FusionTraceRecord& record) {
  nlohmann::ordered_json j;
  j["step"] = record.step;
  j["batch_index"] = record.batch_index;
  j["tensor_ids"] = record.tensor_ids;
  j["bytes"] = record.bytes;
  return j.dump();
}

}  // namespace gradsync::fusion
