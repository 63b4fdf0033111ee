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

#ifndef GRADSYNC_CHECKPOINT_H_
#define GRADSYNC_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradsync/lars.h"

namespace gradsync::lars {

// Optimizer state file, all integers little-endian:
//
//   char[4]  magic "LARS"
//   u16      version (kCheckpointVersion)
//   u64      step
//   u32      group count
//   per group:
//     u32    name length, then that many UTF-8 bytes
//     u8     kind (ParamKind)
//     u8     flags: bit 0 decay_exempt, bit 1 lars_enabled
//     u64    element count n
//     f32[n] master weights
//     f32[n] velocity
//
// The FP16 working copy is not stored; it is re-derived from the master
// weights on load. Gradients are transient and not stored either.
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<ParamGroup> groups;
};

std::vector<std::uint8_t> encode_checkpoint(const OptimizerState& state);
OptimizerState decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path,
                     const OptimizerState& state);
OptimizerState load_checkpoint(const std::filesystem::path& path);

}  // namespace gradsync::lars

#endif  // GRADSYNC_CHECKPOINT_H_
