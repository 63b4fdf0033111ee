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

#include "gradsync/checkpoint.h"

#include <fstream>
#include <iterator>

#include "gradsync/byte_io.h"

namespace gradsync::lars {

namespace {

constexpr char kMagic[4] = {'L', 'A', 'R', 'S'};
constexpr std::uint8_t kFlagDecayExempt = 1u << 0;
constexpr std::uint8_t kFlagLarsEnabled = 1u << 1;

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const OptimizerState& state) {
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u16(kCheckpointVersion);
  w.u64(state.step);
  w.u32(static_cast<std::uint32_t>(state.groups.size()));
  for (const ParamGroup& g : state.groups) {
    if (g.velocity.size() != g.master_w.size()) {
      throw CheckpointError("group '" + g.name + "' has mismatched velocity");
    }
    w.str(g.name);
    w.u8(static_cast<std::uint8_t>(g.kind));
    std::uint8_t flags = 0;
    if (g.decay_exempt) flags |= kFlagDecayExempt;
    if (g.lars_enabled) flags |= kFlagLarsEnabled;
    w.u8(flags);
    w.u64(g.master_w.size());
    w.f32_array(g.master_w);
    w.f32_array(g.velocity);
  }
  return w.take();
}

OptimizerState decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  OptimizerState state;
  try {
    for (char c : kMagic) {
      if (r.u8() != static_cast<std::uint8_t>(c)) {
        throw CheckpointError("bad magic, not a LARS checkpoint");
      }
    }
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            std::to_string(version));
    }
    state.step = r.u64();
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      ParamGroup g;
      g.name = r.str();
      const std::uint8_t kind = r.u8();
      if (kind > static_cast<std::uint8_t>(ParamKind::kBnGamma)) {
        throw CheckpointError("group '" + g.name + "' has unknown kind " +
                              std::to_string(kind));
      }
      g.kind = static_cast<ParamKind>(kind);
      const std::uint8_t flags = r.u8();
      g.decay_exempt = (flags & kFlagDecayExempt) != 0;
      g.lars_enabled = (flags & kFlagLarsEnabled) != 0;
      const std::uint64_t n = r.u64();
      g.master_w = r.f32_array(n);
      g.velocity = r.f32_array(n);
      g.grad.assign(n, 0.0f);
      g.refresh_working_copy();
      state.groups.push_back(std::move(g));
    }
  } catch (const std::out_of_range&) {
    throw CheckpointError("checkpoint truncated");
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return state;
}

void save_checkpoint(const std::filesystem::path& path,
                     const OptimizerState& state) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

OptimizerState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace gradsync::lars
