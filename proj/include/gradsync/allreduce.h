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

#ifndef GRADSYNC_ALLREDUCE_H_
#define GRADSYNC_ALLREDUCE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "gradsync/errors.h"
#include "gradsync/fusion.h"
#include "gradsync/halfprec.h"
#include "gradsync/schedule.h"
#include "gradsync/topology.h"

namespace gradsync::collectives {

enum class ReduceOp { kSum, kMean };

// Element arithmetic. FP16 combines widen both operands, add in FP32 and
// narrow the result once.
template <typename T>
struct ElementOps;

template <>
struct ElementOps<float> {
  static constexpr std::size_t kBytes = 4;
  static float combine(float a, float b) { return a + b; }
  static float divide(float a, int n) { return a / static_cast<float>(n); }
};

template <>
struct ElementOps<halfprec::HalfBits> {
  static constexpr std::size_t kBytes = 2;
  static halfprec::HalfBits combine(halfprec::HalfBits a, halfprec::HalfBits b) {
    return halfprec::f32_to_f16(halfprec::f16_to_f32(a) + halfprec::f16_to_f32(b));
  }
  static halfprec::HalfBits divide(halfprec::HalfBits a, int n) {
    return halfprec::f32_to_f16(halfprec::f16_to_f32(a) / static_cast<float>(n));
  }
};

template <typename T>
struct OutgoingMessage {
  int dst = 0;
  std::size_t transfer_index = 0;
  std::vector<T> data;
};

// Executes one rank's share of a schedule. Both the in-memory engine and the
// TCP worker drive this class, so they perform the same arithmetic in the
// same order. Per step the driver calls outgoing(), then deliver() once per
// expected source, then finish_step().
template <typename T>
class RankExecutor {
 public:
  RankExecutor(const ReduceSchedule& schedule, int rank, std::vector<T> buffer,
               ReduceOp op);

  int rank() const { return rank_; }

  // Payloads this rank sends in `step`, read from the current buffer.
  std::vector<OutgoingMessage<T>> outgoing(std::size_t step) const;

  // Ranks this rank receives from in `step`, ascending.
  std::vector<int> expected_sources(std::size_t step) const;

  // Throws ContractViolation if (step, src) is not an expected transfer or
  // the payload has the wrong length.
  void deliver(std::size_t step, int src, std::span<const T> data);

  // Applies the fold if `step` ends a run of reduce steps.
  void finish_step(std::size_t step);

  const std::vector<T>& buffer() const { return buffer_; }
  std::vector<T> take_buffer() { return std::move(buffer_); }

 private:
  struct Staged {
    int src;
    std::size_t offset;
    std::vector<T> data;
  };

  const Transfer* find_incoming(std::size_t step, int src) const;
  void fold(bool final_run);

  const ReduceSchedule& schedule_;
  int rank_;
  std::vector<T> buffer_;
  ReduceOp op_;
  std::size_t last_reduce_step_ = 0;
  bool has_reduce_steps_ = false;
  std::vector<Staged> staged_;
};

extern template class RankExecutor<float>;
extern template class RankExecutor<halfprec::HalfBits>;

// Runs a schedule over an in-memory transport. `inputs` holds one buffer per
// rank, all schedule.elements long.
template <typename T>
std::vector<std::vector<T>> execute_in_memory(const ReduceSchedule& schedule,
                                              std::vector<std::vector<T>> inputs,
                                              ReduceOp op);

extern template std::vector<std::vector<float>> execute_in_memory(
    const ReduceSchedule&, std::vector<std::vector<float>>, ReduceOp);
extern template std::vector<std::vector<halfprec::HalfBits>> execute_in_memory(
    const ReduceSchedule&, std::vector<std::vector<halfprec::HalfBits>>, ReduceOp);

template <typename T>
struct AllReduceResult {
  std::vector<std::vector<T>> outputs;
  ReduceSchedule schedule;
};

// All buffers must have the same length and there must be one per worker;
// otherwise ContractViolation.
AllReduceResult<float> ring_allreduce(std::vector<std::vector<float>> buffers,
                                      const Topology& topo,
                                      ReduceOp op = ReduceOp::kSum);
AllReduceResult<float> hierarchical_allreduce(std::vector<std::vector<float>> buffers,
                                              const Topology& topo,
                                              ReduceOp op = ReduceOp::kSum);
AllReduceResult<float> hybrid_allreduce(std::vector<std::vector<float>> buffers,
                                        const Topology& topo,
                                        std::size_t eta_threshold_bytes,
                                        ReduceOp op = ReduceOp::kSum);

// FP16 payloads; byte accounting uses 2-byte elements.
AllReduceResult<halfprec::HalfBits> allreduce_f16(
    std::vector<std::vector<halfprec::HalfBits>> buffers, const Topology& topo,
    Algorithm algorithm, ReduceOp op = ReduceOp::kSum);

// Hybrid all-reduce of one fused batch per worker (identical layouts). The
// payload is reduced as FP32 elements; the unpack maps are carried over.
struct BatchAllReduceResult {
  std::vector<fusion::FusedBatch> batches;
  ReduceSchedule schedule;
};
BatchAllReduceResult hybrid_allreduce(std::span<const fusion::FusedBatch> per_worker,
                                      const Topology& topo,
                                      std::size_t eta_threshold_bytes,
                                      ReduceOp op = ReduceOp::kSum);

}  // namespace gradsync::collectives

#endif  // GRADSYNC_ALLREDUCE_H_
