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

#include "gradsync/allreduce.h"

#include <algorithm>
#include <string>

namespace gradsync::collectives {

template <typename T>
RankExecutor<T>::RankExecutor(const ReduceSchedule& schedule, int rank,
                              std::vector<T> buffer, ReduceOp op)
    : schedule_(schedule), rank_(rank), buffer_(std::move(buffer)), op_(op) {
  if (rank < 0 || rank >= schedule.workers) {
    throw ContractViolation("rank " + std::to_string(rank) + " outside schedule of " +
                            std::to_string(schedule.workers) + " workers");
  }
  if (buffer_.size() != schedule.elements) {
    throw ContractViolation("rank " + std::to_string(rank) + " buffer has " +
                            std::to_string(buffer_.size()) + " elements, schedule expects " +
                            std::to_string(schedule.elements));
  }
  for (std::size_t s = 0; s < schedule.steps.size(); ++s) {
    if (schedule.steps[s].op == StepOp::kReduce) {
      last_reduce_step_ = s;
      has_reduce_steps_ = true;
    }
  }
}

template <typename T>
std::vector<OutgoingMessage<T>> RankExecutor<T>::outgoing(std::size_t step) const {
  std::vector<OutgoingMessage<T>> out;
  const auto& transfers = schedule_.steps.at(step).transfers;
  for (std::size_t i = 0; i < transfers.size(); ++i) {
    const Transfer& t = transfers[i];
    if (t.src != rank_) continue;
    const auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(t.offset);
    out.push_back(OutgoingMessage<T>{
        t.dst, i, std::vector<T>(begin, begin + static_cast<std::ptrdiff_t>(t.count))});
  }
  return out;
}

template <typename T>
std::vector<int> RankExecutor<T>::expected_sources(std::size_t step) const {
  std::vector<int> sources;
  for (const Transfer& t : schedule_.steps.at(step).transfers) {
    if (t.dst == rank_) sources.push_back(t.src);
  }
  std::sort(sources.begin(), sources.end());
  return sources;
}

template <typename T>
const Transfer* RankExecutor<T>::find_incoming(std::size_t step, int src) const {
  for (const Transfer& t : schedule_.steps.at(step).transfers) {
    if (t.dst == rank_ && t.src == src) return &t;
  }
  return nullptr;
}

template <typename T>
void RankExecutor<T>::deliver(std::size_t step, int src, std::span<const T> data) {
  const Transfer* t = find_incoming(step, src);
  if (t == nullptr) {
    throw ContractViolation("step " + std::to_string(step) + ": unexpected message " +
                            std::to_string(src) + "->" + std::to_string(rank_));
  }
  if (data.size() != t->count) {
    throw ContractViolation("step " + std::to_string(step) + ": message " +
                            std::to_string(src) + "->" + std::to_string(rank_) +
                            " carries " + std::to_string(data.size()) +
                            " elements, expected " + std::to_string(t->count));
  }
  if (schedule_.steps[step].op == StepOp::kReduce) {
    staged_.push_back(Staged{src, t->offset, std::vector<T>(data.begin(), data.end())});
  } else {
    std::copy(data.begin(), data.end(),
              buffer_.begin() + static_cast<std::ptrdiff_t>(t->offset));
  }
}

template <typename T>
void RankExecutor<T>::finish_step(std::size_t step) {
  const auto& steps = schedule_.steps;
  if (steps.at(step).op != StepOp::kReduce) return;
  const bool run_ends = step + 1 == steps.size() || steps[step + 1].op != StepOp::kReduce;
  if (run_ends) fold(has_reduce_steps_ && step == last_reduce_step_);
}

template <typename T>
void RankExecutor<T>::fold(bool final_run) {
  // Stable sort by region keeps the per-region source order intact; within
  // a region the contributions are then ordered by source rank with this
  // rank's own data slotted in at its rank.
  std::stable_sort(staged_.begin(), staged_.end(),
                   [](const Staged& a, const Staged& b) { return a.offset < b.offset; });
  std::size_t i = 0;
  while (i < staged_.size()) {
    std::size_t j = i;
    while (j < staged_.size() && staged_[j].offset == staged_[i].offset) ++j;

    const std::size_t offset = staged_[i].offset;
    const std::size_t count = staged_[i].data.size();
    std::vector<std::pair<int, const T*>> parts;
    parts.reserve(j - i + 1);
    parts.emplace_back(rank_, buffer_.data() + offset);
    for (std::size_t s = i; s < j; ++s) {
      if (staged_[s].data.size() != count) {
        throw ContractViolation("rank " + std::to_string(rank_) +
                                ": staged regions at offset " + std::to_string(offset) +
                                " differ in length");
      }
      parts.emplace_back(staged_[s].src, staged_[s].data.data());
    }
    std::sort(parts.begin(), parts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<T> acc(parts.front().second, parts.front().second + count);
    for (std::size_t p = 1; p < parts.size(); ++p) {
      const T* src = parts[p].second;
      for (std::size_t e = 0; e < count; ++e) {
        acc[e] = ElementOps<T>::combine(acc[e], src[e]);
      }
    }
    if (final_run && op_ == ReduceOp::kMean) {
      for (T& v : acc) v = ElementOps<T>::divide(v, schedule_.workers);
    }
    std::copy(acc.begin(), acc.end(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset));
    i = j;
  }
  staged_.clear();
}

template class RankExecutor<float>;
template class RankExecutor<halfprec::HalfBits>;

template <typename T>
std::vector<std::vector<T>> execute_in_memory(const ReduceSchedule& schedule,
                                              std::vector<std::vector<T>> inputs,
                                              ReduceOp op) {
  if (inputs.size() != static_cast<std::size_t>(schedule.workers)) {
    throw ContractViolation("expected " + std::to_string(schedule.workers) +
                            " buffers, got " + std::to_string(inputs.size()));
  }
  std::vector<RankExecutor<T>> ranks;
  ranks.reserve(inputs.size());
  for (int r = 0; r < schedule.workers; ++r) {
    ranks.emplace_back(schedule, r, std::move(inputs[r]), op);
  }

  for (std::size_t s = 0; s < schedule.steps.size(); ++s) {
    // Collect every send before any delivery: transfers in a step see the
    // buffers as they were when the step began.
    std::vector<std::pair<int, OutgoingMessage<T>>> in_flight;
    for (auto& rank : ranks) {
      for (auto& msg : rank.outgoing(s)) in_flight.emplace_back(rank.rank(), std::move(msg));
    }
    for (auto& [src, msg] : in_flight) {
      ranks[msg.dst].deliver(s, src, msg.data);
    }
    for (auto& rank : ranks) rank.finish_step(s);
  }

  std::vector<std::vector<T>> outputs;
  outputs.reserve(ranks.size());
  for (auto& rank : ranks) {
    std::vector<T> out = rank.take_buffer();
    if (schedule.workers == 1 && op == ReduceOp::kMean) {
      for (T& v : out) v = ElementOps<T>::divide(v, 1);
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

template std::vector<std::vector<float>> execute_in_memory(
    const ReduceSchedule&, std::vector<std::vector<float>>, ReduceOp);
template std::vector<std::vector<halfprec::HalfBits>> execute_in_memory(
    const ReduceSchedule&, std::vector<std::vector<halfprec::HalfBits>>, ReduceOp);

namespace {

template <typename T>
std::size_t check_buffers(const std::vector<std::vector<T>>& buffers,
                          const Topology& topo) {
  if (buffers.size() != static_cast<std::size_t>(topo.workers())) {
    throw ContractViolation("expected " + std::to_string(topo.workers()) +
                            " buffers, got " + std::to_string(buffers.size()));
  }
  const std::size_t length = buffers.front().size();
  for (std::size_t r = 0; r < buffers.size(); ++r) {
    if (buffers[r].size() != length) {
      throw ContractViolation("buffer of rank " + std::to_string(r) + " has " +
                              std::to_string(buffers[r].size()) +
                              " elements, rank 0 has " + std::to_string(length));
    }
  }
  return length;
}

template <typename T>
AllReduceResult<T> run(ReduceSchedule schedule, std::vector<std::vector<T>> buffers,
                       ReduceOp op) {
  AllReduceResult<T> result;
  result.outputs = execute_in_memory(schedule, std::move(buffers), op);
  result.schedule = std::move(schedule);
  return result;
}

}  // namespace

AllReduceResult<float> ring_allreduce(std::vector<std::vector<float>> buffers,
                                      const Topology& topo, ReduceOp op) {
  const std::size_t length = check_buffers(buffers, topo);
  return run(make_ring_schedule(topo, length, 4), std::move(buffers), op);
}

AllReduceResult<float> hierarchical_allreduce(std::vector<std::vector<float>> buffers,
                                              const Topology& topo, ReduceOp op) {
  const std::size_t length = check_buffers(buffers, topo);
  return run(make_hierarchical_schedule(topo, length, 4), std::move(buffers), op);
}

AllReduceResult<float> hybrid_allreduce(std::vector<std::vector<float>> buffers,
                                        const Topology& topo,
                                        std::size_t eta_threshold_bytes, ReduceOp op) {
  const std::size_t length = check_buffers(buffers, topo);
  return run(make_hybrid_schedule(topo, length, 4, eta_threshold_bytes),
             std::move(buffers), op);
}

AllReduceResult<halfprec::HalfBits> allreduce_f16(
    std::vector<std::vector<halfprec::HalfBits>> buffers, const Topology& topo,
    Algorithm algorithm, ReduceOp op) {
  const std::size_t length = check_buffers(buffers, topo);
  return run(make_schedule(algorithm, topo, length, 2), std::move(buffers), op);
}

BatchAllReduceResult hybrid_allreduce(std::span<const fusion::FusedBatch> per_worker,
                                      const Topology& topo,
                                      std::size_t eta_threshold_bytes, ReduceOp op) {
  if (per_worker.size() != static_cast<std::size_t>(topo.workers())) {
    throw ContractViolation("expected one fused batch per worker");
  }
  std::vector<std::vector<float>> buffers;
  buffers.reserve(per_worker.size());
  for (const fusion::FusedBatch& batch : per_worker) {
    buffers.push_back(fusion::payload_as_floats(batch.payload));
  }
  AllReduceResult<float> reduced =
      hybrid_allreduce(std::move(buffers), topo, eta_threshold_bytes, op);

  BatchAllReduceResult result;
  result.schedule = std::move(reduced.schedule);
  for (std::size_t r = 0; r < per_worker.size(); ++r) {
    fusion::FusedBatch out;
    out.payload = fusion::floats_as_payload(reduced.outputs[r]);
    out.unpack_map = per_worker[r].unpack_map;
    out.from_flush = per_worker[r].from_flush;
    result.batches.push_back(std::move(out));
  }
  return result;
}

}  // namespace gradsync::collectives
