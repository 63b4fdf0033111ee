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

#ifndef GRADSYNC_SCHEDULE_H_
#define GRADSYNC_SCHEDULE_H_

// Transport-independent all-reduce message schedules.
//
// A schedule is a list of synchronous steps. Within a step every transfer
// reads the sender's buffer as it was at the start of the step, so all
// transfers of a step may run concurrently. A step is either
//
//   kReduce  the receiver stages the incoming region as a raw contribution;
//            at the end of a run of consecutive kReduce steps each receiver
//            folds its own region together with everything staged for it,
//            in ascending source-rank order, and
//   kCopy    the receiver overwrites the region with the incoming data.
//
// Folding at the end of a run, rather than on arrival, pins the summation
// order independently of message timing, which keeps FP32 results bitwise
// reproducible across transports.
//
// Ring (2(p-1) steps): the buffer is cut into p contiguous chunks; rank r
// owns chunk r. Reduce-scatter step s sends chunk (r+s+1) mod p of rank r to
// its owner, then the all-gather passes owned chunks around the ring.
//
// Hierarchical (4(k-1) + 2(p/k-1) steps):
//   intra_reduce     reduce-scatter inside each group of k, then gather the
//                    group partial to the master: 2(k-1) steps
//   inter_allreduce  ring all-reduce across the p/k masters: 2(p/k-1) steps
//   intra_broadcast  scatter from the master, then ring all-gather inside
//                    the group: 2(k-1) steps

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gradsync/topology.h"
#include "json.hpp"

namespace gradsync::collectives {

enum class Algorithm { kRing, kHierarchical };
enum class StepOp { kReduce, kCopy };
enum class Phase {
  kReduceScatter,
  kAllGather,
  kIntraReduce,
  kInterAllReduce,
  kIntraBroadcast,
};

std::string_view to_string(Algorithm algorithm);
std::string_view to_string(StepOp op);
std::string_view to_string(Phase phase);
Algorithm algorithm_from_string(std::string_view name);

struct Transfer {
  int src = 0;
  int dst = 0;
  std::size_t offset = 0;  // elements
  std::size_t count = 0;   // elements
  std::size_t bytes = 0;
};

struct Step {
  Phase phase = Phase::kReduceScatter;
  StepOp op = StepOp::kReduce;
  std::vector<Transfer> transfers;
};

struct ReduceSchedule {
  Algorithm algorithm = Algorithm::kRing;
  bool selected_by_hybrid = false;
  int workers = 1;
  int group_size = 1;
  std::size_t elements = 0;
  std::size_t element_bytes = 4;
  std::vector<Step> steps;

  std::size_t total_steps() const { return steps.size(); }
  std::size_t payload_bytes() const { return elements * element_bytes; }
  std::size_t bytes_on_wire() const;
};

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Closed-form step counts.
constexpr std::uint64_t ring_step_count(std::uint64_t p) {
  return p <= 1 ? 0 : 2 * (p - 1);
}
constexpr std::uint64_t hierarchical_step_count(std::uint64_t p, std::uint64_t k) {
  return 4 * (k - 1) + 2 * (p / k - 1);
}

// Contiguous split of `elements` into `parts` chunks; the first
// elements % parts chunks carry one extra element.
struct ChunkRange {
  std::size_t offset = 0;
  std::size_t count = 0;
};
ChunkRange chunk_range(std::size_t elements, int parts, int index);

// Ring over all topology.workers() ranks; the group size is only recorded
// for link classification.
ReduceSchedule make_ring_schedule(const Topology& topo, std::size_t elements,
                                  std::size_t element_bytes);
ReduceSchedule make_hierarchical_schedule(const Topology& topo,
                                          std::size_t elements,
                                          std::size_t element_bytes);

// Strictly below the threshold -> hierarchical, otherwise ring. A zero
// threshold therefore always selects ring.
Algorithm select_hybrid(std::size_t batch_bytes, std::size_t eta_threshold_bytes);

ReduceSchedule make_schedule(Algorithm algorithm, const Topology& topo,
                             std::size_t elements, std::size_t element_bytes);
ReduceSchedule make_hybrid_schedule(const Topology& topo, std::size_t elements,
                                    std::size_t element_bytes,
                                    std::size_t eta_threshold_bytes);

// Structural check: ranks in range, regions inside the buffer, no
// (src, dst) pair repeated within a step, no self transfers. Throws
// ScheduleError.
void validate(const ReduceSchedule& schedule);

nlohmann::ordered_json to_json(const ReduceSchedule& schedule);
ReduceSchedule schedule_from_json(const nlohmann::ordered_json& j);

}  // namespace gradsync::collectives

#endif  // GRADSYNC_SCHEDULE_H_
