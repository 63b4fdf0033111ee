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

#include "gradsync/schedule.h"

#include <set>
#include <utility>

namespace gradsync::collectives {

namespace {

int mod(int a, int n) { return ((a % n) + n) % n; }

Transfer make_transfer(int src, int dst, ChunkRange chunk,
                       std::size_t element_bytes) {
  return Transfer{src, dst, chunk.offset, chunk.count, chunk.count * element_bytes};
}

// Appends the 2(n-1) steps of a ring all-reduce over `ranks` (listed in
// ascending order), chunking the whole buffer into ranks.size() pieces.
void append_ring(std::vector<Step>& steps, const std::vector<std::vector<int>>& rings,
                 std::size_t elements, std::size_t element_bytes,
                 Phase reduce_phase, Phase gather_phase) {
  const int n = static_cast<int>(rings.front().size());
  for (int s = 0; s < n - 1; ++s) {
    Step step{reduce_phase, StepOp::kReduce, {}};
    for (const auto& ring : rings) {
      for (int i = 0; i < n; ++i) {
        const int owner = mod(i + s + 1, n);
        step.transfers.push_back(make_transfer(
            ring[i], ring[owner], chunk_range(elements, n, owner), element_bytes));
      }
    }
    steps.push_back(std::move(step));
  }
  for (int s = 0; s < n - 1; ++s) {
    Step step{gather_phase, StepOp::kCopy, {}};
    for (const auto& ring : rings) {
      for (int i = 0; i < n; ++i) {
        step.transfers.push_back(make_transfer(ring[i], ring[mod(i + 1, n)],
                                               chunk_range(elements, n, mod(i - s, n)),
                                               element_bytes));
      }
    }
    steps.push_back(std::move(step));
  }
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  return algorithm == Algorithm::kRing ? "ring" : "hierarchical";
}

std::string_view to_string(StepOp op) {
  return op == StepOp::kReduce ? "reduce" : "copy";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kReduceScatter:
      return "reduce_scatter";
    case Phase::kAllGather:
      return "all_gather";
    case Phase::kIntraReduce:
      return "intra_reduce";
    case Phase::kInterAllReduce:
      return "inter_allreduce";
    case Phase::kIntraBroadcast:
      return "intra_broadcast";
  }
  return "unknown";
}

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "ring") return Algorithm::kRing;
  if (name == "hierarchical") return Algorithm::kHierarchical;
  throw std::invalid_argument("unknown all-reduce algorithm: " + std::string(name));
}

namespace {

Phase phase_from_string(std::string_view name) {
  for (Phase p : {Phase::kReduceScatter, Phase::kAllGather, Phase::kIntraReduce,
                  Phase::kInterAllReduce, Phase::kIntraBroadcast}) {
    if (to_string(p) == name) return p;
  }
  throw ScheduleError("unknown phase tag: " + std::string(name));
}

StepOp op_from_string(std::string_view name) {
  if (name == "reduce") return StepOp::kReduce;
  if (name == "copy") return StepOp::kCopy;
  throw ScheduleError("unknown step op: " + std::string(name));
}

}  // namespace

std::size_t ReduceSchedule::bytes_on_wire() const {
  std::size_t total = 0;
  for (const Step& step : steps) {
    for (const Transfer& t : step.transfers) total += t.bytes;
  }
  return total;
}

ChunkRange chunk_range(std::size_t elements, int parts, int index) {
  const auto n = static_cast<std::size_t>(parts);
  const auto i = static_cast<std::size_t>(index);
  const std::size_t base = elements / n;
  const std::size_t extra = elements % n;
  return ChunkRange{i * base + std::min(i, extra), base + (i < extra ? 1 : 0)};
}

ReduceSchedule make_ring_schedule(const Topology& topo, std::size_t elements,
                                  std::size_t element_bytes) {
  ReduceSchedule schedule;
  schedule.algorithm = Algorithm::kRing;
  schedule.workers = topo.workers();
  schedule.group_size = topo.group_size();
  schedule.elements = elements;
  schedule.element_bytes = element_bytes;
  if (topo.workers() < 2) return schedule;

  std::vector<int> ring(static_cast<std::size_t>(topo.workers()));
  for (int r = 0; r < topo.workers(); ++r) ring[r] = r;
  append_ring(schedule.steps, {ring}, elements, element_bytes,
              Phase::kReduceScatter, Phase::kAllGather);
  return schedule;
}

ReduceSchedule make_hierarchical_schedule(const Topology& topo,
                                          std::size_t elements,
                                          std::size_t element_bytes) {
  ReduceSchedule schedule;
  schedule.algorithm = Algorithm::kHierarchical;
  schedule.workers = topo.workers();
  schedule.group_size = topo.group_size();
  schedule.elements = elements;
  schedule.element_bytes = element_bytes;

  const int k = topo.group_size();
  const int groups = topo.group_count();
  std::vector<std::vector<int>> group_rings;
  for (int g = 0; g < groups; ++g) group_rings.push_back(topo.group_members(g));

  if (k > 1) {
    // Reduce-scatter inside each group, then gather partials to the master.
    // The full 2(k-1) step budget is charged to intra_reduce.
    std::vector<Step> ring_steps;
    append_ring(ring_steps, group_rings, elements, element_bytes,
                Phase::kIntraReduce, Phase::kIntraReduce);
    for (int s = 0; s < k - 1; ++s) schedule.steps.push_back(std::move(ring_steps[s]));
    for (int s = 0; s < k - 1; ++s) {
      Step step{Phase::kIntraReduce, StepOp::kCopy, {}};
      for (const auto& members : group_rings) {
        step.transfers.push_back(make_transfer(members[s + 1], members[0],
                                               chunk_range(elements, k, s + 1),
                                               element_bytes));
      }
      schedule.steps.push_back(std::move(step));
    }
  }

  if (groups > 1) {
    append_ring(schedule.steps, {topo.masters()}, elements, element_bytes,
                Phase::kInterAllReduce, Phase::kInterAllReduce);
  }

  if (k > 1) {
    for (int s = 0; s < k - 1; ++s) {
      Step step{Phase::kIntraBroadcast, StepOp::kCopy, {}};
      for (const auto& members : group_rings) {
        step.transfers.push_back(make_transfer(members[0], members[s + 1],
                                               chunk_range(elements, k, s + 1),
                                               element_bytes));
      }
      schedule.steps.push_back(std::move(step));
    }
    for (int s = 0; s < k - 1; ++s) {
      Step step{Phase::kIntraBroadcast, StepOp::kCopy, {}};
      for (const auto& members : group_rings) {
        for (int i = 0; i < k; ++i) {
          step.transfers.push_back(make_transfer(members[i], members[mod(i + 1, k)],
                                                 chunk_range(elements, k, mod(i - s, k)),
                                                 element_bytes));
        }
      }
      schedule.steps.push_back(std::move(step));
    }
  }
  return schedule;
}

Algorithm select_hybrid(std::size_t batch_bytes, std::size_t eta_threshold_bytes) {
  return batch_bytes < eta_threshold_bytes ? Algorithm::kHierarchical
                                           : Algorithm::kRing;
}

ReduceSchedule make_schedule(Algorithm algorithm, const Topology& topo,
                             std::size_t elements, std::size_t element_bytes) {
  return algorithm == Algorithm::kRing
             ? make_ring_schedule(topo, elements, element_bytes)
             : make_hierarchical_schedule(topo, elements, element_bytes);
}

ReduceSchedule make_hybrid_schedule(const Topology& topo, std::size_t elements,
                                    std::size_t element_bytes,
                                    std::size_t eta_threshold_bytes) {
  ReduceSchedule schedule =
      make_schedule(select_hybrid(elements * element_bytes, eta_threshold_bytes),
                    topo, elements, element_bytes);
  schedule.selected_by_hybrid = true;
  return schedule;
}

void validate(const ReduceSchedule& schedule) {
  if (schedule.workers < 1 || schedule.group_size < 1 ||
      schedule.workers % schedule.group_size != 0) {
    throw ScheduleError("invalid worker/group counts");
  }
  if (schedule.element_bytes == 0) throw ScheduleError("element size is zero");
  for (std::size_t s = 0; s < schedule.steps.size(); ++s) {
    std::set<std::pair<int, int>> pairs;
    for (const Transfer& t : schedule.steps[s].transfers) {
      const std::string where = "step " + std::to_string(s) + ": ";
      if (t.src < 0 || t.src >= schedule.workers || t.dst < 0 ||
          t.dst >= schedule.workers) {
        throw ScheduleError(where + "rank out of range");
      }
      if (t.src == t.dst) throw ScheduleError(where + "self transfer");
      if (t.offset > schedule.elements || t.count > schedule.elements - t.offset) {
        throw ScheduleError(where + "region outside the buffer");
      }
      if (t.bytes != t.count * schedule.element_bytes) {
        throw ScheduleError(where + "byte count does not match element count");
      }
      if (!pairs.emplace(t.src, t.dst).second) {
        throw ScheduleError(where + "duplicate transfer " + std::to_string(t.src) +
                            "->" + std::to_string(t.dst));
      }
    }
  }
}

nlohmann::ordered_json to_json(const ReduceSchedule& schedule) {
  nlohmann::ordered_json j;
  j["algorithm"] = to_string(schedule.algorithm);
  j["selected_by_hybrid"] = schedule.selected_by_hybrid;
  j["p"] = schedule.workers;
  j["k"] = schedule.group_size;
  j["elements"] = schedule.elements;
  j["element_bytes"] = schedule.element_bytes;
  j["total_steps"] = schedule.total_steps();
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < schedule.steps.size(); ++s) {
    const Step& step = schedule.steps[s];
    nlohmann::ordered_json transfers = nlohmann::ordered_json::array();
    for (const Transfer& t : step.transfers) {
      transfers.push_back({{"sender", t.src},
                           {"receiver", t.dst},
                           {"offset", t.offset},
                           {"count", t.count},
                           {"byte_count", t.bytes}});
    }
    nlohmann::ordered_json js;
    js["index"] = s;
    js["phase"] = to_string(step.phase);
    js["op"] = to_string(step.op);
    js["transfers"] = std::move(transfers);
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  return j;
}

ReduceSchedule schedule_from_json(const nlohmann::ordered_json& j) {
  ReduceSchedule schedule;
  try {
    schedule.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
    schedule.selected_by_hybrid = j.value("selected_by_hybrid", false);
    schedule.workers = j.at("p").get<int>();
    schedule.group_size = j.at("k").get<int>();
    schedule.elements = j.at("elements").get<std::size_t>();
    schedule.element_bytes = j.at("element_bytes").get<std::size_t>();
    for (const auto& js : j.at("steps")) {
      Step step;
      step.phase = phase_from_string(js.at("phase").get<std::string>());
      step.op = op_from_string(js.at("op").get<std::string>());
      for (const auto& jt : js.at("transfers")) {
        step.transfers.push_back(Transfer{
            jt.at("sender").get<int>(), jt.at("receiver").get<int>(),
            jt.at("offset").get<std::size_t>(), jt.at("count").get<std::size_t>(),
            jt.at("byte_count").get<std::size_t>()});
      }
      schedule.steps.push_back(std::move(step));
    }
    if (j.contains("total_steps") &&
        j.at("total_steps").get<std::size_t>() != schedule.steps.size()) {
      throw ScheduleError("total_steps disagrees with the step list");
    }
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ScheduleError(std::string("malformed schedule JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScheduleError(e.what());
  }
  validate(schedule);
  return schedule;
}

}  // namespace gradsync::collectives
