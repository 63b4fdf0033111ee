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

#ifndef GRADSYNC_NETSIM_H_
#define GRADSYNC_NETSIM_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradsync/schedule.h"
#include "json.hpp"

namespace gradsync::netsim {

// alpha-beta link: a message of b bytes costs alpha + b / bandwidth seconds.
struct LinkParams {
  double alpha = 0.0;      // seconds per message
  double bandwidth = 1e9;  // bytes per second
};

struct LinkModel {
  LinkParams inter;
  // Used for transfers between ranks of the same group when set.
  std::optional<LinkParams> intra;

  // Throws std::invalid_argument unless alpha >= 0 and bandwidth > 0.
  void validate() const;
};

struct SimReport {
  collectives::Algorithm algorithm = collectives::Algorithm::kRing;
  std::size_t total_steps = 0;
  std::size_t bytes_on_wire = 0;
  double total_time = 0.0;
  std::map<std::string, double> per_phase_time;
};

// Each step is one round. Transfers inside a round run concurrently, so a
// round costs the slowest of its transfers: max(alpha_l + bytes / bw_l).
SimReport simulate(const collectives::ReduceSchedule& schedule, const LinkModel& link);

nlohmann::ordered_json to_json(const SimReport& report);

// e = T / (S * N).
struct EfficiencyInput {
  double single_worker_throughput = 0.0;  // S, images/s
  double worker_count = 0.0;              // N
  double system_throughput = 0.0;         // T, images/s
};

struct Efficiency {
  double raw = 0.0;       // T / (S * N), unclamped
  double reported = 0.0;  // min(raw, 1)
  bool superlinear = false;
};

// Throws std::invalid_argument unless all inputs are positive.
Efficiency scaling_efficiency(const EfficiencyInput& input);

// T = S * N * e.
double implied_throughput(double single_worker_throughput, double worker_count,
                          double efficiency);

// Modeled time of ring and hierarchical for one payload size.
struct CrossoverPoint {
  std::size_t bytes = 0;
  double ring_time = 0.0;
  double hierarchical_time = 0.0;
};

struct CrossoverSweep {
  std::vector<CrossoverPoint> points;
  // Smallest sampled size at which ring is no slower than hierarchical, if
  // hierarchical wins below it.
  std::optional<std::size_t> crossover_bytes;
};

// Samples payload sizes that are whole multiples of p elements, so every
// chunk is equally sized, from `min_elements_per_rank` to
// `max_elements_per_rank` doubling each time.
CrossoverSweep sweep_crossover(const collectives::Topology& topo, const LinkModel& link,
                               std::size_t element_bytes,
                               std::size_t min_elements_per_rank,
                               std::size_t max_elements_per_rank);

}  // namespace gradsync::netsim

#endif  // GRADSYNC_NETSIM_H_
