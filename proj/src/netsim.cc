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

#include "gradsync/netsim.h"

#include <algorithm>
#include <stdexcept>

namespace gradsync::netsim {

namespace {

void validate_params(const LinkParams& p, const char* which) {
  if (!(p.alpha >= 0.0)) {
    throw std::invalid_argument(std::string(which) + " alpha must be >= 0");
  }
  if (!(p.bandwidth > 0.0)) {
    throw std::invalid_argument(std::string(which) + " bandwidth must be > 0");
  }
}

}  // namespace

void LinkModel::validate() const {
  validate_params(inter, "link");
  if (intra) validate_params(*intra, "intra-group link");
}

SimReport simulate(const collectives::ReduceSchedule& schedule, const LinkModel& link) {
  link.validate();
  SimReport report;
  report.algorithm = schedule.algorithm;
  report.total_steps = schedule.total_steps();
  report.bytes_on_wire = schedule.bytes_on_wire();

  const int k = schedule.group_size;
  for (const collectives::Step& step : schedule.steps) {
    double round = 0.0;
    bool any = false;
    for (const collectives::Transfer& t : step.transfers) {
      const bool intra = link.intra && (t.src / k == t.dst / k);
      const LinkParams& p = intra ? *link.intra : link.inter;
      const double cost = p.alpha + static_cast<double>(t.bytes) / p.bandwidth;
      round = any ? std::max(round, cost) : cost;
      any = true;
    }
    if (!any) round = link.inter.alpha;
    report.total_time += round;
    report.per_phase_time[std::string(collectives::to_string(step.phase))] += round;
  }
  return report;
}

nlohmann::ordered_json to_json(const SimReport& report) {
  nlohmann::ordered_json j;
  j["algorithm"] = collectives::to_string(report.algorithm);
  j["total_steps"] = report.total_steps;
  j["bytes_on_wire"] = report.bytes_on_wire;
  j["total_time"] = report.total_time;
  nlohmann::ordered_json phases = nlohmann::ordered_json::object();
  for (const auto& [phase, t] : report.per_phase_time) phases[phase] = t;
  j["per_phase_time"] = std::move(phases);
  return j;
}

Efficiency scaling_efficiency(const EfficiencyInput& input) {
  if (!(input.single_worker_throughput > 0.0) || !(input.worker_count > 0.0) ||
      !(input.system_throughput > 0.0)) {
    throw std::invalid_argument("throughputs and worker count must be positive");
  }
  Efficiency e;
  e.raw = input.system_throughput / (input.single_worker_throughput * input.worker_count);
  e.superlinear = e.raw > 1.0;
  e.reported = std::min(e.raw, 1.0);
  return e;
}

double implied_throughput(double single_worker_throughput, double worker_count,
                          double efficiency) {
  return single_worker_throughput * worker_count * efficiency;
}

CrossoverSweep sweep_crossover(const collectives::Topology& topo, const LinkModel& link,
                               std::size_t element_bytes,
                               std::size_t min_elements_per_rank,
                               std::size_t max_elements_per_rank) {
  CrossoverSweep sweep;
  const auto p = static_cast<std::size_t>(topo.workers());
  bool hierarchical_won = false;
  for (std::size_t per_rank = std::max<std::size_t>(min_elements_per_rank, 1);
       per_rank <= max_elements_per_rank; per_rank *= 2) {
    const std::size_t elements = per_rank * p;
    const double ring =
        simulate(collectives::make_ring_schedule(topo, elements, element_bytes), link)
            .total_time;
    const double hier =
        simulate(collectives::make_hierarchical_schedule(topo, elements, element_bytes),
                 link)
            .total_time;
    sweep.points.push_back(CrossoverPoint{elements * element_bytes, ring, hier});
    if (hier < ring) hierarchical_won = true;
    if (!sweep.crossover_bytes && hierarchical_won && ring <= hier) {
      sweep.crossover_bytes = elements * element_bytes;
    }
  }
  return sweep;
}

}  // namespace gradsync::netsim
