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

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "gradsync/allreduce.h"
#include "gradsync/schedule.h"

namespace gradsync::collectives {
namespace {

std::vector<int> divisors_up_to(int p, int limit) {
  std::vector<int> out;
  for (int k = 1; k <= std::min(p, limit); ++k) {
    if (p % k == 0) out.push_back(k);
  }
  return out;
}

std::vector<std::vector<float>> random_buffers(std::mt19937_64& rng, int p, std::size_t n) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<std::vector<float>> b(static_cast<std::size_t>(p), std::vector<float>(n));
  for (auto& v : b) {
    for (float& x : v) x = d(rng);
  }
  return b;
}

// Left-to-right sum in rank order.
std::vector<float> sequential_sum(const std::vector<std::vector<float>>& in) {
  std::vector<float> out = in.front();
  for (std::size_t r = 1; r < in.size(); ++r) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[r][i];
  }
  return out;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
  }
  return true;
}

TEST(StepCounts, ClosedForms) {
  EXPECT_EQ(ring_step_count(1024), 2046u);
  EXPECT_EQ(hierarchical_step_count(1024, 16), 186u);
  EXPECT_EQ(ring_step_count(1), 0u);
}

TEST(StepCounts, GeneratedSchedulesMatchClosedForms) {
  for (int p : {1, 2, 3, 4, 6, 8, 16, 64, 256}) {
    for (int k : divisors_up_to(p, 32)) {
      const Topology topo(p, k);
      const std::size_t n = static_cast<std::size_t>(p) * 3;
      EXPECT_EQ(make_ring_schedule(topo, n, 4).total_steps(), ring_step_count(p)) << p;
      EXPECT_EQ(make_hierarchical_schedule(topo, n, 4).total_steps(),
                p == 1 ? 0u : hierarchical_step_count(p, k))
          << p << "," << k;
    }
  }
}

TEST(Schedule, RingGoldenJson) {
  const auto s = make_ring_schedule(Topology(3, 1), 6, 4);
  const std::string expected =
      R"({"algorithm":"ring","selected_by_hybrid":false,"p":3,"k":1,"elements":6,"element_bytes":4,"total_steps":4,"steps":[)"
      R"({"index":0,"phase":"reduce_scatter","op":"reduce","transfers":[{"sender":0,"receiver":1,"offset":2,"count":2,"byte_count":8},{"sender":1,"receiver":2,"offset":4,"count":2,"byte_count":8},{"sender":2,"receiver":0,"offset":0,"count":2,"byte_count":8}]},)"
      R"({"index":1,"phase":"reduce_scatter","op":"reduce","transfers":[{"sender":0,"receiver":2,"offset":4,"count":2,"byte_count":8},{"sender":1,"receiver":0,"offset":0,"count":2,"byte_count":8},{"sender":2,"receiver":1,"offset":2,"count":2,"byte_count":8}]},)"
      R"({"index":2,"phase":"all_gather","op":"copy","transfers":[{"sender":0,"receiver":1,"offset":0,"count":2,"byte_count":8},{"sender":1,"receiver":2,"offset":2,"count":2,"byte_count":8},{"sender":2,"receiver":0,"offset":4,"count":2,"byte_count":8}]},)"
      R"({"index":3,"phase":"all_gather","op":"copy","transfers":[{"sender":0,"receiver":1,"offset":4,"count":2,"byte_count":8},{"sender":1,"receiver":2,"offset":0,"count":2,"byte_count":8},{"sender":2,"receiver":0,"offset":2,"count":2,"byte_count":8}]}]})";
  EXPECT_EQ(to_json(s).dump(), expected);
}

TEST(Schedule, HierarchicalPhasesInOrder) {
  const auto s = make_hierarchical_schedule(Topology(8, 2), 64, 4);
  std::vector<Phase> phases;
  for (const auto& step : s.steps) phases.push_back(step.phase);
  const std::vector<Phase> expected = {
      Phase::kIntraReduce,    Phase::kIntraReduce,    Phase::kInterAllReduce,
      Phase::kInterAllReduce, Phase::kInterAllReduce, Phase::kInterAllReduce,
      Phase::kInterAllReduce, Phase::kInterAllReduce, Phase::kIntraBroadcast,
      Phase::kIntraBroadcast};
  EXPECT_EQ(phases, expected);
  // Inter-group traffic only between masters.
  const Topology topo(8, 2);
  for (const auto& step : s.steps) {
    for (const auto& t : step.transfers) {
      if (step.phase == Phase::kInterAllReduce) {
        EXPECT_TRUE(topo.is_master(t.src) && topo.is_master(t.dst));
      } else {
        EXPECT_TRUE(topo.same_group(t.src, t.dst));
      }
    }
  }
}

TEST(Schedule, JsonRoundTrip) {
  for (auto alg : {Algorithm::kRing, Algorithm::kHierarchical}) {
    const auto s = make_schedule(alg, Topology(8, 4), 100, 2);
    const auto r = schedule_from_json(to_json(s));
    EXPECT_EQ(to_json(r), to_json(s));
  }
}

TEST(Schedule, MalformedJsonAndInvalidSchedulesAreRejected) {
  auto j = to_json(make_ring_schedule(Topology(4, 1), 8, 4));
  auto bad = j;
  bad["steps"][0]["transfers"][0]["receiver"] = 9;
  EXPECT_THROW(schedule_from_json(bad), ScheduleError);
  bad = j;
  bad["steps"][0]["transfers"][0]["byte_count"] = 3;
  EXPECT_THROW(schedule_from_json(bad), ScheduleError);
  bad = j;
  bad["total_steps"] = 1;
  EXPECT_THROW(schedule_from_json(bad), ScheduleError);
  bad = j;
  bad.erase("steps");
  EXPECT_THROW(schedule_from_json(bad), ScheduleError);
  bad = j;
  bad["algorithm"] = "tree";
  EXPECT_THROW(schedule_from_json(bad), ScheduleError);
}

TEST(Schedule, RingTransferSizesAndWireBytes) {
  const auto s = make_ring_schedule(Topology(4, 1), 400, 4);
  for (const auto& step : s.steps) {
    EXPECT_EQ(step.transfers.size(), 4u);
    for (const auto& t : step.transfers) EXPECT_EQ(t.bytes, 400u);
  }
  EXPECT_EQ(s.bytes_on_wire(), 6u * 4u * 400u);
}

TEST(Topology, GroupsAndMasters) {
  const Topology t(8, 4);
  EXPECT_EQ(t.group_count(), 2);
  EXPECT_EQ(t.masters(), (std::vector<int>{0, 4}));
  EXPECT_EQ(t.group_members(1), (std::vector<int>{4, 5, 6, 7}));
  EXPECT_TRUE(t.same_group(5, 7));
  EXPECT_FALSE(t.same_group(3, 4));
  EXPECT_THROW(Topology(8, 3), TopologyError);
  EXPECT_THROW(Topology(0, 1), TopologyError);
}

TEST(Hybrid, ThresholdRule) {
  EXPECT_EQ(select_hybrid(100, 101), Algorithm::kHierarchical);
  EXPECT_EQ(select_hybrid(101, 101), Algorithm::kRing);
  EXPECT_EQ(select_hybrid(0, 0), Algorithm::kRing);
  const auto s = make_hybrid_schedule(Topology(8, 2), 16, 4, 1000);
  EXPECT_EQ(s.algorithm, Algorithm::kHierarchical);
  EXPECT_TRUE(s.selected_by_hybrid);
  EXPECT_EQ(make_hybrid_schedule(Topology(8, 2), 1000, 4, 1000).algorithm, Algorithm::kRing);
}

TEST(RingAllReduce, BitwiseEqualsSequentialSum) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = std::uniform_int_distribution<int>(1, 16)(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 4096)(rng);
    const auto in = random_buffers(rng, p, n);
    const auto expected = sequential_sum(in);
    const auto r = ring_allreduce(in, Topology(p, 1));
    for (const auto& out : r.outputs) ASSERT_TRUE(bitwise_equal(out, expected)) << p << " " << n;
  }
}

TEST(RingAllReduce, FewerElementsThanRanks) {
  std::mt19937_64 rng(2);
  const auto in = random_buffers(rng, 7, 3);
  const auto r = ring_allreduce(in, Topology(7, 1));
  for (const auto& out : r.outputs) EXPECT_TRUE(bitwise_equal(out, sequential_sum(in)));
}

TEST(HierarchicalAllReduce, BitwiseWhenGroupingIsTrivial) {
  std::mt19937_64 rng(3);
  for (int p : {2, 4, 6, 8, 16}) {
    for (int k : {1, p}) {
      const auto in = random_buffers(rng, p, 777);
      const auto r = hierarchical_allreduce(in, Topology(p, k));
      for (const auto& out : r.outputs) EXPECT_TRUE(bitwise_equal(out, sequential_sum(in)));
    }
  }
}

TEST(HierarchicalAllReduce, GroupedSumOfGroupSums) {
  // Ranks fold inside each group first, then across groups.
  std::mt19937_64 rng(4);
  const int p = 8, k = 2;
  const auto in = random_buffers(rng, p, 301);
  std::vector<std::vector<float>> group_sums;
  for (int g = 0; g < p / k; ++g) {
    group_sums.push_back(sequential_sum({in.begin() + g * k, in.begin() + (g + 1) * k}));
  }
  const auto expected = sequential_sum(group_sums);
  for (const auto& out : hierarchical_allreduce(in, Topology(p, k)).outputs) {
    EXPECT_TRUE(bitwise_equal(out, expected));
  }
}

TEST(HierarchicalAllReduce, ExactOnIntegerValuedInputs) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(-1000, 1000);
  for (int p : {4, 8, 16}) {
    for (int k : divisors_up_to(p, 16)) {
      std::vector<std::vector<float>> in(static_cast<std::size_t>(p), std::vector<float>(129));
      for (auto& v : in) {
        for (float& x : v) x = static_cast<float>(d(rng));
      }
      for (const auto& out : hierarchical_allreduce(in, Topology(p, k)).outputs) {
        EXPECT_TRUE(bitwise_equal(out, sequential_sum(in)));
      }
    }
  }
}

TEST(HierarchicalAllReduce, WithinSummationErrorBound) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 16;
    const int k = divisors_up_to(p, 16)[static_cast<std::size_t>(trial) % 5];
    const auto in = random_buffers(rng, p, 513);
    const auto out = hierarchical_allreduce(in, Topology(p, k)).outputs[0];
    for (std::size_t i = 0; i < out.size(); ++i) {
      double exact = 0.0, mag = 0.0;
      for (const auto& v : in) {
        exact += v[i];
        mag += std::fabs(v[i]);
      }
      ASSERT_LE(std::fabs(out[i] - exact), p * std::ldexp(1.0, -24) * mag);
    }
  }
}

TEST(AllReduce, MeanDividesOnce) {
  std::mt19937_64 rng(7);
  const auto in = random_buffers(rng, 4, 100);
  auto expected = sequential_sum(in);
  for (float& x : expected) x /= 4.0f;
  for (const auto& out : ring_allreduce(in, Topology(4, 1), ReduceOp::kMean).outputs) {
    EXPECT_TRUE(bitwise_equal(out, expected));
  }
  for (const auto& out : hierarchical_allreduce(in, Topology(4, 4), ReduceOp::kMean).outputs) {
    EXPECT_TRUE(bitwise_equal(out, expected));
  }
}

TEST(AllReduce, SingleWorkerIsIdentity) {
  std::mt19937_64 rng(8);
  const auto in = random_buffers(rng, 1, 50);
  EXPECT_TRUE(bitwise_equal(ring_allreduce(in, Topology(1, 1)).outputs[0], in[0]));
  EXPECT_TRUE(bitwise_equal(hybrid_allreduce(in, Topology(1, 1), 1 << 20).outputs[0], in[0]));
  EXPECT_EQ(ring_allreduce(in, Topology(1, 1)).schedule.total_steps(), 0u);
}

TEST(AllReduce, HybridReportsItsChoice) {
  std::mt19937_64 rng(9);
  const auto in = random_buffers(rng, 8, 10);
  EXPECT_EQ(hybrid_allreduce(in, Topology(8, 2), 41).schedule.algorithm, Algorithm::kHierarchical);
  EXPECT_EQ(hybrid_allreduce(in, Topology(8, 2), 40).schedule.algorithm, Algorithm::kRing);
}

TEST(AllReduce, ShapeContractViolations) {
  std::mt19937_64 rng(10);
  auto in = random_buffers(rng, 4, 10);
  EXPECT_THROW(ring_allreduce(in, Topology(8, 1)), ContractViolation);
  in[2].push_back(0.0f);
  EXPECT_THROW(ring_allreduce(in, Topology(4, 1)), ContractViolation);
}

TEST(AllReduceF16, WithinHalfPrecisionBound) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int p = 1 << std::uniform_int_distribution<int>(1, 4)(rng);
    const int k = divisors_up_to(p, 16)[static_cast<std::size_t>(trial) % divisors_up_to(p, 16).size()];
    const auto in = random_buffers(rng, p, 300);
    std::vector<std::vector<halfprec::HalfBits>> h;
    for (const auto& v : in) h.push_back(halfprec::to_half(v));
    for (auto alg : {Algorithm::kRing, Algorithm::kHierarchical}) {
      const auto out = allreduce_f16(h, Topology(p, k), alg).outputs;
      for (const auto& o : out) ASSERT_EQ(o, out[0]);
      const auto f = halfprec::to_float(out[0]);
      for (std::size_t i = 0; i < f.size(); ++i) {
        double exact = 0.0, mag = 0.0;
        for (const auto& v : in) {
          exact += v[i];
          mag += std::fabs(v[i]);
        }
        ASSERT_LE(std::fabs(f[i] - exact), std::ldexp(1.0, -9) * mag) << p << "," << k;
      }
    }
  }
}

TEST(RankExecutor, RejectsUnexpectedDeliveries) {
  const auto s = make_ring_schedule(Topology(4, 1), 8, 4);
  RankExecutor<float> ex(s, 1, std::vector<float>(8, 1.0f), ReduceOp::kSum);
  const auto sources = ex.expected_sources(0);
  ASSERT_EQ(sources.size(), 1u);
  const std::vector<float> two(2, 1.0f), three(3, 1.0f);
  EXPECT_THROW(ex.deliver(0, (sources[0] + 2) % 4, two), ContractViolation);
  EXPECT_THROW(ex.deliver(0, sources[0], three), ContractViolation);
  EXPECT_THROW(RankExecutor<float>(s, 4, std::vector<float>(8), ReduceOp::kSum), ContractViolation);
  EXPECT_THROW(RankExecutor<float>(s, 0, std::vector<float>(7), ReduceOp::kSum), ContractViolation);
}

}  // namespace
}  // namespace gradsync::collectives
