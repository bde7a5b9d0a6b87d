// Copyright 2026 The Bimodal Stream Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "bimodal/topology.hpp"
#include "bimodal/workload.hpp"
#include "test_support.hpp"

namespace bimodal {
namespace {

using testing::make_task;

Network default_network() {
  TopologyParams p;
  return generate_network(p, 21);
}

TEST(RateChain, HalvingThenDoubling) {
  const auto rc = rate_chain(make_task({0, 1}, 0, 1, {0.5, 2.0}));
  EXPECT_DOUBLE_EQ(rc.source_rate, 1.0);
  EXPECT_DOUBLE_EQ(rc.input_rate[0], 1.0);
  EXPECT_DOUBLE_EQ(rc.input_rate[1], 0.5);
  EXPECT_DOUBLE_EQ(rc.output_rate[0], 0.5);
  EXPECT_DOUBLE_EQ(rc.output_rate[1], 1.0);
}

TEST(RateChain, UnitShrinkage) {
  const auto rc = rate_chain(make_task({0, 1, 2}, 0, 1));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rc.input_rate[i], 1.0);
    EXPECT_EQ(rc.output_rate[i], 1.0);
  }
}

TEST(RateChain, Doubling) {
  auto t = make_task({0, 1, 2}, 0, 1, {2, 2, 2});
  t.target_rate = 8;
  const auto rc = rate_chain(t);
  EXPECT_DOUBLE_EQ(rc.source_rate, 1.0);
  EXPECT_DOUBLE_EQ(rc.output_rate[0], 2.0);
  EXPECT_DOUBLE_EQ(rc.output_rate[1], 4.0);
  EXPECT_DOUBLE_EQ(rc.output_rate[2], 8.0);
  EXPECT_DOUBLE_EQ(rc.segment_rate(3), 8.0);
  EXPECT_DOUBLE_EQ(rc.segment_rate(0), 1.0);
}

TEST(RateChain, ZeroShrinkageRejected) {
  try {
    rate_chain(make_task({0, 1}, 0, 1, {1.0, 0.0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateShrinkage);
  }
}

TEST(Budget, EqualWorkSplitsEqually) {
  const auto b = apportion_budget(make_task({0, 1, 2, 3}, 0, 1), 0.0);
  for (double x : b.processing) EXPECT_DOUBLE_EQ(x, b.processing[0]);
  for (double x : b.transport) EXPECT_EQ(x, 0.0);
}

TEST(Budget, SingleComponentTakesEverything) {
  auto t = make_task({0}, 0, 1);
  t.price_per_byte = 0.7;
  const auto b = apportion_budget(t, 0.0);
  ASSERT_EQ(b.processing.size(), 1u);
  EXPECT_DOUBLE_EQ(b.processing[0], 0.7 * 125000.0);
}

TEST(Budget, OneToThreeSplit) {
  auto t = make_task({0, 1}, 0, 1, {}, {1.0, 3.0});
  t.price_per_byte = 2.0;
  const auto b = apportion_budget(t, 0.2);
  // 2 currency/byte at 1 Mbps = 250000/s; 80% to processing in 1:3, the
  // rest over three segments.
  EXPECT_DOUBLE_EQ(b.processing[0], 50000.0);
  EXPECT_DOUBLE_EQ(b.processing[1], 150000.0);
  ASSERT_EQ(b.transport.size(), 3u);
  for (double x : b.transport) EXPECT_NEAR(x, 50000.0 / 3.0, 1e-9);
  EXPECT_NEAR(b.total(), 250000.0, 1e-9);
}

TEST(Budget, ConservedOverRandomTasks) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  for (int i = 0; i < 500; ++i) {
    const int n = 1 + i % 10;
    std::vector<ServiceId> svc(n, 0);
    std::vector<double> s, c;
    for (int k = 0; k < n; ++k) {
      s.push_back(u(rng));
      c.push_back(u(rng));
    }
    auto t = make_task(svc, 0, 1, s, c);
    t.price_per_byte = u(rng);
    t.target_rate = u(rng);
    const double tau = std::fmod(u(rng), 1.0);
    const auto b = apportion_budget(t, tau);
    const double revenue = t.price_per_byte * t.target_rate * 125000.0;
    EXPECT_NEAR(b.total(), revenue, 1e-12 * revenue * (2 * n + 1));
  }
}

TEST(Trace, DefaultShape) {
  const Network net = default_network();
  const Trace trace = generate_trace(WorkloadParams{}, net, 5);
  ASSERT_EQ(trace.size(), 500u);
  double prev = 0;
  for (const auto& a : trace) {
    EXPECT_GE(a.time, prev);
    prev = a.time;
    EXPECT_EQ(a.spec.size(), 10u);
    EXPECT_NE(a.spec.source, a.spec.delivery);
    EXPECT_EQ(a.spec.target_rate, 1.0);
    EXPECT_GT(a.spec.data_volume, 0.0);
    for (std::size_t c = 0; c < 10; ++c) {
      EXPECT_FALSE(net.service_providers(a.spec.services[c]).empty());
      EXPECT_EQ(a.spec.cpu_factor[c], net.service(a.spec.services[c]).cpu_factor);
      EXPECT_GE(a.spec.shrinkage[c], 0.8);
      EXPECT_LE(a.spec.shrinkage[c], 1.25);
    }
  }
}

TEST(Trace, SingleTask) {
  WorkloadParams p;
  p.n_tasks = 1;
  p.arrival_rate = 7;
  const Trace trace = generate_trace(p, default_network(), 1);
  ASSERT_EQ(trace.size(), 1u);
  EXPECT_GE(trace[0].time, 0.0);
}

TEST(Trace, MeanInterArrival) {
  WorkloadParams p;
  p.n_tasks = 10000;
  p.chain_length = 1;
  const Trace trace = generate_trace(p, default_network(), 99);
  const double mean_gap = trace.back().time / 10000.0;
  EXPECT_NEAR(mean_gap, 60.0, 3.0);
  double volume = 0;
  for (const auto& a : trace) volume += a.spec.data_volume;
  EXPECT_NEAR(volume / 10000.0, 100.0, 5.0);
}

TEST(Trace, LogUniformShrinkageHasUnitMedian) {
  WorkloadParams p;
  p.n_tasks = 2000;
  const Trace trace = generate_trace(p, default_network(), 3);
  std::vector<double> gain;
  for (const auto& a : trace) {
    double g = 1;
    for (double s : a.spec.shrinkage) g *= s;
    gain.push_back(g);
  }
  std::nth_element(gain.begin(), gain.begin() + 1000, gain.end());
  EXPECT_NEAR(gain[1000], 1.0, 0.1);
}

TEST(Trace, BadParametersRejected) {
  WorkloadParams p;
  p.arrival_rate = 0;
  EXPECT_THROW(generate_trace(p, default_network(), 1), Error);
  p = {};
  p.shrinkage_min = 2;
  p.shrinkage_max = 1;
  EXPECT_THROW(generate_trace(p, default_network(), 1), Error);
}

TEST(Trace, DeterministicAndRoundTrips) {
  const Network net = default_network();
  WorkloadParams p;
  p.n_tasks = 50;
  const Trace a = generate_trace(p, net, 17);
  const Trace b = generate_trace(p, net, 17);
  EXPECT_EQ(trace_to_text(a), trace_to_text(b));
  EXPECT_EQ(trace_hash(a), trace_hash(b));
  EXPECT_NE(trace_hash(a), trace_hash(generate_trace(p, net, 18)));

  std::istringstream is(trace_to_text(a));
  const Trace back = read_trace(is);
  ASSERT_EQ(back.size(), a.size());
  EXPECT_EQ(trace_to_text(back), trace_to_text(a));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(back[i].time, a[i].time);
    EXPECT_EQ(back[i].spec.shrinkage, a[i].spec.shrinkage);
    EXPECT_EQ(back[i].spec.data_volume, a[i].spec.data_volume);
  }
}

TEST(Task, IdealDuration) {
  auto t = make_task({0, 1}, 0, 1, {0.5, 3.0});
  t.data_volume = 10;
  // 10 MB shrink to 15 MB delivered; 1 Mbps moves 0.125 MB/s.
  EXPECT_DOUBLE_EQ(t.delivered_volume_bytes(), 15e6);
  EXPECT_DOUBLE_EQ(t.ideal_duration(), 120.0);
}

}  // namespace
}  // namespace bimodal
