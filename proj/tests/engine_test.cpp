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

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "bimodal/engine.hpp"
#include "bimodal/metrics.hpp"
#include "test_support.hpp"

namespace bimodal {
namespace {

using testing::line_network;
using testing::make_task;

TEST(Perturb, ZeroSigmaIsIdentity) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(perturb_factor(rng, 0.0), 1.0);
}

TEST(Perturb, LogNormalBounds) {
  Rng rng(derive_seed(5, "perturbation"));
  std::vector<double> f(100000);
  for (auto& x : f) x = perturb_factor(rng, 1.0);
  const auto inside = std::count_if(f.begin(), f.end(), [](double x) { return x >= 0.25 && x <= 4.0; });
  // P(|Z| <= 2).
  EXPECT_NEAR(static_cast<double>(inside) / f.size(), 0.9545, 0.005);
  std::nth_element(f.begin(), f.begin() + 50000, f.end());
  EXPECT_NEAR(f[50000], 1.0, 0.02);
}

FluidState at_rate(double mbps, double mb, double phi = 1) {
  FluidState s;
  s.target_bps = mbps * 125000.0;
  s.total_bytes = mb * 1e6;
  s.phi = phi;
  return s;
}

TEST(Fluid, OneMbpsForEightSeconds) {
  FluidState s = at_rate(1, 100);
  EXPECT_EQ(advance_fluid(s, 0, 8), 8);
  EXPECT_DOUBLE_EQ(s.delivered, 1e6);
}

TEST(Fluid, ZeroStepIsNoOp) {
  FluidState s = at_rate(1, 100);
  s.delivered = 12345;
  advance_fluid(s, 3, 0);
  EXPECT_EQ(s.delivered, 12345);
}

TEST(Fluid, SlowThenCatchUp) {
  FluidState s = at_rate(1, 100, 0.5);
  advance_fluid(s, 0, 10);
  EXPECT_DOUBLE_EQ(s.delivered, 0.625e6);
  // Twice the target closes the 0.625 MB gap in 5 s, then runs at target.
  s.phi = 2;
  advance_fluid(s, 10, 10);
  EXPECT_NEAR(s.delivered, 2.5e6, 1e-3);
  EXPECT_NEAR(s.deficit(20), 0.0, 1e-3);
}

TEST(Fluid, NeverAheadOfSource) {
  FluidState s = at_rate(1, 100, 3);
  advance_fluid(s, 0, 50);
  EXPECT_NEAR(s.delivered, s.expected(50), 1e-6);
}

TEST(Fluid, CompletionTime) {
  FluidState s = at_rate(1, 1);
  EXPECT_NEAR(time_to_complete(s, 0), 8.0, 1e-9);
  const double spent = advance_fluid(s, 0, 100);
  EXPECT_NEAR(spent, 8.0, 1e-9);
  EXPECT_TRUE(s.done());
  FluidState stalled = at_rate(1, 1, 0);
  EXPECT_TRUE(std::isinf(time_to_complete(stalled, 0)));
}

TEST(Window, Increments) {
  double dev = 0;
  for (int w = 0; w < 4; ++w) dev += window_increment(1.0, 0.75, true);
  EXPECT_DOUBLE_EQ(dev, 1.0);
  EXPECT_EQ(window_increment(1.0, 1.0, true), 0.0);
  EXPECT_EQ(window_increment(1.0, 1.5, true), 0.0);
  EXPECT_DOUBLE_EQ(window_increment(1.0, 1.5, false), -0.5);
}

// Line 0..3, every node hosting services 0..2, roomy links.
Network roomy_line() { return line_network({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {0, 1, 2}}, 20, 10, 2); }

Trace one_task(double volume = 10) {
  TaskSpec t = make_task({0, 1, 2}, 0, 3, {1, 1, 1}, {1, 1, 1});
  t.data_volume = volume;
  return {{5.0, t}};
}

TEST(Simulate, EmptyTrace) {
  const RunOutput out = simulate(roomy_line(), {}, MappingParams{}, EngineParams{}, 1);
  const auto r = summarize(out.log);
  EXPECT_EQ(r.submitted, 0);
  EXPECT_EQ(r.server_utilization, 0);
  EXPECT_EQ(r.throughput, 0);
}

TEST(Simulate, LoneDedicatedTaskRunsAtTarget) {
  MappingParams mp;
  mp.mode = PlatformMode::kDedicatedOnly;
  EngineParams ep;
  ep.mode = mp.mode;
  const RunOutput out = simulate(roomy_line(), one_task(), mp, ep, 1);
  ASSERT_EQ(out.log.tasks.size(), 1u);
  const auto& t = out.log.tasks[0];
  EXPECT_EQ(t.outcome, "completed");
  EXPECT_NEAR((t.completion - t.start) / t.ideal, 1.0, 1e-3);
  EXPECT_NEAR(t.deviation, 0.0, 1e-9);
  EXPECT_NEAR(t.delivered_bytes, 10e6, 1e-6 * 10e6);
  EXPECT_EQ(out.log.audit_failures, 0u);
  const auto r = summarize(out.log);
  EXPECT_EQ(r.acceptance_ratio, 1.0);
  EXPECT_NEAR(r.mean_execution_elongation, 1.0, 1e-3);
}

TEST(Simulate, SameSeedsSameLog) {
  TopologyParams tp;
  tp.n_nodes = 30;
  tp.n_links = 40;
  const Network net = generate_network(tp, 3);
  WorkloadParams wp;
  wp.n_tasks = 40;
  wp.chain_length = 4;
  wp.arrival_rate = 120;
  const Trace trace = generate_trace(wp, net, 4);
  const auto a = simulate(net, trace, MappingParams{}, EngineParams{}, 9).log;
  const auto b = simulate(net, trace, MappingParams{}, EngineParams{}, 9).log;
  std::ostringstream sa, sb;
  a.write(sa);
  b.write(sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.to_csv(), b.to_csv());
  std::ostringstream sc;
  simulate(net, trace, MappingParams{}, EngineParams{}, 10).log.write(sc);
  EXPECT_NE(sa.str(), sc.str());
}

struct Busy {
  Network net;
  Trace trace;
  Busy(PlatformMode mode, double sigma, std::uint64_t seed = 3) {
    TopologyParams tp;
    tp.n_nodes = 30;
    tp.n_links = 35;
    net = generate_network(tp, seed);
    WorkloadParams wp;
    wp.n_tasks = 60;
    wp.chain_length = 5;
    wp.arrival_rate = 240;
    wp.mean_volume = 30;
    trace = generate_trace(wp, net, seed + 1);
    mapping.mode = mode;
    engine.mode = mode;
    engine.sigma = sigma;
  }
  MappingParams mapping;
  EngineParams engine;
  RunLog run(std::uint64_t seed = 5) const { return simulate(net, trace, mapping, engine, seed).log; }
};

TEST(Simulate, ConservationAndBytes) {
  for (auto mode : {PlatformMode::kBimodal, PlatformMode::kDedicatedOnly, PlatformMode::kPublicOnly}) {
    Busy b(mode, 1.0);
    const RunLog log = b.run();
    EXPECT_EQ(log.audit_failures, 0u) << to_string(mode);
    for (const auto& t : log.tasks) {
      if (t.outcome != "completed") continue;
      const TaskSpec& spec = b.trace[static_cast<std::size_t>(t.id)].spec;
      EXPECT_NEAR(t.delivered_bytes, spec.delivered_volume_bytes(), 1e-6 * spec.delivered_volume_bytes());
      EXPECT_NEAR(t.ideal, spec.ideal_duration(), 1e-9 * t.ideal);
      EXPECT_GE((t.completion - t.start) / t.ideal, 1 - 1e-6);
    }
    const auto r = summarize(log);
    EXPECT_GT(r.accepted, 0) << to_string(mode);
    for (double x : {r.acceptance_ratio, r.server_utilization, r.dedicated_link_utilization, r.uplink_utilization}) {
      EXPECT_GE(x, 0);
      EXPECT_LE(x, 1);
    }
    if (mode == PlatformMode::kPublicOnly) {
      EXPECT_EQ(r.dedicated_link_utilization, 0);
    }
    if (mode == PlatformMode::kDedicatedOnly) {
      EXPECT_EQ(r.uplink_utilization, 0);
    }
  }
}

TEST(Simulate, DeviationReplaysFromWindowLedger) {
  Busy b(PlatformMode::kPublicOnly, 1.0);
  const RunLog log = b.run();
  std::map<TaskId, double> replay;
  std::map<TaskId, int> windows;
  for (const auto& e : log.events) {
    if (e.kind != "window") continue;
    std::istringstream is(e.detail);
    double bytes = 0, seconds = 0;
    is >> bytes >> seconds;
    const double observed = bytes / seconds / 125000.0;
    const double target = b.trace[static_cast<std::size_t>(e.task)].spec.target_rate;
    replay[e.task] += std::max(0.0, (target - observed) / target);
    ++windows[e.task];
  }
  int checked = 0;
  for (const auto& t : log.tasks) {
    if (!t.accepted()) continue;
    EXPECT_NEAR(t.deviation, replay[t.id], 1e-6 * std::max(1.0, t.deviation)) << t.id;
    EXPECT_EQ(t.windows, windows[t.id]);
    checked += t.deviation > 0;
  }
  EXPECT_GT(checked, 0);
}

TEST(Simulate, NoPerturbationNoPublicDeviation) {
  Busy b(PlatformMode::kPublicOnly, 0.0);
  b.engine.dynamic_scheduling = false;
  const RunLog log = b.run();
  for (const auto& t : log.tasks)
    if (t.accepted() && t.public_segments > 0) {
      EXPECT_LE(t.deviation, 1e-6) << t.id;
    }
}

TEST(RunLogText, RoundTrips) {
  Busy b(PlatformMode::kBimodal, 1.0);
  const RunLog log = b.run();
  std::ostringstream os;
  log.write(os);
  std::istringstream is(os.str());
  const RunLog back = RunLog::parse(is);
  std::ostringstream again;
  back.write(again);
  EXPECT_EQ(again.str(), os.str());
  EXPECT_EQ(RunLog::from_csv(log.to_csv()).to_csv(), log.to_csv());

  const auto a = summarize(log), c = summarize(back);
  for (auto f : metric_fields()) EXPECT_EQ(metric_value(a, f), metric_value(c, f)) << f;
}

TEST(RunLogText, MalformedRejected) {
  std::istringstream is("# bimodal-runlog 1\ntask,1,2\n");
  try {
    RunLog::parse(is);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLog);
  }
}

}  // namespace
}  // namespace bimodal
