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
#include <functional>
#include <map>
#include <numeric>

#include "bimodal/random.hpp"
#include "bimodal/scheduler.hpp"

namespace bimodal {
namespace {

Flow flow(TaskId task, NodeId next, double target, double budget, double deficit = 0) {
  Flow f;
  f.task = task;
  f.upstream = 0;
  f.next = next;
  f.target = target;
  f.budget_per_byte = budget;
  f.deficit_bytes = deficit;
  return f;
}

// Hub 0 with uplink `uplink` and one link of `bw` to each of nodes 1..k.
Network star(int k, double bw, double uplink) {
  Network net;
  net.add_service({1.0});
  net.add_node(10, {0}, uplink, 10);
  for (int i = 1; i <= k; ++i) {
    net.add_node(10, {0}, 2, 10);
    net.add_link(0, i, bw, 1);
  }
  net.rebuild_directory();
  return net;
}

TEST(Required, SteadyStateIsTarget) {
  EXPECT_EQ(required_bandwidth(flow(0, 1, 1.5, 1), 1.0), 1.5);
}

TEST(Required, OneEpochBehindDoubles) {
  const double epoch = 2.0;
  const Flow f = flow(0, 1, 1.5, 1, 1.5 * 125000.0 * epoch);
  EXPECT_DOUBLE_EQ(required_bandwidth(f, epoch), 3.0);
  EXPECT_DOUBLE_EQ(required_bandwidth(f, epoch, 4.0), 3.0);
}

TEST(Required, CappedAtMultiple) {
  const Flow f = flow(0, 1, 1.0, 1, 1e9);
  EXPECT_DOUBLE_EQ(required_bandwidth(f, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(required_bandwidth(f, 1.0, 2.0), 2.0);
}

TEST(Required, MonotoneInDeficit) {
  Rng rng(3);
  std::uniform_real_distribution<double> deficit(0, 1e6), target(0.1, 3);
  for (int i = 0; i < 1000; ++i) {
    const double t = target(rng);
    double a = deficit(rng), b = deficit(rng);
    if (a > b) std::swap(a, b);
    EXPECT_LE(required_bandwidth(flow(0, 1, t, 1, a), 1.0), required_bandwidth(flow(0, 1, t, 1, b), 1.0));
  }
}

TEST(Priority, FactorsCancel) {
  const Flow lo = flow(0, 1, 1.0, 2.0), hi = flow(1, 1, 1.5, 2.0);
  EXPECT_LT(compute_priority(lo, 1), compute_priority(hi, 1));
  const Flow cheap = flow(0, 1, 1.0, 1.0), dear = flow(1, 1, 1.0, 3.0);
  EXPECT_LT(compute_priority(cheap, 1), compute_priority(dear, 1));
  EXPECT_DOUBLE_EQ(compute_priority(dear, 1), 3.0);
}

TEST(Priority, PlanCarriesRecomputedPriorities) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.1, 3);
  const Network net = star(3, 5, 2);
  std::vector<Flow> flows;
  for (int i = 0; i < 12; ++i) flows.push_back(flow(i, 1 + i % 3, u(rng), u(rng), u(rng) * 100000));
  SchedulerParams p;
  const auto plan = reschedule_node(0, 0, net, flows, p);
  std::vector<std::pair<double, TaskId>> oracle, got;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const double req = std::min(flows[i].target + flows[i].deficit_bytes / 125000.0, 2.0 * flows[i].target);
    oracle.push_back({-flows[i].budget_per_byte * req, flows[i].task});
    got.push_back({-plan.decisions[i].priority, plan.decisions[i].task});
    EXPECT_NEAR(plan.decisions[i].required, req, 1e-12);
  }
  std::sort(oracle.begin(), oracle.end());
  std::sort(got.begin(), got.end());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    EXPECT_EQ(got[i].second, oracle[i].second);
    EXPECT_NEAR(got[i].first, oracle[i].first, 1e-9);
  }
}

TEST(Reschedule, ThreeSegmentsOneLink) {
  // Three segments leave S1 for the same neighbour; its link fits one.
  const Network net = star(1, 1.2, 1.5);
  std::vector<Flow> flows = {flow(10, 1, 1.0, 1.0), flow(11, 1, 1.0, 3.0), flow(12, 1, 1.0, 2.0)};
  const auto plan = reschedule_node(0, 0, net, flows, SchedulerParams{});
  EXPECT_EQ(plan.decisions[1].kind, LinkKind::kDirectDedicated);
  EXPECT_EQ(plan.decisions[0].kind, LinkKind::kPublic);
  EXPECT_EQ(plan.decisions[2].kind, LinkKind::kPublic);
  // 1.5 Mbps of uplink split 1:2; the larger share is capped at the
  // requirement and the rest goes to the other flow.
  EXPECT_NEAR(plan.decisions[2].rate, 1.0, 1e-9);
  EXPECT_NEAR(plan.decisions[0].rate, 0.5, 1e-9);
  EXPECT_NEAR(plan.decisions[1].rate, 1.0, 1e-12);
}

TEST(Reschedule, SingleFlowAmpleLink) {
  const Network net = star(1, 10, 2);
  std::vector<Flow> flows = {flow(0, 1, 1.0, 1.0, 0.5 * 125000)};
  const auto plan = reschedule_node(0, 0, net, flows, SchedulerParams{});
  EXPECT_EQ(plan.decisions[0].kind, LinkKind::kDirectDedicated);
  EXPECT_DOUBLE_EQ(plan.decisions[0].rate, 1.5);
  ASSERT_EQ(plan.decisions[0].lanes.size(), 1u);
}

TEST(Reschedule, DedicatedOnlyNeverUsesOverlay) {
  const Network net = star(1, 1.0, 2.0);
  std::vector<Flow> flows = {flow(0, 1, 1.0, 2.0), flow(1, 1, 1.0, 1.0)};
  SchedulerParams p;
  p.mode = PlatformMode::kDedicatedOnly;
  const auto plan = reschedule_node(0, 0, net, flows, p);
  EXPECT_EQ(plan.decisions[0].kind, LinkKind::kDirectDedicated);
  EXPECT_EQ(plan.decisions[1].rate, 0.0);
}

TEST(Reschedule, PublicOnlyIgnoresLinks) {
  const Network net = star(1, 10.0, 2.0);
  std::vector<Flow> flows = {flow(0, 1, 1.0, 2.0)};
  SchedulerParams p;
  p.mode = PlatformMode::kPublicOnly;
  const auto plan = reschedule_node(0, 0, net, flows, p);
  EXPECT_EQ(plan.decisions[0].kind, LinkKind::kPublic);
  EXPECT_EQ(plan.decisions[0].rate, 1.0);
}

TEST(Reschedule, PathHolderUpgradesOnlyWithLeftover) {
  const Network net = star(1, 1.5, 2.0);
  Flow holder = flow(0, 1, 1.0, 5.0);
  holder.kind = LinkKind::kForwardingDedicated;
  holder.holds_path = true;
  std::vector<Flow> flows = {holder, flow(1, 1, 1.0, 1.0)};
  const auto plan = reschedule_node(0, 0, net, flows, SchedulerParams{});
  EXPECT_EQ(plan.decisions[1].kind, LinkKind::kDirectDedicated);
  EXPECT_EQ(plan.decisions[0].kind, LinkKind::kForwardingDedicated);
  EXPECT_TRUE(plan.decisions[0].keep_path);
}

// Reference for the packing rule without forwarding: per next hop, targets
// in priority order until one does not fit, then top-ups in the same order;
// everything left shares the uplink in proportion to priority.
std::vector<double> greedy_oracle(const Network& net, const std::vector<Flow>& flows, double epoch, double cap) {
  const std::size_t n = flows.size();
  std::vector<double> req(n), pri(n), rate(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    req[i] = std::min(flows[i].target + flows[i].deficit_bytes / (epoch * 125000.0), cap * flows[i].target);
    pri[i] = flows[i].budget_per_byte * req[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return pri[a] != pri[b] ? pri[a] > pri[b] : flows[a].task < flows[b].task;
  });
  std::map<NodeId, double> room;
  for (NodeId v = 1; static_cast<std::size_t>(v) < net.node_count(); ++v)
    for (LinkId l : net.links_between(0, v)) room[v] += net.residual(ResourceRef::link(l));
  std::map<NodeId, bool> stopped;
  std::vector<std::size_t> spill, placed;
  for (std::size_t i : order) {
    const NodeId v = flows[i].next;
    if (stopped[v] || room[v] + 1e-9 < flows[i].target) {
      stopped[v] = true;
      spill.push_back(i);
      continue;
    }
    rate[i] = std::min(req[i], flows[i].target);
    room[v] -= rate[i];
    placed.push_back(i);
  }
  for (std::size_t i : placed) {
    const double more = std::min(req[i] - rate[i], room[flows[i].next]);
    rate[i] += more;
    room[flows[i].next] -= more;
  }
  // Water level by bisection: rate = min(req, level * priority).
  double capacity = net.residual(ResourceRef::uplink(0)), need = 0;
  for (std::size_t i : spill) need += req[i];
  if (need <= capacity) {
    for (std::size_t i : spill) rate[i] = req[i];
  } else {
    double lo = 0, hi = 1e9;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      double s = 0;
      for (std::size_t i : spill) s += std::min(req[i], mid * pri[i]);
      (s > capacity ? hi : lo) = mid;
    }
    for (std::size_t i : spill) rate[i] = std::min(req[i], lo * pri[i]);
  }
  return rate;
}

TEST(Reschedule, MatchesGreedyOracle) {
  Rng rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    Network net;
    net.add_service({1.0});
    net.add_node(10, {0}, 0.5 + 2.5 * u(rng), 10);
    for (int v = 1; v <= 3; ++v) net.add_node(10, {0}, 2, 10);
    for (int v = 1; v <= 3; ++v) {
      const int parallel = static_cast<int>(u(rng) * 3);
      for (int k = 0; k < parallel; ++k) {
        const LinkId l = net.add_link(0, v, 1 + 4 * u(rng), 1);
        net.allocate(ResourceRef::link(l), u(rng) * net.link(l).bandwidth * 0.5);
      }
    }
    net.rebuild_directory();
    std::vector<Flow> flows;
    for (int i = 0; i < 5; ++i)
      flows.push_back(flow(i, 1 + static_cast<int>(u(rng) * 3), 0.5 + u(rng) * 1.5, 0.2 + u(rng),
                           u(rng) < 0.5 ? 0 : u(rng) * 200000));
    SchedulerParams p;
    const auto plan = reschedule_node(0, 0, net, flows, p);
    const auto want = greedy_oracle(net, flows, p.epoch, p.required_cap);

    std::map<LinkId, double> used;
    double overlay = 0;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const auto& d = plan.decisions[i];
      EXPECT_NEAR(d.rate, want[i] < p.rate_floor ? 0 : want[i], 1e-6) << "trial " << trial << " flow " << i;
      if (d.kind == LinkKind::kPublic) overlay += d.rate;
      double lanes = 0;
      for (const auto& [l, r] : d.lanes) {
        used[l] += r;
        lanes += r;
        EXPECT_EQ(std::min(net.link(l).a, net.link(l).b), 0);
        EXPECT_EQ(std::max(net.link(l).a, net.link(l).b), flows[i].next);
      }
      if (d.kind == LinkKind::kDirectDedicated) {
        EXPECT_NEAR(lanes, d.rate, 1e-12);
      }
      EXPECT_LE(d.rate, d.required + 1e-9);
    }
    for (const auto& [l, r] : used) EXPECT_LE(r, net.residual(ResourceRef::link(l)) + 1e-9);
    EXPECT_LE(overlay, net.residual(ResourceRef::uplink(0)) + 1e-9);

    // A short overlay flow means the uplink is spent.
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const auto& d = plan.decisions[i];
      if (d.kind == LinkKind::kPublic && d.rate + 1e-6 < d.required) {
        EXPECT_NEAR(overlay, net.residual(ResourceRef::uplink(0)), 1e-6);
      }
    }
    // Within a next hop, no dedicated capacity goes below a higher-priority
    // flow that received none.
    for (std::size_t i = 0; i < flows.size(); ++i)
      for (std::size_t j = 0; j < flows.size(); ++j)
        if (flows[i].next == flows[j].next && plan.decisions[i].priority > plan.decisions[j].priority &&
            plan.decisions[i].kind != LinkKind::kDirectDedicated) {
          EXPECT_NE(plan.decisions[j].kind, LinkKind::kDirectDedicated);
        }
  }
}

TEST(Reschedule, PooledFlowLaunchesProbe) {
  // 0-1 is full; 0-2-1 has room.
  Network net;
  net.add_service({1.0});
  for (int i = 0; i < 3; ++i) net.add_node(10, {0}, 2, 10);
  const LinkId direct = net.add_link(0, 1, 1, 1);
  net.add_link(0, 2, 5, 1);
  net.add_link(2, 1, 5, 1);
  net.rebuild_directory();
  net.allocate(ResourceRef::link(direct), 1);
  Flow f = flow(0, 1, 1.0, 1.0);
  f.max_hops = 3;
  std::vector<Flow> flows = {f};
  const auto plan = reschedule_node(0, 0, net, flows, SchedulerParams{});
  EXPECT_EQ(plan.decisions[0].kind, LinkKind::kPublic);
  EXPECT_EQ(plan.decisions[0].probe_path, (std::vector<LinkId>{1, 2}));
  EXPECT_EQ(plan.decisions[0].rate, 1.0);  // overlay meanwhile
}

TEST(Probe, TwoHopPath) {
  Network net;
  net.add_service({1.0});
  for (int i = 0; i < 3; ++i) net.add_node(10, {0}, 2, 10);
  net.add_link(0, 1, 5, 1);
  net.add_link(1, 2, 5, 1);
  net.add_link(0, 2, 5, 1);
  net.rebuild_directory();
  const ResidualView view(net);
  EXPECT_EQ(multi_hop_probe(0, 2, 1.0, 2, view), (std::vector<LinkId>{0, 1}));
}

TEST(Probe, TooLongPathsRefused) {
  Network net;
  net.add_service({1.0});
  for (int i = 0; i < 4; ++i) net.add_node(10, {0}, 2, 10);
  for (int i = 0; i < 3; ++i) net.add_link(i, i + 1, 5, 1);
  net.rebuild_directory();
  const ResidualView view(net);
  EXPECT_FALSE(multi_hop_probe(0, 3, 1.0, 2, view));
  EXPECT_TRUE(multi_hop_probe(0, 3, 1.0, 3, view));
  EXPECT_FALSE(multi_hop_probe(0, 3, 6.0, 3, view));
}

// Shortest simple path of 2..max links, each with room for `rate`.
int shortest_by_search(const Network& net, NodeId u, NodeId v, double rate, int max_hops) {
  int best = -1;
  std::vector<char> seen(net.node_count(), 0);
  std::function<void(NodeId, int)> dfs = [&](NodeId x, int len) {
    if (x == v) {
      if (len >= 2 && (best < 0 || len < best)) best = len;
      return;
    }
    if (len == max_hops) return;
    for (const auto& a : net.neighbors(x)) {
      if (seen[a.neighbor] || net.residual(ResourceRef::link(a.link)) + 1e-9 < rate) continue;
      if (x == u && a.neighbor == v) continue;
      seen[a.neighbor] = 1;
      dfs(a.neighbor, len + 1);
      seen[a.neighbor] = 0;
    }
  };
  seen[u] = 1;
  dfs(u, 0);
  return best;
}

TEST(Probe, ShortestAgainstExhaustiveSearch) {
  Rng rng(12);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    Network net;
    net.add_service({1.0});
    const int n = 3 + trial % 6;
    for (int i = 0; i < n; ++i) net.add_node(10, {0}, 2, 10);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (U(rng) < 0.4) net.add_link(a, b, 0.5 + 2 * U(rng), 1);
    net.rebuild_directory();
    const NodeId u = 0, v = n - 1;
    const double rate = 1.0;
    const int max_hops = 2 + trial % 4;
    const auto path = multi_hop_probe(u, v, rate, max_hops, ResidualView(net));
    const int oracle = shortest_by_search(net, u, v, rate, max_hops);
    ASSERT_EQ(path.has_value(), oracle > 0) << trial;
    if (!path) continue;
    EXPECT_EQ(static_cast<int>(path->size()), oracle) << trial;
    NodeId at = u;
    for (LinkId l : *path) {
      EXPECT_GE(net.residual(ResourceRef::link(l)) + 1e-9, rate);
      ASSERT_TRUE(net.link(l).a == at || net.link(l).b == at);
      at = net.link(l).other(at);
    }
    EXPECT_EQ(at, v);
  }
}

TEST(View, TakesAreLocal) {
  Network net = star(2, 5, 2);
  ResidualView view(net);
  view.take_link(0, 1.5);
  view.take_link(0, 1.0);
  view.take_uplink(0, 0.5);
  EXPECT_DOUBLE_EQ(view.link(0), 2.5);
  EXPECT_DOUBLE_EQ(view.link(1), 5.0);
  EXPECT_DOUBLE_EQ(view.uplink(0), 1.5);
  EXPECT_EQ(net.allocated(ResourceRef::link(0)), 0.0);
}

}  // namespace
}  // namespace bimodal
