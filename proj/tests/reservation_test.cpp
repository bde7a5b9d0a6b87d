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
#include <vector>

#include "bimodal/reservation.hpp"
#include "test_support.hpp"

namespace bimodal {
namespace {

using testing::line_network;
using testing::make_task;

// Line 0-1-2-3; components on 1 and 2, all segments dedicated.
struct LineFixture {
  Network net = line_network({{}, {0}, {1}, {}}, 4, 3);
  MappingParams params;
  MappingContext ctx{make_task({0, 1}, 0, 3, {}, {1.5, 2.0}), params};

  PartialMap map(TaskId id = 0) const {
    PartialMap m = initial_map(ctx);
    m.task = id;
    m.placement = {1, 2};
    m.prefix_length = 2;
    m.hops.push_back({2, 3, 2, 2});
    m.hops.push_back({1, 2, 1, 1});
    m.hops.push_back({0, 1, 0, 0});
    m.at = 0;
    return m;
  }
  std::vector<double> snapshot() const {
    std::vector<double> v;
    for (NodeId n = 0; n < 4; ++n) {
      v.push_back(net.allocated(ResourceRef::cpu(n)));
      v.push_back(net.allocated(ResourceRef::uplink(n)));
    }
    for (LinkId l = 0; l < 3; ++l) v.push_back(net.allocated(ResourceRef::link(l)));
    return v;
  }
};

TEST(Probe, StopsFollowTheData) {
  LineFixture f;
  const auto stops = probe_path(f.map(), f.ctx, f.net);
  ASSERT_EQ(stops.size(), 4u);
  for (NodeId n = 0; n < 4; ++n) EXPECT_EQ(stops[n].node, n);
  EXPECT_EQ(stops[0].cpu, 0);
  EXPECT_EQ(stops[1].cpu, 1.5);
  EXPECT_EQ(stops[2].cpu, 2.0);
  EXPECT_EQ(stops[1].components, std::vector<int>{0});
  for (int i = 0; i < 3; ++i) {
    ASSERT_TRUE(stops[i].out);
    EXPECT_EQ(*stops[i].out, ResourceRef::link(i));
    EXPECT_EQ(stops[i].out_segment, i);
  }
  EXPECT_FALSE(stops[3].out);
}

TEST(Probe, AmpleResidualsReduceByClaims) {
  LineFixture f;
  ClaimRegistry claims;
  auto probe = make_probe(f.map(), f.ctx, f.net);
  while (!probe.at_end()) ASSERT_TRUE(try_reserve(probe, f.net, claims).reserved);
  EXPECT_EQ(f.net.residual(ResourceRef::cpu(1)), 2.5);
  EXPECT_EQ(f.net.residual(ResourceRef::cpu(2)), 2.0);
  for (LinkId l = 0; l < 3; ++l) EXPECT_EQ(f.net.residual(ResourceRef::link(l)), 2.0);
  EXPECT_TRUE(claims.audit(f.net).empty());
  EXPECT_EQ(probe.reserved.size(), probe.position);
}

TEST(Probe, CpuShortfallChangesNothing) {
  LineFixture f;
  ClaimRegistry claims;
  f.net.allocate(ResourceRef::cpu(2), 3.0);  // leaves 1.0 of the 2.0 needed
  auto probe = make_probe(f.map(), f.ctx, f.net);
  ASSERT_TRUE(try_reserve(probe, f.net, claims).reserved);
  ASSERT_TRUE(try_reserve(probe, f.net, claims).reserved);
  const auto before = f.snapshot();
  const auto out = try_reserve(probe, f.net, claims);
  EXPECT_FALSE(out.reserved);
  EXPECT_EQ(out.reason, RejectReason::kInsufficientCpu);
  EXPECT_EQ(f.snapshot(), before);
  EXPECT_EQ(probe.position, 2u);
}

TEST(Probe, BandwidthShortfall) {
  LineFixture f;
  ClaimRegistry claims;
  f.net.allocate(ResourceRef::link(1), 2.5);
  auto probe = make_probe(f.map(), f.ctx, f.net);
  ASSERT_TRUE(try_reserve(probe, f.net, claims).reserved);
  const auto out = try_reserve(probe, f.net, claims);
  EXPECT_EQ(out.reason, RejectReason::kInsufficientBandwidth);
  EXPECT_EQ(f.net.allocated(ResourceRef::cpu(1)), 0.0);
}

TEST(Probe, RollbackRestoresResiduals) {
  LineFixture f;
  ClaimRegistry claims;
  auto empty = make_probe(f.map(), f.ctx, f.net);
  EXPECT_FALSE(rollback_step(empty, f.net, claims));
  rollback(empty, f.net, claims);

  const auto before = f.snapshot();
  auto probe = make_probe(f.map(), f.ctx, f.net);
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(try_reserve(probe, f.net, claims).reserved);
  EXPECT_NE(f.snapshot(), before);
  rollback(probe, f.net, claims);
  EXPECT_EQ(f.snapshot(), before);
  EXPECT_TRUE(claims.empty());
  EXPECT_EQ(probe.position, 0u);
}

TEST(Probe, RollbackBesideAnotherTasksClaim) {
  LineFixture f;
  ClaimRegistry claims;
  auto a = make_probe(f.map(0), f.ctx, f.net);
  auto b = make_probe(f.map(1), f.ctx, f.net);
  ASSERT_TRUE(try_reserve(a, f.net, claims).reserved);
  ASSERT_TRUE(try_reserve(b, f.net, claims).reserved);  // both hold link 0
  ASSERT_TRUE(try_reserve(a, f.net, claims).reserved);
  rollback(a, f.net, claims);
  EXPECT_EQ(f.net.residual(ResourceRef::link(0)), 3.0 - 1.0);
  EXPECT_EQ(f.net.residual(ResourceRef::link(1)), 3.0);
  EXPECT_EQ(f.net.allocated(ResourceRef::cpu(1)), 0.0);
  EXPECT_TRUE(claims.audit(f.net).empty());
}

// Two probes need 2 Mbps of a 3 Mbps link; every interleaving of their
// steps lets exactly one through.
TEST(Probe, ContendedLinkEveryInterleaving) {
  auto build = [] {
    LineFixture f;
    TaskSpec t = make_task({0, 1}, 0, 3, {}, {0.5, 0.5});
    t.target_rate = 2.0;
    f.ctx = MappingContext(t, f.params);
    f.net = line_network({{}, {0}, {1}, {}}, 4, 3);
    return f;
  };
  // 0 = a step, 1 = b step; each probe takes four steps (three reserves
  // and the commit check), padded so one schedule covers the loser.
  std::vector<int> order = {0, 0, 0, 0, 1, 1, 1, 1};
  int schedules = 0;
  do {
    LineFixture f = build();
    ClaimRegistry claims;
    ReservationProbe p[2] = {make_probe(f.map(0), f.ctx, f.net), make_probe(f.map(1), f.ctx, f.net)};
    bool failed[2] = {false, false};
    for (int who : order) {
      if (failed[who] || p[who].at_end()) continue;
      if (!try_reserve(p[who], f.net, claims).reserved) {
        rollback(p[who], f.net, claims);
        failed[who] = true;
      }
      ASSERT_TRUE(claims.audit(f.net).empty());
    }
    const int committed = p[0].at_end() + p[1].at_end();
    EXPECT_EQ(committed, 1);
    EXPECT_NE(failed[0], failed[1]);
    const int winner = p[0].at_end() ? 0 : 1;
    for (LinkId l = 0; l < 3; ++l) EXPECT_DOUBLE_EQ(f.net.residual(ResourceRef::link(l)), 1.0);
    EXPECT_EQ(claims.task_total(1 - winner, ResourceRef::link(0)), 0.0);
    ++schedules;
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(schedules, 70);
}

TEST(Commit, SegmentsAndRelease) {
  LineFixture f;
  ClaimRegistry claims;
  const auto before = f.snapshot();
  auto probe = make_probe(f.map(), f.ctx, f.net);
  while (!probe.at_end()) ASSERT_TRUE(try_reserve(probe, f.net, claims).reserved);
  const ActiveTask active = commit(std::move(probe), f.ctx);
  ASSERT_EQ(active.segments.size(), 3u);
  for (int s = 0; s < 3; ++s) {
    const auto& seg = active.segments[s];
    EXPECT_EQ(seg.kind, LinkKind::kDirectDedicated);
    EXPECT_EQ(seg.rate, 1.0);
    EXPECT_EQ(seg.upstream, s);
    EXPECT_EQ(seg.downstream, s + 1);
    ASSERT_EQ(seg.lanes.size(), 1u);
    EXPECT_EQ(seg.lanes[0].first, s);
  }
  release(active, f.net, claims);
  EXPECT_EQ(f.snapshot(), before);
  EXPECT_TRUE(claims.empty());
}

TEST(Commit, RequiresCompleteProbe) {
  LineFixture f;
  auto probe = make_probe(f.map(), f.ctx, f.net);
  EXPECT_THROW(commit(std::move(probe), f.ctx), std::logic_error);
}

TEST(Claims, AuditAndBookkeeping) {
  LineFixture f;
  ClaimRegistry claims;
  claims.claim(f.net, 4, 0, ResourceRef::link(1), 1.25);
  claims.claim(f.net, 4, kCpuTag, ResourceRef::cpu(2), 1.0);
  EXPECT_TRUE(claims.audit(f.net).empty());
  EXPECT_EQ(claims.amount(4, 0, ResourceRef::link(1)), 1.25);

  claims.retag(4, 0, kMultiHopTagOffset);
  EXPECT_EQ(claims.amount(4, 0, ResourceRef::link(1)), 0.0);
  EXPECT_EQ(claims.amount(4, kMultiHopTagOffset, ResourceRef::link(1)), 1.25);
  EXPECT_TRUE(claims.audit(f.net).empty());

  EXPECT_THROW(claims.release(f.net, 4, 0, ResourceRef::link(1), 1.0), std::logic_error);
  f.net.allocate(ResourceRef::link(0), 0.5);  // outside any claim
  EXPECT_EQ(claims.audit(f.net).size(), 1u);
  f.net.release(ResourceRef::link(0), 0.5);

  claims.release_tag(f.net, 4, kMultiHopTagOffset);
  EXPECT_EQ(f.net.allocated(ResourceRef::link(1)), 0.0);
  claims.release_task(f.net, 4);
  EXPECT_TRUE(claims.empty());
  EXPECT_EQ(f.net.allocated(ResourceRef::cpu(2)), 0.0);
}

TEST(Claims, RandomSequencesNeverLeak) {
  Rng rng(31);
  LineFixture f;
  ClaimRegistry claims;
  std::vector<ReservationProbe> live;
  std::vector<ActiveTask> active;
  std::uniform_int_distribution<int> op(0, 3);
  for (int step = 0; step < 2000; ++step) {
    switch (op(rng)) {
      case 0:
        if (live.size() < 4) live.push_back(make_probe(f.map(static_cast<TaskId>(step)), f.ctx, f.net));
        break;
      case 1:
        if (!live.empty()) {
          auto& p = live[step % live.size()];
          if (p.at_end()) {
            active.push_back(commit(std::move(p), f.ctx));
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(step % live.size()));
          } else if (!try_reserve(p, f.net, claims).reserved) {
            rollback(p, f.net, claims);
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(step % live.size()));
          }
        }
        break;
      case 2:
        if (!active.empty()) {
          release(active.front(), f.net, claims);
          active.erase(active.begin());
        }
        break;
      default:
        if (!live.empty()) rollback_step(live.back(), f.net, claims);
    }
    ASSERT_TRUE(claims.audit(f.net).empty()) << step;
  }
}

}  // namespace
}  // namespace bimodal
