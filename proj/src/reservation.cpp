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

#include "bimodal/reservation.hpp"

#include <cmath>
#include <stdexcept>

#include "bimodal/text.hpp"

namespace bimodal {

void ClaimRegistry::claim(Network& net, TaskId task, int tag, ResourceRef r, double amount) {
  if (amount <= 0) return;
  net.allocate(r, amount);
  claims_[ClaimKey{task, tag, r}] += amount;
}

void ClaimRegistry::release(Network& net, TaskId task, int tag, ResourceRef r, double amount) {
  if (amount <= 0) return;
  auto it = claims_.find(ClaimKey{task, tag, r});
  if (it == claims_.end() || it->second < amount - kCapacityEps * std::max(1.0, it->second))
    throw std::logic_error("release of unclaimed " + to_string(r) + " by task " + std::to_string(task));
  net.release(r, std::min(amount, net.allocated(r)));
  it->second -= amount;
  if (it->second <= 1e-12) claims_.erase(it);
}

void ClaimRegistry::release_tag(Network& net, TaskId task, int tag) {
  auto it = claims_.lower_bound(ClaimKey{task, tag, ResourceRef{ResourceRef::Kind::kCpu, INT32_MIN}});
  while (it != claims_.end() && it->first.task == task && it->first.tag == tag) {
    net.release(it->first.resource, std::min(it->second, net.allocated(it->first.resource)));
    it = claims_.erase(it);
  }
}

void ClaimRegistry::release_task(Network& net, TaskId task) {
  auto it = claims_.lower_bound(ClaimKey{task, INT32_MIN, ResourceRef{ResourceRef::Kind::kCpu, INT32_MIN}});
  while (it != claims_.end() && it->first.task == task) {
    net.release(it->first.resource, std::min(it->second, net.allocated(it->first.resource)));
    it = claims_.erase(it);
  }
}

void ClaimRegistry::retag(TaskId task, int from, int to) {
  auto it = claims_.lower_bound(ClaimKey{task, from, ResourceRef{ResourceRef::Kind::kCpu, INT32_MIN}});
  while (it != claims_.end() && it->first.task == task && it->first.tag == from) {
    claims_[ClaimKey{task, to, it->first.resource}] += it->second;
    it = claims_.erase(it);
  }
}

double ClaimRegistry::amount(TaskId task, int tag, ResourceRef r) const {
  auto it = claims_.find(ClaimKey{task, tag, r});
  return it == claims_.end() ? 0.0 : it->second;
}

double ClaimRegistry::task_total(TaskId task, ResourceRef r) const {
  double sum = 0;
  auto it = claims_.lower_bound(ClaimKey{task, INT32_MIN, ResourceRef{ResourceRef::Kind::kCpu, INT32_MIN}});
  for (; it != claims_.end() && it->first.task == task; ++it)
    if (it->first.resource == r) sum += it->second;
  return sum;
}

std::vector<std::string> ClaimRegistry::audit(const Network& net) const {
  std::vector<double> cpu(net.node_count(), 0), up(net.node_count(), 0), link(net.link_count(), 0);
  std::vector<std::string> problems;
  for (const auto& [key, amount] : claims_) {
    if (amount < 0) problems.push_back("negative claim on " + to_string(key.resource));
    switch (key.resource.kind) {
      case ResourceRef::Kind::kCpu: cpu.at(key.resource.id) += amount; break;
      case ResourceRef::Kind::kUplink: up.at(key.resource.id) += amount; break;
      case ResourceRef::Kind::kLink: link.at(key.resource.id) += amount; break;
    }
  }
  auto check = [&](ResourceRef r, double claimed) {
    const double alloc = net.allocated(r), cap = net.capacity(r);
    const double tol = 1e-9 * std::max(1.0, cap);
    if (std::fabs(alloc - claimed) > tol)
      problems.push_back(to_string(r) + " allocated " + text::format_double(alloc) + " != claimed " +
                         text::format_double(claimed));
    if (alloc < -tol || alloc > cap + tol) problems.push_back(to_string(r) + " outside [0, capacity]");
  };
  for (NodeId n = 0; static_cast<std::size_t>(n) < net.node_count(); ++n) {
    check(ResourceRef::cpu(n), cpu[n]);
    check(ResourceRef::uplink(n), up[n]);
  }
  for (LinkId l = 0; static_cast<std::size_t>(l) < net.link_count(); ++l) check(ResourceRef::link(l), link[l]);
  return problems;
}

std::vector<ProbeStop> probe_path(const PartialMap& map, const MappingContext& ctx, const Network& net) {
  const int n = ctx.components();
  std::vector<ProbeStop> stops(1);
  stops.back().node = ctx.task().source;
  for (int s = 0; s <= n; ++s) {
    // Hops were appended walking upstream; replay them in data order.
    std::vector<MapHop> route;
    for (const auto& h : map.hops)
      if (h.segment == s) route.push_back(h);
    for (auto it = route.rbegin(); it != route.rend(); ++it) {
      ProbeStop& cur = stops.back();
      if (cur.node != it->to) throw std::logic_error("map route is not contiguous");
      cur.out = it->is_public() ? ResourceRef::uplink(it->to) : ResourceRef::link(it->link);
      cur.out_segment = s;
      cur.out_rate = ctx.segment_rate(s);
      cur.delay_to_next = it->is_public() ? net.public_delay_s(it->to, it->from) : net.link_delay_s(it->link);
      stops.emplace_back().node = it->from;
    }
    if (s < n) {
      ProbeStop& cur = stops.back();
      if (cur.node != map.placement[s]) throw std::logic_error("map placement is not on its route");
      cur.cpu += ctx.cpu_demand(s);
      cur.components.push_back(s);
    }
  }
  if (stops.back().node != ctx.task().delivery) throw std::logic_error("map does not end at delivery");
  return stops;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "none";
    case RejectReason::kInsufficientCpu: return "insufficient-cpu";
    case RejectReason::kInsufficientBandwidth: return "insufficient-bandwidth";
  }
  return "none";
}

ReservationProbe make_probe(const PartialMap& map, const MappingContext& ctx, const Network& net) {
  ReservationProbe p;
  p.task = map.task;
  p.map = map;
  p.stops = probe_path(map, ctx, net);
  return p;
}

ReserveOutcome try_reserve(ReservationProbe& probe, Network& net, ClaimRegistry& claims) {
  if (probe.at_end()) throw std::logic_error("probe already at the delivery node");
  const ProbeStop& stop = probe.stops[probe.position];
  if (stop.cpu > 0 && stop.cpu > net.residual(ResourceRef::cpu(stop.node)) + kCapacityEps)
    return {false, RejectReason::kInsufficientCpu};
  if (stop.out && stop.out_rate > net.residual(*stop.out) + kCapacityEps)
    return {false, RejectReason::kInsufficientBandwidth};
  std::vector<AppliedClaim> applied;
  auto apply = [&](int tag, ResourceRef r, double amount) {
    // A shortfall within the slack is rounded down to what is left.
    amount = std::min(amount, net.residual(r));
    claims.claim(net, probe.task, tag, r, amount);
    applied.push_back({tag, r, amount});
  };
  if (stop.cpu > 0) apply(kCpuTag, ResourceRef::cpu(stop.node), stop.cpu);
  if (stop.out) apply(stop.out_segment, *stop.out, stop.out_rate);
  probe.reserved.push_back(std::move(applied));
  ++probe.position;
  return {true, RejectReason::kNone};
}

bool rollback_step(ReservationProbe& probe, Network& net, ClaimRegistry& claims) {
  if (probe.reserved.empty()) return false;
  auto& last = probe.reserved.back();
  for (auto it = last.rbegin(); it != last.rend(); ++it)
    claims.release(net, probe.task, it->tag, it->resource, it->amount);
  probe.reserved.pop_back();
  --probe.position;
  return true;
}

void rollback(ReservationProbe& probe, Network& net, ClaimRegistry& claims) {
  while (rollback_step(probe, net, claims)) {
  }
}

ActiveTask commit(ReservationProbe&& probe, const MappingContext& ctx) {
  if (!probe.at_end()) throw std::logic_error("commit before the probe reached the delivery node");
  const int n = ctx.components();
  ActiveTask a;
  a.task = probe.task;
  a.segments.resize(n + 1);
  for (int s = 0; s <= n; ++s) {
    SegmentAllocation& seg = a.segments[s];
    seg.segment = s;
    seg.kind = segment_kind(probe.map, s);
    seg.target = ctx.segment_rate(s);
    seg.link_limit = ctx.link_limit(s);
    seg.downstream = s < n ? probe.map.placement[s] : ctx.task().delivery;
    seg.upstream = s > 0 ? probe.map.placement[s - 1] : ctx.task().source;
    // Processing revenue of the upstream component, or the hop's own
    // transport budget for the source segment.
    seg.budget_per_byte = s > 0 ? budget_per_input_byte(ctx.budget(), ctx.rates(), s - 1)
                                : ctx.segment_budget(0) / (seg.target * kBytesPerMbps);
  }
  for (std::size_t i = 0; i < probe.stops.size(); ++i) {
    const ProbeStop& stop = probe.stops[i];
    if (!stop.out) continue;
    SegmentAllocation& seg = a.segments[stop.out_segment];
    double amount = 0;
    for (const auto& c : probe.reserved[i])
      if (c.tag == stop.out_segment) amount = c.amount;
    if (stop.out->kind == ResourceRef::Kind::kLink) seg.lanes.emplace_back(stop.out->id, amount);
    seg.rate = seg.rate == 0 ? amount : std::min(seg.rate, amount);
  }
  a.map = std::move(probe.map);
  a.stops = std::move(probe.stops);
  return a;
}

void release(const ActiveTask& active, Network& net, ClaimRegistry& claims) {
  claims.release_task(net, active.task);
}

}  // namespace bimodal
