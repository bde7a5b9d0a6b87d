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

#include "bimodal/scheduler.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>

#include "bimodal/text.hpp"

namespace bimodal {

double required_bandwidth(const Flow& flow, double epoch, double cap_multiple) {
  const double catch_up = std::max(0.0, flow.deficit_bytes) / (epoch * kBytesPerMbps);
  return std::min(flow.target + catch_up, cap_multiple * flow.target);
}

double compute_priority(const Flow& flow, double epoch, double cap_multiple) {
  return flow.budget_per_byte * required_bandwidth(flow, epoch, cap_multiple);
}

void ResidualView::take(Taken& t, int id, double amount) {
  for (auto& [k, v] : t)
    if (k == id) {
      v += amount;
      return;
    }
  t.emplace_back(id, amount);
}

double ResidualView::taken(const Taken& t, int id) {
  for (const auto& [k, v] : t)
    if (k == id) return v;
  return 0;
}

double ResidualView::link(LinkId l) const { return net_->residual(ResourceRef::link(l)) - taken(links_, l); }

double ResidualView::uplink(NodeId n) const {
  return net_->residual(ResourceRef::uplink(n)) - taken(uplinks_, n);
}

std::optional<std::vector<LinkId>> multi_hop_probe(NodeId u, NodeId v, double rate, int max_hops,
                                                   const ResidualView& view) {
  if (max_hops < 2 || u == v) return std::nullopt;
  const Network& net = view.network();
  const std::size_t n = net.node_count();
  std::vector<int> depth(n, -1);
  std::vector<LinkId> via(n, -1);
  std::vector<NodeId> parent(n, kNoNode);
  std::queue<NodeId> q;
  depth[u] = 0;
  q.push(u);
  while (!q.empty()) {
    const NodeId x = q.front();
    q.pop();
    if (depth[x] >= max_hops) continue;
    for (const auto& adj : net.neighbors(x)) {
      if ((x == u && adj.neighbor == v) || depth[adj.neighbor] >= 0) continue;
      if (view.link(adj.link) + kCapacityEps < rate) continue;
      depth[adj.neighbor] = depth[x] + 1;
      parent[adj.neighbor] = x;
      via[adj.neighbor] = adj.link;
      if (adj.neighbor == v) {
        std::vector<LinkId> path;
        for (NodeId y = v; y != u; y = parent[y]) path.push_back(via[y]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      q.push(adj.neighbor);
    }
  }
  return std::nullopt;
}

namespace {

void water_fill(double capacity, std::span<FlowDecision*> flows) {
  std::vector<FlowDecision*> open(flows.begin(), flows.end());
  for (auto* d : open) d->rate = 0;
  bool equal_weights = std::all_of(open.begin(), open.end(), [](auto* d) { return d->priority <= 0; });
  auto weight = [&](const FlowDecision* d) { return equal_weights ? 1.0 : std::max(0.0, d->priority); };
  while (!open.empty() && capacity > kCapacityEps) {
    double total = 0;
    for (auto* d : open) total += weight(d);
    if (total <= 0) break;
    const bool capped = std::any_of(open.begin(), open.end(), [&](auto* d) {
      return d->rate + capacity * weight(d) / total >= d->required;
    });
    if (!capped) {
      for (auto* d : open) d->rate += capacity * weight(d) / total;
      break;
    }
    // Saturate every flow whose share covers its need, then redistribute.
    std::vector<FlowDecision*> next;
    double used = 0;
    for (auto* d : open) {
      const double share = capacity * weight(d) / total;
      if (d->rate + share >= d->required) {
        used += d->required - d->rate;
        d->rate = d->required;
      } else {
        next.push_back(d);
      }
    }
    capacity -= used;
    open.swap(next);
  }
}

}  // namespace

AllocationPlan reschedule_node(NodeId u, double now, const Network& net, std::span<const Flow> flows,
                               const SchedulerParams& params) {
  AllocationPlan plan;
  plan.node = u;
  plan.time = now;
  plan.decisions.resize(flows.size());
  ResidualView view(net);
  const bool dedicated = allows_dedicated(params.mode);
  const bool overlay = allows_public(params.mode);

  std::vector<std::size_t> order(flows.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    FlowDecision& d = plan.decisions[i];
    d.task = flows[i].task;
    d.segment = flows[i].segment;
    d.required = required_bandwidth(flows[i], params.epoch, params.required_cap);
    d.priority = compute_priority(flows[i], params.epoch, params.required_cap);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = plan.decisions[a];
    const auto& db = plan.decisions[b];
    if (da.priority != db.priority) return da.priority > db.priority;
    if (da.task != db.task) return da.task < db.task;
    return da.segment < db.segment;
  });

  // Group by next hop; std::map keeps groups in node-id order.
  std::map<NodeId, std::vector<std::size_t>> groups;
  for (std::size_t i : order) groups[flows[i].next].push_back(i);
  std::vector<std::size_t> rank(flows.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  // Direct links: every flow first gets its target in priority order, then
  // the remainder tops flows up toward their required rate in the same order.
  // Flows holding (or probing for) a forwarding path only move onto the
  // direct link with what is left, so an upgrade never displaces anyone.
  std::vector<std::size_t> pool;
  auto place = [&](FlowDecision& d, const std::vector<LinkId>& links, double want) {
    for (LinkId l : links) {
      if (want <= 0) break;
      const double take = std::min(want, std::max(0.0, view.link(l)));
      if (take < params.rate_floor) continue;
      auto lane = std::find_if(d.lanes.begin(), d.lanes.end(), [l](const auto& x) { return x.first == l; });
      if (lane == d.lanes.end())
        d.lanes.emplace_back(l, take);
      else
        lane->second += take;
      view.take_link(l, take);
      d.rate += take;
      want -= take;
    }
  };
  for (const auto& [v, members] : groups) {
    const auto links = dedicated ? net.links_between(u, v) : std::vector<LinkId>{};
    auto fits = [&](std::size_t i) {
      double available = 0;
      for (LinkId l : links) available += std::max(0.0, view.link(l));
      return !links.empty() && available + kCapacityEps >= flows[i].target;
    };
    std::vector<std::size_t> placed;
    auto take_direct = [&](std::size_t i) {
      FlowDecision& d = plan.decisions[i];
      d.kind = LinkKind::kDirectDedicated;
      place(d, links, std::min(d.required, flows[i].target));
      placed.push_back(i);
    };
    bool exhausted = false;
    for (std::size_t i : members) {
      if (flows[i].holds_path) continue;
      exhausted = exhausted || !fits(i);
      if (exhausted)
        pool.push_back(i);
      else
        take_direct(i);
    }
    for (std::size_t i : members) {
      if (!flows[i].holds_path) continue;
      if (fits(i))
        take_direct(i);
      else
        pool.push_back(i);
    }
    std::sort(placed.begin(), placed.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
    for (std::size_t i : placed) {
      FlowDecision& d = plan.decisions[i];
      place(d, links, d.required - d.rate);
    }
  }

  std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
  std::vector<FlowDecision*> overlay_flows;
  for (std::size_t i : pool) {
    const Flow& f = flows[i];
    FlowDecision& d = plan.decisions[i];
    if (f.holds_path && f.kind == LinkKind::kForwardingDedicated) {
      d.kind = LinkKind::kForwardingDedicated;
      d.rate = f.target;
      d.keep_path = true;
      continue;
    }
    d.kind = LinkKind::kPublic;
    if (f.holds_path) {
      d.keep_path = true;  // probe still in flight
    } else if (dedicated && f.max_hops >= 2) {
      if (auto path = multi_hop_probe(u, f.next, f.target, f.max_hops, view)) {
        for (LinkId l : *path) view.take_link(l, f.target);
        d.probe_path = std::move(*path);
      }
    }
    if (overlay) overlay_flows.push_back(&d);
  }
  water_fill(std::max(0.0, view.uplink(u)), overlay_flows);
  for (auto* d : overlay_flows)
    if (d->rate < params.rate_floor) d->rate = 0;
  return plan;
}

void write_plan_header(std::ostream& os) { os << "time,node,task,segment,kind,rate,required,priority\n"; }

void write_plan(std::ostream& os, const AllocationPlan& plan) {
  for (const auto& d : plan.decisions) {
    os << text::format_double(plan.time) << ',' << plan.node << ',' << d.task << ',' << d.segment << ','
       << to_string(d.kind) << ',' << text::format_double(d.rate) << ',' << text::format_double(d.required)
       << ',' << text::format_double(d.priority) << '\n';
  }
}

}  // namespace bimodal
