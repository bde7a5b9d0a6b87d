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

#include "bimodal/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>

namespace bimodal {

int compare_maps(const CostTriple& a, const CostTriple& b, double tie_threshold) {
  const double diff = a.load_balance - b.load_balance;
  if (std::fabs(diff) > tie_threshold) return diff < 0 ? -1 : 1;
  if (a.dedicated_hops != b.dedicated_hops) return a.dedicated_hops > b.dedicated_hops ? -1 : 1;
  if (a.public_hops != b.public_hops) return a.public_hops < b.public_hops ? -1 : 1;
  return 0;
}

MappingContext::MappingContext(const TaskSpec& task, const MappingParams& params)
    : task_(task),
      params_(params),
      rates_(rate_chain(task)),
      budget_(apportion_budget(task, params.transport_fraction)) {
  const int n = components();
  if (task_.source == kNoNode || task_.delivery == kNoNode)
    throw Error(ErrorCode::kInvalidParameters, "task without source or delivery node");
  link_cost_.resize(n + 1);
  link_limit_.resize(n + 1);
  for (int s = 0; s <= n; ++s) {
    link_cost_[s] = params_.hop_cost * segment_rate(s) * kBytesPerMbps;
    int limit = params_.max_segment_links;
    if (link_cost_[s] > 0) {
      double affordable = std::floor(budget_.transport[s] / link_cost_[s] + 1e-9);
      limit = static_cast<int>(std::min<double>(limit, affordable));
    }
    link_limit_[s] = std::max(0, limit);
  }
  cpu_demand_.resize(n);
  for (int c = 0; c < n; ++c) cpu_demand_[c] = task_.cpu_factor[c] * rates_.input_rate[c];
}

PartialMap initial_map(const MappingContext& ctx) {
  PartialMap m;
  m.task = ctx.task().id;
  m.placement.assign(ctx.components(), kNoNode);
  m.at = ctx.task().delivery;
  m.remaining_budget = ctx.segment_budget(ctx.components());
  return m;
}

double map_cpu_at(const PartialMap& map, const MappingContext& ctx, NodeId n) {
  double sum = 0;
  for (int c = 0; c < map.components(); ++c)
    if (map.placement[c] == n) sum += ctx.cpu_demand(c);
  return sum;
}

double map_link_claim(const PartialMap& map, const MappingContext& ctx, LinkId l) {
  double sum = 0;
  for (const auto& h : map.hops)
    if (h.link == l) sum += ctx.segment_rate(h.segment);
  return sum;
}

double map_uplink_claim(const PartialMap& map, const MappingContext& ctx, NodeId n) {
  double sum = 0;
  for (const auto& h : map.hops)
    if (h.is_public() && h.to == n) sum += ctx.segment_rate(h.segment);
  return sum;
}

int segment_link_count(const PartialMap& map, int segment) {
  int k = 0;
  for (const auto& h : map.hops)
    if (h.segment == segment && !h.is_public()) ++k;
  return k;
}

LinkKind segment_kind(const PartialMap& map, int segment) {
  int dedicated = 0;
  for (const auto& h : map.hops) {
    if (h.segment != segment) continue;
    if (h.is_public()) return LinkKind::kPublic;
    ++dedicated;
  }
  if (dedicated == 0) return LinkKind::kLocal;
  return dedicated == 1 ? LinkKind::kDirectDedicated : LinkKind::kForwardingDedicated;
}

CostTriple map_cost(const PartialMap& map, const Network& net, const MappingContext& ctx) {
  CostTriple cost;
  // Distinct servers in placement order; chains are short.
  boost::container::small_vector<std::pair<NodeId, double>, 12> demand;
  for (int c = 0; c < map.components(); ++c) {
    NodeId n = map.placement[c];
    if (n == kNoNode) continue;
    auto it = std::find_if(demand.begin(), demand.end(), [n](const auto& p) { return p.first == n; });
    if (it == demand.end())
      demand.emplace_back(n, ctx.cpu_demand(c));
    else
      it->second += ctx.cpu_demand(c);
  }
  if (!demand.empty()) {
    double sum = 0;
    for (const auto& [n, d] : demand) {
      const auto& node = net.node(n);
      sum += node.cpu_capacity > 0 ? std::min(1.0, (node.cpu_allocated + d) / node.cpu_capacity) : 1.0;
    }
    cost.load_balance = sum / static_cast<double>(demand.size());
  }
  const int segments = map.components() + 1;
  boost::container::small_vector<std::uint8_t, 16> kind(segments, 0);  // 1 dedicated, 2 public
  for (const auto& h : map.hops) kind[h.segment] = h.is_public() ? 2 : 1;
  for (auto k : kind) {
    if (k == 1) ++cost.dedicated_hops;
    if (k == 2) ++cost.public_hops;
  }
  return cost;
}

MapperState::MapperState(int components)
    : best_(components + 1, std::numeric_limits<double>::infinity()),
      spare_(components + 1, -std::numeric_limits<double>::infinity()) {}

std::optional<double> MapperState::best(int prefix) const {
  if (prefix < 0 || static_cast<std::size_t>(prefix) >= best_.size() || std::isinf(best_[prefix]))
    return std::nullopt;
  return best_[prefix];
}

double MapperState::spare(int prefix) const {
  if (prefix < 0 || static_cast<std::size_t>(prefix) >= spare_.size())
    return -std::numeric_limits<double>::infinity();
  return spare_[prefix];
}

// An equal-cost message still gets through when it can travel further than
// every earlier one did.
bool MapperState::admits(int prefix, double cost, double budget, bool admit_equal) const {
  const auto b = best(prefix);
  if (!b || cost < *b) return true;
  if (cost > *b) return false;
  return admit_equal || budget > spare(prefix) + kCapacityEps;
}

void MapperState::record(int prefix, double cost, double budget) {
  if (prefix < 0) return;
  if (static_cast<std::size_t>(prefix) >= best_.size()) {
    best_.resize(prefix + 1, std::numeric_limits<double>::infinity());
    spare_.resize(prefix + 1, -std::numeric_limits<double>::infinity());
  }
  if (cost < best_[prefix]) {
    best_[prefix] = cost;
    spare_[prefix] = budget;
  } else if (cost == best_[prefix]) {
    spare_[prefix] = std::max(spare_[prefix], budget);
  }
}

bool least_cost_admit(MapperState& state, const PartialMap& msg, bool admit_equal) {
  const double c = msg.cost.load_balance;
  const bool admit = state.admits(msg.prefix_length, c, msg.remaining_budget, admit_equal);
  if (admit) state.record(msg.prefix_length, c, msg.remaining_budget);
  return admit;
}

ProcessResult process_map(const PartialMap& msg, const MappingContext& ctx, const Network& net) {
  ProcessResult result;
  const NodeId u = msg.at;
  const int n = ctx.components();
  const TaskSpec& task = ctx.task();
  const MappingParams& params = ctx.params();

  if (msg.complete() && u == task.source) {
    result.feasible = msg;
    return result;
  }

  PartialMap m = msg;
  m.via_public = false;
  result.out.reserve(net.neighbors(u).size() + 8);
  const double cpu_residual = net.residual(ResourceRef::cpu(u));
  double cpu_used = map_cpu_at(m, ctx, u);

  for (int x = 0; x <= n - msg.prefix_length; ++x) {
    if (x > 0) {
      const int c = n - msg.prefix_length - x;
      const ServiceId svc = task.services[c];
      if (!net.node(u).hosts(svc) || cpu_used + ctx.cpu_demand(c) > cpu_residual + kCapacityEps) break;
      cpu_used += ctx.cpu_demand(c);
      m.placement[c] = u;
      m.prefix_length = msg.prefix_length + x;
      m.remaining_budget = ctx.segment_budget(m.open_segment());
      m.cost = map_cost(m, net, ctx);
      if (m.complete() && u == task.source) {
        result.feasible = m;
        break;
      }
    } else if (msg.via_public) {
      // An overlay hop lands on a provider, so it must place before moving on.
      continue;
    }

    const int s = m.open_segment();
    const double rate = ctx.segment_rate(s);
    if (x == 0) m.cost = map_cost(m, net, ctx);
    const int links_so_far = segment_link_count(m, s);

    if (allows_dedicated(params.mode) && links_so_far < ctx.link_limit(s)) {
      for (const auto& adj : net.neighbors(u)) {
        const double claim = map_link_claim(m, ctx, adj.link) + rate;
        if (claim > net.residual(ResourceRef::link(adj.link)) + kCapacityEps) continue;
        MapMessage out{adj.neighbor, net.link_delay_s(adj.link), m};
        out.map.hops.push_back({static_cast<std::int16_t>(s), u, adj.neighbor, adj.link});
        out.map.at = adj.neighbor;
        out.map.remaining_budget = m.remaining_budget - ctx.link_cost(s);
        if (links_so_far == 0) ++out.map.cost.dedicated_hops;
        result.out.push_back(std::move(out));
      }
    }

    // Only a server that placed something, or the portal itself, may use
    // the overlay; forwarding visits stay on dedicated links.
    const bool portal = msg.prefix_length == 0 && msg.hops.empty();
    if ((x > 0 || portal) && allows_public(params.mode)) {
      auto emit_public = [&](NodeId v) {
        if (v == u) return;
        const double claim = map_uplink_claim(m, ctx, v) + rate;
        if (claim > net.residual(ResourceRef::uplink(v)) + kCapacityEps) return;
        MapMessage out{v, net.public_delay_s(u, v), m};
        out.map.hops.push_back({static_cast<std::int16_t>(s), u, v, kPublicLink});
        out.map.at = v;
        out.map.via_public = true;
        ++out.map.cost.public_hops;
        result.out.push_back(std::move(out));
      };
      if (m.complete()) {
        emit_public(task.source);
      } else {
        for (NodeId v : net.service_providers(task.services[s - 1])) emit_public(v);
      }
    }
  }
  return result;
}

std::string describe_route(const PartialMap& map) {
  std::ostringstream os;
  for (std::size_t i = 0; i < map.hops.size(); ++i) {
    const auto& h = map.hops[i];
    if (i) os << ' ';
    os << h.segment << ':' << h.from << (h.is_public() ? "~" : "-") << h.to;
  }
  return os.str();
}

MappingSession::MappingSession(MappingContext ctx, const Network& net)
    : ctx_(std::move(ctx)), net_(&net), states_(net.node_count(), MapperState(ctx_.components())) {}

MapMessage MappingSession::start() {
  ++in_flight_;
  PartialMap m = initial_map(ctx_);
  return MapMessage{m.at, 0.0, std::move(m)};
}

std::vector<MapMessage> MappingSession::receive(const PartialMap& msg, double now,
                                                std::vector<MapTraceEntry>* trace) {
  --in_flight_;
  ++processed_;
  auto log = [&](bool admitted) {
    if (trace)
      trace->push_back({now, msg.task, msg.at, msg.prefix_length, msg.cost.load_balance, admitted,
                        describe_route(msg)});
  };
  if (msg.complete() && msg.at == ctx_.task().source) {
    log(true);
    feasible_.push_back({msg, static_cast<int>(feasible_.size())});
    return {};
  }
  if (ctx_.params().least_cost_map &&
      !least_cost_admit(states_[msg.at], msg, ctx_.params().admit_equal_cost)) {
    ++pruned_;
    log(false);
    return {};
  }
  log(true);
  ProcessResult r = process_map(msg, ctx_, *net_);
  if (r.feasible) feasible_.push_back({std::move(*r.feasible), static_cast<int>(feasible_.size())});
  if (!trace && ctx_.params().least_cost_map) {
    // Records only tighten, so a message rejected now is rejected on arrival.
    const bool equal_ok = ctx_.params().admit_equal_cost;
    auto doomed = [&](const MapMessage& m) {
      if (m.map.complete() && m.map.at == ctx_.task().source) return false;
      return !states_[m.map.at].admits(m.map.prefix_length, m.map.cost.load_balance,
                                       m.map.remaining_budget, equal_ok);
    };
    std::size_t kept = 0;
    for (auto& m : r.out) {
      if (doomed(m)) {
        ++processed_;
        ++pruned_;
        settle_time_ = std::max(settle_time_, now + m.delay);
      } else {
        if (&r.out[kept] != &m) r.out[kept] = std::move(m);
        ++kept;
      }
    }
    r.out.resize(kept);
  }
  in_flight_ += static_cast<std::int64_t>(r.out.size());
  return std::move(r.out);
}

std::vector<FeasibleMap> run_mapping(const MappingContext& ctx, const Network& net,
                                     std::vector<MapTraceEntry>* trace) {
  struct Pending {
    double time;
    std::uint64_t seq;
    std::size_t slot;
  };
  auto later = [](const Pending& a, const Pending& b) {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  };
  std::priority_queue<Pending, std::vector<Pending>, decltype(later)> queue(later);
  std::vector<PartialMap> slots;
  std::vector<std::size_t> free_slots;
  std::uint64_t seq = 0;
  auto push = [&](double t, MapMessage&& m) {
    std::size_t slot;
    if (!free_slots.empty()) {
      slot = free_slots.back();
      free_slots.pop_back();
      slots[slot] = std::move(m.map);
    } else {
      slot = slots.size();
      slots.push_back(std::move(m.map));
    }
    queue.push({t + m.delay, seq++, slot});
  };

  MappingSession session(ctx, net);
  push(0.0, session.start());
  while (!queue.empty()) {
    Pending p = queue.top();
    queue.pop();
    PartialMap msg = std::move(slots[p.slot]);
    free_slots.push_back(p.slot);
    for (auto& out : session.receive(msg, p.time, trace)) push(p.time, std::move(out));
  }
  return session.take_feasible();
}

MapRanking::MapRanking(std::vector<FeasibleMap> maps, double tie_threshold)
    : remaining_(std::move(maps)), tie_threshold_(tie_threshold) {}

FeasibleMap MapRanking::pop() {
  if (remaining_.empty()) throw Error(ErrorCode::kNoFeasibleMap, "ranking exhausted");
  std::size_t best = 0;
  for (std::size_t k = 1; k < remaining_.size(); ++k) {
    int c = compare_maps(remaining_[k].map.cost, remaining_[best].map.cost, tie_threshold_);
    if (c < 0 || (c == 0 && remaining_[k].arrival < remaining_[best].arrival)) best = k;
  }
  FeasibleMap out = std::move(remaining_[best]);
  remaining_.erase(remaining_.begin() + static_cast<std::ptrdiff_t>(best));
  return out;
}

Selection select_best(std::vector<FeasibleMap> feasible, double tie_threshold) {
  if (feasible.empty()) throw Error(ErrorCode::kNoFeasibleMap, "no feasible map");
  MapRanking ranking(std::move(feasible), tie_threshold);
  Selection sel{ranking.pop(), {}};
  while (!ranking.empty()) sel.remainder.push_back(ranking.pop());
  return sel;
}

std::string canonical_key(const PartialMap& map) {
  std::ostringstream os;
  for (std::size_t c = 0; c < map.placement.size(); ++c) os << (c ? "," : "p=") << map.placement[c];
  os << '|';
  for (const auto& h : map.hops) os << h.segment << ':' << h.from << '>' << h.to << '@' << h.link << ';';
  return os.str();
}

namespace {

// Segment-by-segment exhaustive search. A segment route is either local
// (both positions on one server), a dedicated walk from the downstream
// server, or one overlay hop that lands on the upstream server.
class BruteForce {
 public:
  BruteForce(const Network& net, const MappingContext& ctx)
      : net_(net),
        ctx_(ctx),
        n_(ctx.components()),
        source_(ctx.task().source),
        cpu_(net.node_count(), 0.0),
        link_(net.link_count(), 0.0),
        uplink_(net.node_count(), 0.0) {
    current_.task = ctx.task().id;
    current_.placement.assign(n_, kNoNode);
  }

  std::vector<FeasibleMap> run() {
    segment(n_, ctx_.task().delivery);
    std::sort(found_.begin(), found_.end(), [](const FeasibleMap& a, const FeasibleMap& b) {
      return canonical_key(a.map) < canonical_key(b.map);
    });
    for (std::size_t i = 0; i < found_.size(); ++i) found_[i].arrival = static_cast<int>(i);
    return std::move(found_);
  }

 private:
  bool dedicated() const { return allows_dedicated(ctx_.params().mode); }
  bool overlay() const { return allows_public(ctx_.params().mode); }

  void record() {
    PartialMap m = current_;
    m.prefix_length = n_;
    m.at = source_;
    m.remaining_budget = ctx_.segment_budget(0) - segment_link_count(m, 0) * ctx_.link_cost(0);
    m.cost = map_cost(m, net_, ctx_);
    found_.push_back({std::move(m), 0});
  }

  // Places component c on node v, then continues with segment c.
  void place_and_continue(int c, NodeId v) {
    const ServiceId svc = ctx_.task().services[c];
    if (!net_.node(v).hosts(svc)) return;
    if (cpu_[v] + ctx_.cpu_demand(c) > net_.residual(ResourceRef::cpu(v)) + kCapacityEps) return;
    cpu_[v] += ctx_.cpu_demand(c);
    current_.placement[c] = v;
    segment(c, v);
    current_.placement[c] = kNoNode;
    cpu_[v] -= ctx_.cpu_demand(c);
  }

  // Routes segment s whose downstream end is `down`.
  void segment(int s, NodeId down) {
    if (s == 0 && down == source_) {
      record();
      return;
    }
    if (s > 0) place_and_continue(s - 1, down);
    if (dedicated()) walk(s, down, 0);
    if (overlay()) {
      const double rate = ctx_.segment_rate(s);
      auto hop = [&](NodeId v, auto&& then) {
        if (v == down) return;
        if (uplink_[v] + rate > net_.residual(ResourceRef::uplink(v)) + kCapacityEps) return;
        uplink_[v] += rate;
        current_.hops.push_back({static_cast<std::int16_t>(s), down, v, kPublicLink});
        then(v);
        current_.hops.pop_back();
        uplink_[v] -= rate;
      };
      if (s == 0) {
        hop(source_, [&](NodeId) { record(); });
      } else {
        for (NodeId v : net_.service_providers(ctx_.task().services[s - 1]))
          hop(v, [&](NodeId w) { place_and_continue(s - 1, w); });
      }
    }
  }

  void walk(int s, NodeId at, int links_used) {
    if (links_used >= ctx_.link_limit(s)) return;
    const double rate = ctx_.segment_rate(s);
    for (const auto& adj : net_.neighbors(at)) {
      if (link_[adj.link] + rate > net_.residual(ResourceRef::link(adj.link)) + kCapacityEps) continue;
      link_[adj.link] += rate;
      current_.hops.push_back({static_cast<std::int16_t>(s), at, adj.neighbor, adj.link});
      const NodeId v = adj.neighbor;
      if (s == 0) {
        if (v == source_)
          record();
        else
          walk(s, v, links_used + 1);
      } else {
        place_and_continue(s - 1, v);
        walk(s, v, links_used + 1);
      }
      current_.hops.pop_back();
      link_[adj.link] -= rate;
    }
  }

  const Network& net_;
  const MappingContext& ctx_;
  const int n_;
  const NodeId source_;
  std::vector<double> cpu_, link_, uplink_;
  PartialMap current_;
  std::vector<FeasibleMap> found_;
};

}  // namespace

std::vector<FeasibleMap> enumerate_feasible_bruteforce(const Network& net, const MappingContext& ctx) {
  if (net.node_count() > 8 || ctx.components() > 4)
    throw Error(ErrorCode::kInstanceTooLarge, "brute force supports <= 8 nodes and <= 4 components");
  return BruteForce(net, ctx).run();
}

}  // namespace bimodal
