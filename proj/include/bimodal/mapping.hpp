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

#ifndef BIMODAL_MAPPING_HPP_
#define BIMODAL_MAPPING_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "bimodal/topology.hpp"
#include "bimodal/types.hpp"
#include "bimodal/workload.hpp"

// Distributed mapping of a task onto the server network.
//
// Maps grow from the delivery node (the portal) over the reversed service
// chain. A message at node u with prefix length j has the last j components
// placed; the open segment n - j is the one whose route is being extended
// from u toward the node that will host the upstream component. A map is
// feasible once every component is placed and the message reaches the data
// source node.

namespace bimodal {

struct MappingParams {
  PlatformMode mode = PlatformMode::kBimodal;
  double transport_fraction = 0.2;
  // Currency per byte charged for each dedicated link a segment crosses.
  double hop_cost = 0.006;
  // Upper bound on dedicated links in one segment regardless of budget.
  int max_segment_links = 4;
  double tie_threshold = 0.1;
  bool least_cost_map = true;
  // Admit a map whose cost equals the best recorded for its prefix length.
  bool admit_equal_cost = false;
};

struct CostTriple {
  double load_balance = 0;
  int dedicated_hops = 0;
  int public_hops = 0;

  bool operator==(const CostTriple&) const = default;
};

// Negative when a is preferred, positive when b is, zero when neither.
int compare_maps(const CostTriple& a, const CostTriple& b, double tie_threshold = 0.1);

// One message step. Messages travel upstream, so `from` receives the data
// that `to` sends.
struct MapHop {
  std::int16_t segment = 0;
  NodeId from = kNoNode;
  NodeId to = kNoNode;
  LinkId link = kPublicLink;

  bool is_public() const { return link == kPublicLink; }
  bool operator==(const MapHop&) const = default;
};

struct PartialMap {
  PartialMap() = default;
  PartialMap(const PartialMap&) = default;
  // Declared noexcept so vectors of messages move rather than copy on growth.
  PartialMap(PartialMap&&) noexcept = default;
  PartialMap& operator=(const PartialMap&) = default;
  PartialMap& operator=(PartialMap&&) noexcept = default;

  TaskId task = 0;
  int prefix_length = 0;
  // Inline storage keeps message copies off the heap for typical chains.
  boost::container::small_vector<NodeId, 12> placement;  // per component, kNoNode until placed
  boost::container::small_vector<MapHop, 24> hops;       // emission order
  NodeId at = kNoNode;
  bool via_public = false;  // arrived over the overlay, must place next
  double remaining_budget = 0;  // transport budget left in the open segment
  CostTriple cost;

  int components() const { return static_cast<int>(placement.size()); }
  int open_segment() const { return components() - prefix_length; }
  bool complete() const { return prefix_length == components(); }
};

struct FeasibleMap {
  PartialMap map;
  int arrival = 0;  // order in which the source collected it
};

// Per-task quantities every map manager derives from the task spec.
class MappingContext {
 public:
  MappingContext(const TaskSpec& task, const MappingParams& params);

  const TaskSpec& task() const { return task_; }
  const MappingParams& params() const { return params_; }
  const RateChain& rates() const { return rates_; }
  const BudgetVector& budget() const { return budget_; }
  int components() const { return static_cast<int>(task_.size()); }

  double segment_rate(int s) const { return rates_.segment_rate(static_cast<std::size_t>(s)); }
  double segment_budget(int s) const { return budget_.transport[s]; }
  // Currency per second for one dedicated link carrying segment s.
  double link_cost(int s) const { return link_cost_[s]; }
  int link_limit(int s) const { return link_limit_[s]; }
  double cpu_demand(int c) const { return cpu_demand_[c]; }

 private:
  TaskSpec task_;
  MappingParams params_;
  RateChain rates_;
  BudgetVector budget_;
  std::vector<double> link_cost_;
  std::vector<int> link_limit_;
  std::vector<double> cpu_demand_;
};

PartialMap initial_map(const MappingContext& ctx);

// Load factor averaged over the distinct servers holding components, each
// counted with this map's demand added; hop counts per segment kind.
CostTriple map_cost(const PartialMap& map, const Network& net, const MappingContext& ctx);

double map_cpu_at(const PartialMap& map, const MappingContext& ctx, NodeId n);
double map_link_claim(const PartialMap& map, const MappingContext& ctx, LinkId l);
double map_uplink_claim(const PartialMap& map, const MappingContext& ctx, NodeId n);
int segment_link_count(const PartialMap& map, int segment);
LinkKind segment_kind(const PartialMap& map, int segment);

// Lowest load-balance seen per prefix length at one node for one task, with
// the most transport budget any message at that load-balance carried.
class MapperState {
 public:
  explicit MapperState(int components = 0);
  std::optional<double> best(int prefix) const;
  double spare(int prefix) const;
  bool admits(int prefix, double cost, double budget, bool admit_equal) const;
  void record(int prefix, double cost, double budget = 0);

 private:
  std::vector<double> best_;
  std::vector<double> spare_;
};

bool least_cost_admit(MapperState& state, const PartialMap& msg, bool admit_equal = true);

struct MapMessage {
  NodeId dest = kNoNode;
  double delay = 0;  // seconds
  PartialMap map;
};

struct ProcessResult {
  std::optional<PartialMap> feasible;
  std::vector<MapMessage> out;
};

// One activation of the map manager at msg.at.
ProcessResult process_map(const PartialMap& msg, const MappingContext& ctx, const Network& net);

// One line per processed message.
struct MapTraceEntry {
  double time = 0;
  TaskId task = 0;
  NodeId node = kNoNode;
  int prefix = 0;
  double load_balance = 0;
  bool admitted = true;
  std::string route;
};

std::string describe_route(const PartialMap& map);

// Bookkeeping of one task's mapping across all map managers.
class MappingSession {
 public:
  MappingSession(MappingContext ctx, const Network& net);

  const MappingContext& context() const { return ctx_; }
  MapMessage start();
  // Filters with LeastCostMap (if enabled), runs process_map, and collects
  // feasible maps at the source. Without a trace, outgoing messages that the
  // receiver's record already rules out are settled on the spot: they count
  // as delivered and pruned, and settle_time() covers their arrival.
  std::vector<MapMessage> receive(const PartialMap& msg, double now = 0,
                                  std::vector<MapTraceEntry>* trace = nullptr);
  bool quiescent() const { return in_flight_ == 0; }
  double settle_time() const { return settle_time_; }
  const std::vector<FeasibleMap>& feasible() const { return feasible_; }
  std::vector<FeasibleMap> take_feasible() { return std::move(feasible_); }
  std::uint64_t processed() const { return processed_; }
  std::uint64_t pruned() const { return pruned_; }

 private:
  MappingContext ctx_;
  const Network* net_;
  std::vector<MapperState> states_;  // per node
  std::vector<FeasibleMap> feasible_;
  std::int64_t in_flight_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t pruned_ = 0;
  double settle_time_ = 0;
};

// Runs a session to quiescence on its own timed queue (link delays).
std::vector<FeasibleMap> run_mapping(const MappingContext& ctx, const Network& net,
                                     std::vector<MapTraceEntry>* trace = nullptr);

// Lazily ranks feasible maps: best first, ties by arrival order.
class MapRanking {
 public:
  MapRanking(std::vector<FeasibleMap> maps, double tie_threshold);
  bool empty() const { return remaining_.empty(); }
  std::size_t size() const { return remaining_.size(); }
  FeasibleMap pop();

 private:
  std::vector<FeasibleMap> remaining_;
  double tie_threshold_;
};

struct Selection {
  FeasibleMap best;
  std::vector<FeasibleMap> remainder;  // retry order
};

// Throws Error(kNoFeasibleMap) on an empty set.
Selection select_best(std::vector<FeasibleMap> feasible, double tie_threshold = 0.1);

// Canonical identity of a map: placements plus every segment route.
std::string canonical_key(const PartialMap& map);

// Exhaustive search over placements and routes under the same capacity,
// bandwidth, budget and overlay rules. Small instances only.
std::vector<FeasibleMap> enumerate_feasible_bruteforce(const Network& net, const MappingContext& ctx);

}  // namespace bimodal

#endif  // BIMODAL_MAPPING_HPP_
