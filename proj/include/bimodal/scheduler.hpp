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

#ifndef BIMODAL_SCHEDULER_HPP_
#define BIMODAL_SCHEDULER_HPP_

#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "bimodal/topology.hpp"
#include "bimodal/types.hpp"

// Periodic link re-allocation at one server (Algorithm 2).

namespace bimodal {

struct SchedulerParams {
  PlatformMode mode = PlatformMode::kBimodal;
  double epoch = 1.0;          // seconds
  double required_cap = 2.0;   // multiple of target rate
  double rate_floor = 0.001;   // Mbps; smaller rates count as zero
};

// One task segment whose data leaves `upstream` toward `next`.
struct Flow {
  TaskId task = 0;
  int segment = 0;
  NodeId upstream = kNoNode;
  NodeId next = kNoNode;
  double target = 0;           // Mbps
  double deficit_bytes = 0;
  double budget_per_byte = 0;
  LinkKind kind = LinkKind::kPublic;
  double rate = 0;
  int max_hops = 0;            // dedicated links the transport budget pays for
  bool holds_path = false;     // owns a forwarding path (confirmed or pending)
};

double required_bandwidth(const Flow& flow, double epoch, double cap_multiple = 4.0);
double compute_priority(const Flow& flow, double epoch, double cap_multiple = 4.0);

// Residual link and uplink bandwidth, updated as a plan is built. Only the
// amounts taken are stored; one plan touches a handful of resources.
class ResidualView {
 public:
  explicit ResidualView(const Network& net) : net_(&net) {}
  const Network& network() const { return *net_; }
  double link(LinkId l) const;
  double uplink(NodeId n) const;
  void take_link(LinkId l, double amount) { take(links_, l, amount); }
  void take_uplink(NodeId n, double amount) { take(uplinks_, n, amount); }

 private:
  using Taken = boost::container::small_vector<std::pair<int, double>, 8>;
  static void take(Taken& t, int id, double amount);
  static double taken(const Taken& t, int id);

  const Network* net_;
  Taken links_;
  Taken uplinks_;
};

// Shortest dedicated path of 2..max_hops links from u to v, each with
// residual >= rate, never using a direct u-v link. Breadth-first with
// neighbors taken in node-id order.
std::optional<std::vector<LinkId>> multi_hop_probe(NodeId u, NodeId v, double rate, int max_hops,
                                                   const ResidualView& view);

struct FlowDecision {
  TaskId task = 0;
  int segment = 0;
  LinkKind kind = LinkKind::kPublic;
  double rate = 0;
  double required = 0;
  double priority = 0;
  std::vector<std::pair<LinkId, double>> lanes;  // direct assignment
  std::vector<LinkId> probe_path;                 // newly found multi-hop path
  bool keep_path = false;                         // retains its current path
};

struct AllocationPlan {
  NodeId node = kNoNode;
  double time = 0;
  std::vector<FlowDecision> decisions;  // same order as the input flows
};

// Assumes the flows' own direct and uplink holdings were already returned
// to `net`; held forwarding paths stay claimed.
AllocationPlan reschedule_node(NodeId u, double now, const Network& net, std::span<const Flow> flows,
                               const SchedulerParams& params);

void write_plan_header(std::ostream& os);
void write_plan(std::ostream& os, const AllocationPlan& plan);

}  // namespace bimodal

#endif  // BIMODAL_SCHEDULER_HPP_
