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

#ifndef BIMODAL_RESERVATION_HPP_
#define BIMODAL_RESERVATION_HPP_

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bimodal/mapping.hpp"
#include "bimodal/topology.hpp"
#include "bimodal/types.hpp"

namespace bimodal {

// Claim tags: segment index for a segment's bandwidth, kCpuTag for
// processing, and an offset range for scheduler-held multi-hop paths.
inline constexpr int kCpuTag = -1;
inline constexpr int kMultiHopTagOffset = 1 << 16;

struct ClaimKey {
  TaskId task;
  int tag;
  ResourceRef resource;

  auto operator<=>(const ClaimKey&) const = default;
};

// Every allocation on the network is made through a claim, so that the
// per-resource sum of claims always equals the allocated counter.
class ClaimRegistry {
 public:
  void claim(Network& net, TaskId task, int tag, ResourceRef r, double amount);
  void release(Network& net, TaskId task, int tag, ResourceRef r, double amount);
  // Releases every claim of `task` carrying `tag`.
  void release_tag(Network& net, TaskId task, int tag);
  void release_task(Network& net, TaskId task);
  // Moves a task's claims from one tag to another without touching `net`.
  void retag(TaskId task, int from, int to);

  double amount(TaskId task, int tag, ResourceRef r) const;
  double task_total(TaskId task, ResourceRef r) const;
  std::size_t size() const { return claims_.size(); }
  bool empty() const { return claims_.empty(); }

  // Conservation violations, empty when consistent.
  std::vector<std::string> audit(const Network& net) const;

 private:
  std::map<ClaimKey, double> claims_;
};

// What the reservation probe asks of one server on its way downstream.
struct ProbeStop {
  NodeId node = kNoNode;
  double cpu = 0;
  std::vector<int> components;
  std::optional<ResourceRef> out;
  int out_segment = -1;
  double out_rate = 0;
  double delay_to_next = 0;  // seconds
};

// Source-to-delivery visit sequence of a complete map.
std::vector<ProbeStop> probe_path(const PartialMap& map, const MappingContext& ctx, const Network& net);

enum class RejectReason { kNone, kInsufficientCpu, kInsufficientBandwidth };
std::string_view to_string(RejectReason r);

struct AppliedClaim {
  int tag;
  ResourceRef resource;
  double amount;
};

struct ReservationProbe {
  TaskId task = 0;
  PartialMap map;
  std::vector<ProbeStop> stops;
  std::size_t position = 0;
  // Claims per reserved stop; always covers exactly stops [0, position).
  std::vector<std::vector<AppliedClaim>> reserved;

  bool at_end() const { return position == stops.size(); }
};

ReservationProbe make_probe(const PartialMap& map, const MappingContext& ctx, const Network& net);

struct ReserveOutcome {
  bool reserved = false;
  RejectReason reason = RejectReason::kNone;
};

// Claims the current stop's cpu and outgoing bandwidth together or not at all.
ReserveOutcome try_reserve(ReservationProbe& probe, Network& net, ClaimRegistry& claims);

// Releases the most recently reserved stop; false when nothing is held.
bool rollback_step(ReservationProbe& probe, Network& net, ClaimRegistry& claims);
void rollback(ReservationProbe& probe, Network& net, ClaimRegistry& claims);

// Bandwidth held by one segment of an admitted task.
struct SegmentAllocation {
  int segment = 0;
  NodeId upstream = kNoNode;
  NodeId downstream = kNoNode;
  LinkKind kind = LinkKind::kLocal;
  double target = 0;  // Mbps the segment must carry at the SLA rate
  double rate = 0;    // allocated Mbps
  // Dedicated lanes: parallel direct links or the links of a forwarding path.
  std::vector<std::pair<LinkId, double>> lanes;
  int link_limit = 0;
  double budget_per_byte = 0;

  // Scheduler-launched multi-hop path awaiting confirmation.
  bool pending = false;
  std::vector<LinkId> pending_path;
  double pending_rate = 0;
};

struct ActiveTask {
  TaskId task = 0;
  PartialMap map;
  std::vector<ProbeStop> stops;
  std::vector<SegmentAllocation> segments;  // n + 1, local ones included
};

ActiveTask commit(ReservationProbe&& probe, const MappingContext& ctx);
void release(const ActiveTask& active, Network& net, ClaimRegistry& claims);

}  // namespace bimodal

#endif  // BIMODAL_RESERVATION_HPP_
