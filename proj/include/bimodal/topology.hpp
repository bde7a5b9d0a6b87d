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

#ifndef BIMODAL_TOPOLOGY_HPP_
#define BIMODAL_TOPOLOGY_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bimodal/types.hpp"

namespace bimodal {

// Per-type processing cost shared by every task using the type.
struct ServiceType {
  double cpu_factor = 1.0;  // cpu units per Mbps of input
};

struct ServerNode {
  NodeId id = kNoNode;
  double cpu_capacity = 0;
  double cpu_allocated = 0;
  std::vector<ServiceId> hosted_services;  // sorted
  double uplink_bw = 0;  // Mbps
  double uplink_allocated = 0;
  double uplink_delay = 0;  // ms, one-way to the public core

  bool hosts(ServiceId s) const;
};

struct DedicatedLink {
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  double bandwidth = 0;  // Mbps, shared by both directions
  double allocated = 0;
  double delay = 0;  // ms

  NodeId other(NodeId n) const { return n == a ? b : a; }
};

struct Adjacency {
  NodeId neighbor;
  LinkId link;
};

struct TopologyParams {
  int n_nodes = 100;
  int n_links = 99;
  int n_service_types = 25;
  // Each node can run this many concurrent instances of each hosted service
  // at the nominal delivery rate.
  double cpu_instances = 2.0;
  double nominal_rate = 1.0;  // Mbps
  double link_bw_min = 1.0, link_bw_max = 10.0;
  double link_delay_min = 1.0, link_delay_max = 10.0;
  double uplink_bw_min = 1.0, uplink_bw_max = 2.0;
  double public_delay_min = 10.0, public_delay_max = 100.0;
  double cpu_factor_min = 0.5, cpu_factor_max = 1.5;
  // Permit n_links < n_nodes - 1: the tree covers a random connected subset
  // of n_links + 1 nodes and the rest reach others over the public network.
  bool allow_sparse = false;
};

// The static platform plus its allocation counters.
class Network {
 public:
  ServiceId add_service(ServiceType type);
  NodeId add_node(double cpu_capacity, std::vector<ServiceId> services,
                  double uplink_bw, double uplink_delay);
  LinkId add_link(NodeId a, NodeId b, double bandwidth, double delay);

  // Directory reflecting every host of every service.
  void rebuild_directory();
  // Keep a seeded fraction of each service's hosts in the directory.
  void set_directory_knowledge(double fraction, std::uint64_t seed);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  std::size_t service_count() const { return services_.size(); }

  const ServerNode& node(NodeId n) const;
  const DedicatedLink& link(LinkId l) const;
  const ServiceType& service(ServiceId s) const;
  std::span<const ServerNode> nodes() const { return nodes_; }
  std::span<const DedicatedLink> links() const { return links_; }
  std::span<const ServiceType> services() const { return services_; }

  // Sorted by (neighbor, link).
  std::span<const Adjacency> neighbors(NodeId n) const;
  int degree(NodeId n) const;
  std::vector<LinkId> links_between(NodeId u, NodeId v) const;
  bool adjacent(NodeId u, NodeId v) const;

  const std::vector<NodeId>& service_providers(ServiceId s) const;

  // One-way latency of an overlay path, seconds.
  double public_delay_s(NodeId a, NodeId b) const;
  double link_delay_s(LinkId l) const;

  double capacity(ResourceRef r) const;
  double allocated(ResourceRef r) const;
  // capacity - allocated, never negative.
  double residual(ResourceRef r) const;

  // Throws std::logic_error when the counter would leave [0, capacity].
  void allocate(ResourceRef r, double amount);
  void release(ResourceRef r, double amount);
  void reset_allocations();
  std::uint64_t mutation_count() const { return mutations_; }

  double mean_cpu_utilization() const;
  double mean_link_utilization() const;
  double mean_uplink_utilization() const;

  void serialize(std::ostream& os) const;
  std::string to_text() const;
  static Network parse(std::istream& is);
  static Network from_text(const std::string& text);

 private:
  void check(ResourceRef r) const;
  double& counter(ResourceRef r);

  std::vector<ServiceType> services_;
  std::vector<ServerNode> nodes_;
  std::vector<DedicatedLink> links_;
  std::vector<std::vector<Adjacency>> adjacency_;
  std::vector<std::vector<NodeId>> directory_;
  std::uint64_t mutations_ = 0;
};

// Preferential-attachment growth from a two-node seed; extra links join
// distinct non-adjacent degree-sampled pairs.
Network generate_network(const TopologyParams& params, std::uint64_t seed);

// True when every node with at least one link is reachable from every other.
bool dedicated_component_connected(const Network& net);

}  // namespace bimodal

#endif  // BIMODAL_TOPOLOGY_HPP_
