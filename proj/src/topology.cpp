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

#include "bimodal/topology.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "bimodal/random.hpp"
#include "bimodal/text.hpp"

namespace bimodal {

bool ServerNode::hosts(ServiceId s) const {
  return std::binary_search(hosted_services.begin(), hosted_services.end(), s);
}

ServiceId Network::add_service(ServiceType type) {
  services_.push_back(type);
  directory_.emplace_back();
  return static_cast<ServiceId>(services_.size() - 1);
}

NodeId Network::add_node(double cpu_capacity, std::vector<ServiceId> services,
                         double uplink_bw, double uplink_delay) {
  std::sort(services.begin(), services.end());
  services.erase(std::unique(services.begin(), services.end()), services.end());
  for (ServiceId s : services) {
    if (s < 0 || static_cast<std::size_t>(s) >= services_.size())
      throw Error(ErrorCode::kInvalidParameters,
                  "node hosts unknown service " + std::to_string(s));
  }
  ServerNode n;
  n.id = static_cast<NodeId>(nodes_.size());
  n.cpu_capacity = cpu_capacity;
  n.hosted_services = std::move(services);
  n.uplink_bw = uplink_bw;
  n.uplink_delay = uplink_delay;
  nodes_.push_back(std::move(n));
  adjacency_.emplace_back();
  return nodes_.back().id;
}

LinkId Network::add_link(NodeId a, NodeId b, double bandwidth, double delay) {
  if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= nodes_.size() ||
      static_cast<std::size_t>(b) >= nodes_.size() || a == b)
    throw Error(ErrorCode::kInvalidParameters, "bad link endpoints");
  LinkId id = static_cast<LinkId>(links_.size());
  links_.push_back(DedicatedLink{std::min(a, b), std::max(a, b), bandwidth, 0, delay});
  auto insert = [&](NodeId from, NodeId to) {
    auto& adj = adjacency_[from];
    Adjacency entry{to, id};
    auto it = std::lower_bound(adj.begin(), adj.end(), entry, [](const Adjacency& x, const Adjacency& y) {
      return x.neighbor != y.neighbor ? x.neighbor < y.neighbor : x.link < y.link;
    });
    adj.insert(it, entry);
  };
  insert(a, b);
  insert(b, a);
  return id;
}

void Network::rebuild_directory() {
  directory_.assign(services_.size(), {});
  for (const auto& n : nodes_)
    for (ServiceId s : n.hosted_services) directory_[s].push_back(n.id);
}

void Network::set_directory_knowledge(double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::kInvalidParameters, "directory fraction outside [0,1]");
  rebuild_directory();
  if (fraction == 1.0) return;
  for (std::size_t s = 0; s < directory_.size(); ++s) {
    auto& hosts = directory_[s];
    Rng rng(splitmix64(seed ^ (0x5eed0000ULL + s)));
    std::shuffle(hosts.begin(), hosts.end(), rng);
    auto keep = static_cast<std::size_t>(std::floor(fraction * hosts.size() + 0.5));
    hosts.resize(std::min(keep, hosts.size()));
    std::sort(hosts.begin(), hosts.end());
  }
}

const ServerNode& Network::node(NodeId n) const {
  if (n < 0 || static_cast<std::size_t>(n) >= nodes_.size())
    throw Error(ErrorCode::kUnknownResource, "node " + std::to_string(n));
  return nodes_[n];
}

const DedicatedLink& Network::link(LinkId l) const {
  if (l < 0 || static_cast<std::size_t>(l) >= links_.size())
    throw Error(ErrorCode::kUnknownResource, "link " + std::to_string(l));
  return links_[l];
}

const ServiceType& Network::service(ServiceId s) const {
  if (s < 0 || static_cast<std::size_t>(s) >= services_.size())
    throw Error(ErrorCode::kUnknownResource, "service " + std::to_string(s));
  return services_[s];
}

std::span<const Adjacency> Network::neighbors(NodeId n) const {
  node(n);
  return adjacency_[n];
}

int Network::degree(NodeId n) const { return static_cast<int>(neighbors(n).size()); }

std::vector<LinkId> Network::links_between(NodeId u, NodeId v) const {
  std::vector<LinkId> out;
  for (const auto& a : neighbors(u))
    if (a.neighbor == v) out.push_back(a.link);
  return out;
}

bool Network::adjacent(NodeId u, NodeId v) const {
  for (const auto& a : neighbors(u))
    if (a.neighbor == v) return true;
  return false;
}

const std::vector<NodeId>& Network::service_providers(ServiceId s) const {
  service(s);
  return directory_[s];
}

double Network::public_delay_s(NodeId a, NodeId b) const {
  return 0.5 * (node(a).uplink_delay + node(b).uplink_delay) * 1e-3;
}

double Network::link_delay_s(LinkId l) const { return link(l).delay * 1e-3; }

void Network::check(ResourceRef r) const {
  switch (r.kind) {
    case ResourceRef::Kind::kCpu:
    case ResourceRef::Kind::kUplink:
      if (r.id < 0 || static_cast<std::size_t>(r.id) >= nodes_.size())
        throw Error(ErrorCode::kUnknownResource, to_string(r));
      return;
    case ResourceRef::Kind::kLink:
      if (r.id < 0 || static_cast<std::size_t>(r.id) >= links_.size())
        throw Error(ErrorCode::kUnknownResource, to_string(r));
      return;
  }
}

double Network::capacity(ResourceRef r) const {
  check(r);
  switch (r.kind) {
    case ResourceRef::Kind::kCpu: return nodes_[r.id].cpu_capacity;
    case ResourceRef::Kind::kUplink: return nodes_[r.id].uplink_bw;
    case ResourceRef::Kind::kLink: return links_[r.id].bandwidth;
  }
  return 0;
}

double Network::allocated(ResourceRef r) const {
  check(r);
  switch (r.kind) {
    case ResourceRef::Kind::kCpu: return nodes_[r.id].cpu_allocated;
    case ResourceRef::Kind::kUplink: return nodes_[r.id].uplink_allocated;
    case ResourceRef::Kind::kLink: return links_[r.id].allocated;
  }
  return 0;
}

double Network::residual(ResourceRef r) const {
  return std::max(0.0, capacity(r) - allocated(r));
}

double& Network::counter(ResourceRef r) {
  check(r);
  switch (r.kind) {
    case ResourceRef::Kind::kCpu: return nodes_[r.id].cpu_allocated;
    case ResourceRef::Kind::kUplink: return nodes_[r.id].uplink_allocated;
    case ResourceRef::Kind::kLink: return links_[r.id].allocated;
  }
  throw std::logic_error("unreachable");
}

void Network::allocate(ResourceRef r, double amount) {
  if (amount < 0) throw std::logic_error("negative allocation on " + to_string(r));
  double cap = capacity(r);
  double& c = counter(r);
  if (c + amount > cap + kCapacityEps * std::max(1.0, cap))
    throw std::logic_error("over-allocation on " + to_string(r));
  c = std::min(cap, c + amount);
  ++mutations_;
}

void Network::release(ResourceRef r, double amount) {
  if (amount < 0) throw std::logic_error("negative release on " + to_string(r));
  double cap = capacity(r);
  double& c = counter(r);
  if (c - amount < -kCapacityEps * std::max(1.0, cap))
    throw std::logic_error("over-release on " + to_string(r));
  c -= amount;
  if (c < 1e-12 * std::max(1.0, cap)) c = 0;
  ++mutations_;
}

void Network::reset_allocations() {
  for (auto& n : nodes_) n.cpu_allocated = n.uplink_allocated = 0;
  for (auto& l : links_) l.allocated = 0;
  ++mutations_;
}

double Network::mean_cpu_utilization() const {
  if (nodes_.empty()) return 0;
  double sum = 0;
  for (const auto& n : nodes_)
    if (n.cpu_capacity > 0) sum += n.cpu_allocated / n.cpu_capacity;
  return sum / static_cast<double>(nodes_.size());
}

double Network::mean_link_utilization() const {
  if (links_.empty()) return 0;
  double sum = 0;
  for (const auto& l : links_)
    if (l.bandwidth > 0) sum += l.allocated / l.bandwidth;
  return sum / static_cast<double>(links_.size());
}

double Network::mean_uplink_utilization() const {
  if (nodes_.empty()) return 0;
  double sum = 0;
  for (const auto& n : nodes_)
    if (n.uplink_bw > 0) sum += n.uplink_allocated / n.uplink_bw;
  return sum / static_cast<double>(nodes_.size());
}

void Network::serialize(std::ostream& os) const {
  using text::format_double;
  os << "bimodal-network 1\n";
  os << "services " << services_.size() << "\n";
  for (std::size_t s = 0; s < services_.size(); ++s)
    os << "service " << s << ' ' << format_double(services_[s].cpu_factor) << "\n";
  os << "nodes " << nodes_.size() << "\n";
  for (const auto& n : nodes_) {
    os << "node " << n.id << ' ' << format_double(n.cpu_capacity) << ' '
       << format_double(n.uplink_bw) << ' ' << format_double(n.uplink_delay) << ' '
       << n.hosted_services.size();
    for (ServiceId s : n.hosted_services) os << ' ' << s;
    os << "\n";
  }
  os << "links " << links_.size() << "\n";
  for (std::size_t l = 0; l < links_.size(); ++l)
    os << "link " << l << ' ' << links_[l].a << ' ' << links_[l].b << ' '
       << format_double(links_[l].bandwidth) << ' ' << format_double(links_[l].delay) << "\n";
}

std::string Network::to_text() const {
  std::ostringstream os;
  serialize(os);
  return os.str();
}

namespace {

struct LineReader {
  std::istream& is;
  int line_no = 0;

  std::vector<std::string> next(std::string_view expect_tag) {
    std::string line;
    while (std::getline(is, line)) {
      ++line_no;
      auto t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      std::vector<std::string> fields;
      for (auto f : text::split_ws(t)) fields.emplace_back(f);
      if (fields.front() != expect_tag) fail("expected '" + std::string(expect_tag) + "'");
      return fields;
    }
    fail("unexpected end of input, expected '" + std::string(expect_tag) + "'");
    return {};
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kConfigParse, "network line " + std::to_string(line_no) + ": " + what);
  }
};

}  // namespace

Network Network::parse(std::istream& is) {
  LineReader r{is};
  Network net;
  auto header = r.next("bimodal-network");
  if (header.size() != 2 || header[1] != "1") r.fail("unsupported version");
  auto count = [&](std::string_view tag) {
    auto f = r.next(tag);
    if (f.size() != 2) r.fail("malformed count");
    return static_cast<std::size_t>(text::parse_int(f[1]));
  };
  try {
    std::size_t ns = count("services");
    for (std::size_t i = 0; i < ns; ++i) {
      auto f = r.next("service");
      if (f.size() != 3 || text::parse_int(f[1]) != static_cast<long long>(i)) r.fail("malformed service");
      net.add_service({text::parse_double(f[2])});
    }
    std::size_t nn = count("nodes");
    for (std::size_t i = 0; i < nn; ++i) {
      auto f = r.next("node");
      if (f.size() < 6 || text::parse_int(f[1]) != static_cast<long long>(i)) r.fail("malformed node");
      auto k = static_cast<std::size_t>(text::parse_int(f[5]));
      if (f.size() != 6 + k) r.fail("service count mismatch");
      std::vector<ServiceId> svc;
      for (std::size_t j = 0; j < k; ++j) svc.push_back(static_cast<ServiceId>(text::parse_int(f[6 + j])));
      net.add_node(text::parse_double(f[2]), std::move(svc), text::parse_double(f[3]),
                   text::parse_double(f[4]));
    }
    std::size_t nl = count("links");
    for (std::size_t i = 0; i < nl; ++i) {
      auto f = r.next("link");
      if (f.size() != 6 || text::parse_int(f[1]) != static_cast<long long>(i)) r.fail("malformed link");
      net.add_link(static_cast<NodeId>(text::parse_int(f[2])), static_cast<NodeId>(text::parse_int(f[3])),
                   text::parse_double(f[4]), text::parse_double(f[5]));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigParse) throw;
    r.fail(e.what());
  }
  net.rebuild_directory();
  return net;
}

Network Network::from_text(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

Network generate_network(const TopologyParams& p, std::uint64_t seed) {
  if (p.n_nodes < 1 || p.n_service_types < 1 || p.n_links < 0)
    throw Error(ErrorCode::kInvalidParameters, "need n_nodes >= 1, n_service_types >= 1");
  const long long max_links = static_cast<long long>(p.n_nodes) * (p.n_nodes - 1) / 2;
  if (p.n_links > max_links)
    throw Error(ErrorCode::kInvalidParameters, "n_links exceeds a complete graph");
  if (p.n_links < p.n_nodes - 1 && !p.allow_sparse)
    throw Error(ErrorCode::kInvalidParameters,
                "n_links (" + std::to_string(p.n_links) + ") < n_nodes - 1 (" +
                    std::to_string(p.n_nodes - 1) + ")");

  Rng rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  std::vector<ServiceType> types(p.n_service_types);
  for (auto& t : types) t.cpu_factor = uniform(p.cpu_factor_min, p.cpu_factor_max);

  // Attachment order is a random permutation so node ids carry no rank.
  std::vector<NodeId> order(p.n_nodes);
  for (int i = 0; i < p.n_nodes; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const int members = std::min(p.n_nodes, p.n_links + 1);

  struct Edge { NodeId a, b; };
  std::vector<Edge> edges;
  std::vector<int> degree(p.n_nodes, 0);
  std::vector<NodeId> endpoint_pool;  // each node appears degree times
  std::vector<std::vector<char>> adj(p.n_nodes, std::vector<char>(p.n_nodes, 0));
  auto connect = [&](NodeId a, NodeId b) {
    edges.push_back({a, b});
    ++degree[a];
    ++degree[b];
    endpoint_pool.push_back(a);
    endpoint_pool.push_back(b);
    adj[a][b] = adj[b][a] = 1;
  };
  auto preferential = [&]() {
    std::uniform_int_distribution<std::size_t> pick(0, endpoint_pool.size() - 1);
    return endpoint_pool[pick(rng)];
  };

  if (members >= 2) connect(order[0], order[1]);
  for (int i = 2; i < members; ++i) connect(order[i], preferential());

  int extra = p.n_links - std::max(0, members - 1);
  while (extra > 0) {
    bool added = false;
    for (int attempt = 0; attempt < 1000 && !added; ++attempt) {
      NodeId u = preferential(), v = preferential();
      if (u != v && !adj[u][v]) {
        connect(u, v);
        added = true;
      }
    }
    if (!added) {
      // Dense regime: fall back to a uniformly chosen free pair.
      std::vector<Edge> free_pairs;
      for (NodeId u = 0; u < p.n_nodes; ++u)
        for (NodeId v = u + 1; v < p.n_nodes; ++v)
          if (!adj[u][v]) free_pairs.push_back({u, v});
      std::uniform_int_distribution<std::size_t> pick(0, free_pairs.size() - 1);
      auto e = free_pairs[pick(rng)];
      connect(e.a, e.b);
    }
    --extra;
  }

  Network net;
  for (const auto& t : types) net.add_service(t);

  std::vector<ServiceId> universe(p.n_service_types);
  for (int s = 0; s < p.n_service_types; ++s) universe[s] = s;
  for (NodeId n = 0; n < p.n_nodes; ++n) {
    const int want = std::min(1 + degree[n], p.n_service_types);
    // Partial Fisher-Yates: first `want` entries are a uniform sample.
    for (int i = 0; i < want; ++i) {
      std::uniform_int_distribution<int> pick(i, p.n_service_types - 1);
      std::swap(universe[i], universe[pick(rng)]);
    }
    std::vector<ServiceId> hosted(universe.begin(), universe.begin() + want);
    double cpu = 0;
    for (ServiceId s : hosted) cpu += p.cpu_instances * types[s].cpu_factor * p.nominal_rate;
    double up_bw = uniform(p.uplink_bw_min, p.uplink_bw_max);
    double up_delay = uniform(p.public_delay_min, p.public_delay_max);
    net.add_node(cpu, std::move(hosted), up_bw, up_delay);
  }
  for (const auto& e : edges) {
    double bw = uniform(p.link_bw_min, p.link_bw_max);
    double delay = uniform(p.link_delay_min, p.link_delay_max);
    net.add_link(e.a, e.b, bw, delay);
  }
  net.rebuild_directory();
  return net;
}

bool dedicated_component_connected(const Network& net) {
  const auto n = net.node_count();
  NodeId start = kNoNode;
  std::size_t with_links = 0;
  for (NodeId i = 0; static_cast<std::size_t>(i) < n; ++i) {
    if (net.degree(i) > 0) {
      ++with_links;
      if (start == kNoNode) start = i;
    }
  }
  if (with_links == 0) return true;
  std::vector<char> seen(n, 0);
  std::queue<NodeId> q;
  q.push(start);
  seen[start] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    for (const auto& a : net.neighbors(u)) {
      if (!seen[a.neighbor]) {
        seen[a.neighbor] = 1;
        ++reached;
        q.push(a.neighbor);
      }
    }
  }
  return reached == with_links;
}

}  // namespace bimodal
