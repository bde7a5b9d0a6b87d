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


// Small hand-built fixtures and independent checkers shared by the tests.

#ifndef BIMODAL_TESTS_TEST_SUPPORT_HPP_
#define BIMODAL_TESTS_TEST_SUPPORT_HPP_

#include <string>
#include <vector>

#include "bimodal/mapping.hpp"
#include "bimodal/random.hpp"
#include "bimodal/topology.hpp"
#include "bimodal/workload.hpp"

namespace bimodal::testing {

// Task over `services` with unit rates and factors unless given.
TaskSpec make_task(std::vector<ServiceId> services, NodeId source, NodeId delivery,
                   std::vector<double> shrinkage = {}, std::vector<double> cpu = {});

// n nodes in a row, node i hosting `hosted[i]`.
Network line_network(const std::vector<std::vector<ServiceId>>& hosted, double cpu = 10, double link_bw = 10,
                     double uplink_bw = 2);

struct SmallInstance {
  Network net;
  TaskSpec task;
};

// Random connected network of at most `max_nodes` nodes and a chain of at
// most `max_components` components drawn from its services.
SmallInstance random_instance(Rng& rng, int max_nodes, int max_components);

// Checks a complete map against the network snapshot it was built on;
// returns the first violated rule, empty when sound.
std::string check_map(const PartialMap& map, const MappingContext& ctx, const Network& net);

// Sorted canonical keys.
std::vector<std::string> keys_of(const std::vector<FeasibleMap>& maps);

}  // namespace bimodal::testing

#endif  // BIMODAL_TESTS_TEST_SUPPORT_HPP_
