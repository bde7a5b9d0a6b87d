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

#ifndef BIMODAL_WORKLOAD_HPP_
#define BIMODAL_WORKLOAD_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bimodal/topology.hpp"
#include "bimodal/types.hpp"

namespace bimodal {

// A linear stream-processing task and its service level agreement.
struct TaskSpec {
  TaskId id = 0;
  std::vector<ServiceId> services;  // data order, source side first
  std::vector<double> shrinkage;    // per component, output/input
  std::vector<double> cpu_factor;   // per component, cpu units per input Mbps
  NodeId source = kNoNode;
  NodeId delivery = kNoNode;
  double target_rate = 1.0;     // Mbps at the delivery node
  double data_volume = 100.0;   // MB emitted by the source
  double price_per_byte = 1.0;  // currency per delivered byte
  double window = 10.0;         // seconds per monitoring window

  std::size_t size() const { return services.size(); }
  // Bytes that arrive at the delivery node once the source is drained.
  double delivered_volume_bytes() const;
  // Transfer time at exactly the target rate.
  double ideal_duration() const;
};

struct TaskArrival {
  double time = 0;  // seconds
  TaskSpec spec;
};

using Trace = std::vector<TaskArrival>;

// Rates entering and leaving every component. Segment s carries data into
// component s (s < n) or into the delivery node (s == n).
struct RateChain {
  double source_rate = 0;
  std::vector<double> input_rate;
  std::vector<double> output_rate;

  std::size_t size() const { return input_rate.size(); }
  double segment_rate(std::size_t s) const {
    return s < input_rate.size() ? input_rate[s] : output_rate.back();
  }
};

// Currency per second earned by the task, split into processing budgets
// (one per component) and transport budgets (one per segment, n + 1).
struct BudgetVector {
  std::vector<double> processing;
  std::vector<double> transport;

  double total() const;
};

struct WorkloadParams {
  int n_tasks = 500;
  double arrival_rate = 60.0;  // tasks per hour
  int chain_length = 10;
  double target_rate = 1.0;
  double mean_volume = 100.0;  // MB, exponential
  double window = 10.0;
  double price_min = 0.5, price_max = 1.5;
  // Each component draws its own shrinkage; by default log-uniformly so the
  // chain product has median 1.
  double shrinkage_min = 0.8, shrinkage_max = 1.25;
  bool log_shrinkage = true;
};

Trace generate_trace(const WorkloadParams& params, const Network& net, std::uint64_t seed);

RateChain rate_chain(const TaskSpec& task);

// transport_fraction of the revenue rate is shared equally by the segments;
// the rest follows each component's cpu work (cpu_factor * input rate).
BudgetVector apportion_budget(const TaskSpec& task, double transport_fraction);

// Revenue per byte that the component earns for the data it consumes.
double budget_per_input_byte(const BudgetVector& budget, const RateChain& chain,
                             std::size_t component);

void write_trace(std::ostream& os, const Trace& trace);
std::string trace_to_text(const Trace& trace);
Trace read_trace(std::istream& is);
std::uint64_t trace_hash(const Trace& trace);

}  // namespace bimodal

#endif  // BIMODAL_WORKLOAD_HPP_
