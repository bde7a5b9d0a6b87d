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

#ifndef BIMODAL_ENGINE_HPP_
#define BIMODAL_ENGINE_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bimodal/mapping.hpp"
#include "bimodal/random.hpp"
#include "bimodal/scheduler.hpp"
#include "bimodal/topology.hpp"
#include "bimodal/workload.hpp"

// Discrete-event run of one trace on one network.

namespace bimodal {

struct EngineParams {
  PlatformMode mode = PlatformMode::kBimodal;
  bool dynamic_scheduling = true;
  double epoch = 1.0;              // seconds between scheduler activations
  double perturb_interval = 0.1;   // seconds between public rate redraws
  double sigma = 1.0;              // std-dev of the log2 perturbation
  bool clamp_deviation = true;     // drop negative window increments
  double required_cap = 2.0;
  double rate_floor = 0.001;       // Mbps
  double drain_limit = 7 * 86400.0;  // seconds past the last arrival
  bool audit = true;
  bool plan_log = false;
};

// 2^X with X ~ N(0, sigma).
double perturb_factor(Rng& rng, double sigma);

// Delivery progress of one streaming task under a constant rate ratio.
//
// The source emits at the target rate from `start`, so delivery can run
// ahead of the target only while it is behind the expected volume.
struct FluidState {
  double target_bps = 0;  // bytes per second at the delivery node
  double total_bytes = 0;
  double start = 0;
  double delivered = 0;
  double phi = 1;  // end-to-end rate over target rate

  double expected(double t) const;
  double deficit(double t) const { return std::max(0.0, expected(t) - delivered); }
  bool done() const { return delivered >= total_bytes; }
};

// Moves `state` from time t by up to dt; returns the time actually spent,
// which is shorter than dt only when the task finishes.
double advance_fluid(FluidState& state, double t, double dt);
// Seconds until completion, +inf when stalled.
double time_to_complete(const FluidState& state, double t);

// Per-window SLA term.
double window_increment(double target_mbps, double observed_mbps, bool clamp);

struct TaskRecord {
  TaskId id = 0;
  double arrival = 0;
  std::string outcome;  // completed | incomplete | no-feasible-map | reservation-failed
  double start = -1;
  double completion = -1;
  double target = 0;
  double delivered_bytes = 0;
  double ideal = 0;
  double deviation = 0;
  int windows = 0;
  int feasible_maps = 0;
  int probes = 0;
  std::uint64_t map_messages = 0;
  int public_segments = 0;
  int dedicated_segments = 0;

  bool accepted() const { return outcome == "completed" || outcome == "incomplete"; }
};

struct UtilSample {
  double time = 0;
  double cpu = 0;
  double link = 0;
  double uplink = 0;
};

struct LogEvent {
  double time = 0;
  std::string kind;
  TaskId task = -1;
  NodeId node = kNoNode;
  std::string detail;
};

struct RunLog {
  std::string mode;
  bool dynamic_scheduling = false;
  double horizon = 0;   // last arrival
  double end_time = 0;  // last processed event
  std::size_t nodes = 0;
  std::size_t links = 0;
  // Whether the link count sits below a spanning tree.
  bool sparse = false;
  std::uint64_t audit_failures = 0;
  std::vector<std::string> audit_messages;  // first few only
  std::vector<TaskRecord> tasks;
  std::vector<UtilSample> util;
  std::vector<LogEvent> events;

  void write(std::ostream& os) const;
  std::string to_csv() const;
  static RunLog parse(std::istream& is);
  static RunLog from_csv(const std::string& text);
};

struct RunOutput {
  RunLog log;
  std::string plan_csv;  // filled when EngineParams::plan_log is set
};

RunOutput simulate(Network net, const Trace& trace, const MappingParams& mapping, const EngineParams& engine,
                   std::uint64_t perturb_seed);

}  // namespace bimodal

#endif  // BIMODAL_ENGINE_HPP_
