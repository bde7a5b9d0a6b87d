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

#ifndef BIMODAL_EXPERIMENT_HPP_
#define BIMODAL_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bimodal/engine.hpp"
#include "bimodal/mapping.hpp"
#include "bimodal/metrics.hpp"
#include "bimodal/topology.hpp"
#include "bimodal/workload.hpp"

// Configuration files and seeded experiment matrices.

namespace bimodal {

struct ExperimentConfig {
  std::vector<PlatformMode> modes = {PlatformMode::kBimodal};
  bool dynamic_scheduling = true;
  TopologyParams topology;
  double directory_fraction = 1.0;
  WorkloadParams workload;
  MappingParams mapping;
  EngineParams engine;
  std::string sweep_axis;  // empty for a single point
  std::vector<std::string> sweep_values;
  int repetitions = 1;
  std::uint64_t base_seed = 1;
  bool write_runlogs = false;
};

// Every key the parser accepts, in manifest order.
std::vector<std::string> config_keys();
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& cfg, std::string_view key);

// Checks cross-field rules; sweep points are validated after they apply.
void validate(const ExperimentConfig& cfg);

// key = value lines, '#' comments. Errors carry the line number.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies "key=value" overrides in order.
void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides);

// Config text that reproduces `cfg` exactly.
std::string manifest_text(const ExperimentConfig& cfg);

struct RunSeeds {
  std::uint64_t run;
  std::uint64_t topology;
  std::uint64_t workload;
  std::uint64_t perturbation;
  std::uint64_t directory;
};
RunSeeds seeds_for(std::uint64_t base_seed, int repetition);

// A concrete configuration after applying one sweep value.
struct ExperimentPoint {
  std::string label;  // e.g. "n_links=50"
  ExperimentConfig config;
  bool sparse = false;
};
std::vector<ExperimentPoint> expand_points(const ExperimentConfig& cfg);

struct RunResult {
  std::string point;
  PlatformMode mode = PlatformMode::kBimodal;
  int repetition = 0;
  RunSeeds seeds{};
  std::uint64_t trace_hash = 0;
  bool sparse = false;
  MetricsReport report;
  RunLog log;
  std::string plan_csv;
};

// One run: network and trace depend only on the seeds, never on the mode.
RunResult run_once(const ExperimentConfig& point, PlatformMode mode, int repetition,
                   const std::string& label = "default", bool sparse = false);

struct ExperimentOutput {
  std::vector<RunResult> runs;
  std::string runs_csv;
  std::string metrics_csv;
  std::string manifest;
};

ExperimentOutput run_experiments(const ExperimentConfig& cfg, bool keep_logs = false);

// Writes runs.csv, metrics.csv, manifest.txt (and run logs if configured).
void write_outputs(const ExperimentOutput& out, const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace bimodal

#endif  // BIMODAL_EXPERIMENT_HPP_
