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

// Command-line driver: topology generation, experiment runs, log summaries.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bimodal/engine.hpp"
#include "bimodal/experiment.hpp"
#include "bimodal/mapping.hpp"
#include "bimodal/metrics.hpp"
#include "bimodal/random.hpp"
#include "bimodal/text.hpp"

namespace {

using namespace bimodal;

ExperimentConfig make_config(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  apply_overrides(cfg, overrides);
  return cfg;
}

void emit(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidParameters, "cannot write " + path);
  out << body;
}

int generate_topology(const std::string& config, const std::vector<std::string>& sets, int repetition,
                      const std::string& out, const std::string& trace_out) {
  ExperimentConfig cfg = make_config(config, sets);
  TopologyParams tp = cfg.topology;
  tp.allow_sparse = tp.n_links < tp.n_nodes - 1;
  const RunSeeds seeds = seeds_for(cfg.base_seed, repetition);
  Network net = generate_network(tp, seeds.topology);
  emit(out, net.to_text());
  if (!trace_out.empty()) emit(trace_out, trace_to_text(generate_trace(cfg.workload, net, seeds.workload)));
  return 0;
}

int run(const std::string& config, const std::vector<std::string>& sets, const std::string& out_dir) {
  ExperimentConfig cfg = make_config(config, sets);
  const ExperimentOutput out = run_experiments(cfg);
  write_outputs(out, cfg, out_dir);
  for (const auto& r : out.runs) {
    std::cout << r.point << ' ' << to_string(r.mode) << " rep " << r.repetition
              << " acceptance " << text::format_double(r.report.acceptance_ratio)
              << " elongation " << text::format_double(r.report.mean_execution_elongation)
              << " deviation " << text::format_double(r.report.mean_sla_deviation)
              << (r.sparse ? " (sparse topology)" : "") << '\n';
    if (r.log.audit_failures > 0) std::cerr << "warning: " << r.log.audit_failures << " audit failures\n";
  }
  std::cout << "wrote " << out_dir << "/{manifest.txt,runs.csv,metrics.csv}\n";
  return 0;
}

int summarize_log(const std::string& path, const std::string& out) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMalformedLog, "cannot read " + path);
  emit(out, to_text(summarize(RunLog::parse(in))));
  return 0;
}

int map_trace(const std::string& config, const std::vector<std::string>& sets, int repetition, int task,
              const std::string& out) {
  ExperimentConfig cfg = make_config(config, sets);
  cfg.topology.allow_sparse = cfg.topology.n_links < cfg.topology.n_nodes - 1;
  const RunSeeds seeds = seeds_for(cfg.base_seed, repetition);
  Network net = generate_network(cfg.topology, seeds.topology);
  const Trace trace = generate_trace(cfg.workload, net, seeds.workload);
  if (task < 0 || static_cast<std::size_t>(task) >= trace.size())
    throw Error(ErrorCode::kInvalidParameters, "task index out of range");
  MappingParams mp = cfg.mapping;
  mp.mode = cfg.modes.front();
  std::vector<MapTraceEntry> entries;
  const auto feasible = run_mapping(MappingContext(trace[task].spec, mp), net, &entries);
  std::ostringstream os;
  os << "# time,node,prefix,load_balance,admitted,route\n";
  for (const auto& e : entries)
    os << text::format_double(e.time) << ',' << e.node << ',' << e.prefix << ',' << text::format_double(e.load_balance)
       << ',' << (e.admitted ? 1 : 0) << ',' << e.route << '\n';
  os << "# feasible " << feasible.size() << '\n';
  emit(out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bimodal stream-processing platform simulator"};
  app.require_subcommand(1);

  std::string config, out, trace_out, log_path, out_dir = "results";
  std::vector<std::string> sets;
  int repetition = 0, task = 0;

  auto* gen = app.add_subcommand("generate-topology", "Write a generated network (and optionally its trace)");
  gen->add_option("-c,--config", config, "Configuration file");
  gen->add_option("--set", sets, "Override a configuration key (key=value)");
  gen->add_option("-r,--repetition", repetition, "Repetition whose seed to use");
  gen->add_option("-o,--out", out, "Output file (default stdout)");
  gen->add_option("--trace-out", trace_out, "Also write the workload trace here");

  auto* runc = app.add_subcommand("run", "Run the configured experiment matrix");
  runc->add_option("-c,--config", config, "Configuration file");
  runc->add_option("--set", sets, "Override a configuration key (key=value)");
  runc->add_option("-o,--out", out_dir, "Output directory");

  auto* sum = app.add_subcommand("summarize", "Compute metrics from a run log");
  sum->add_option("log", log_path, "Run log CSV")->required();
  sum->add_option("-o,--out", out, "Output file (default stdout)");

  auto* mt = app.add_subcommand("map-trace", "Dump the mapping messages of one task");
  mt->add_option("-c,--config", config, "Configuration file");
  mt->add_option("--set", sets, "Override a configuration key (key=value)");
  mt->add_option("-r,--repetition", repetition, "Repetition whose seed to use");
  mt->add_option("-t,--task", task, "Task index in the trace");
  mt->add_option("-o,--out", out, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return generate_topology(config, sets, repetition, out, trace_out);
    if (*runc) return run(config, sets, out_dir);
    if (*sum) return summarize_log(log_path, out);
    if (*mt) return map_trace(config, sets, repetition, task, out);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
