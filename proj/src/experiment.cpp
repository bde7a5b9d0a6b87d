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

#include "bimodal/experiment.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "bimodal/random.hpp"
#include "bimodal/text.hpp"

namespace bimodal {

namespace {

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct KeySpec {
  std::string name;
  Setter set;
  Getter get;
};

[[noreturn]] void range_error(std::string_view key, const std::string& why) {
  throw Error(ErrorCode::kRangeError, std::string(key) + ": " + why);
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    return text::parse_double(v);
  } catch (const Error&) {
    throw Error(ErrorCode::kTypeError, std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
}

long long parse_integer(std::string_view key, std::string_view v) {
  try {
    return text::parse_int(v);
  } catch (const Error&) {
    throw Error(ErrorCode::kTypeError, std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
}

bool parse_flag(std::string_view key, std::string_view v) {
  try {
    return text::parse_bool(v);
  } catch (const Error&) {
    throw Error(ErrorCode::kTypeError, std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
  }
}

// Numeric key bound to a member, with an inclusive or exclusive floor and
// an optional ceiling.
template <typename T>
KeySpec real_key(std::string name, T ExperimentConfig::*group, double T::*field, double lo, bool lo_open,
                 double hi = std::numeric_limits<double>::infinity()) {
  return {name,
          [=](ExperimentConfig& c, std::string_view v) {
            const double x = parse_real(name, v);
            if (!std::isfinite(x) || (lo_open ? x <= lo : x < lo) || x > hi)
              range_error(name, "value " + std::string(v) + " out of range");
            (c.*group).*field = x;
          },
          [=](const ExperimentConfig& c) { return text::format_double((c.*group).*field); }};
}

template <typename T>
KeySpec int_key(std::string name, T ExperimentConfig::*group, int T::*field, long long lo) {
  return {name,
          [=](ExperimentConfig& c, std::string_view v) {
            const long long x = parse_integer(name, v);
            if (x < lo || x > std::numeric_limits<int>::max()) range_error(name, "value " + std::string(v) + " out of range");
            (c.*group).*field = static_cast<int>(x);
          },
          [=](const ExperimentConfig& c) { return std::to_string((c.*group).*field); }};
}

template <typename T>
KeySpec bool_key(std::string name, T ExperimentConfig::*group, bool T::*field) {
  return {name, [=](ExperimentConfig& c, std::string_view v) { (c.*group).*field = parse_flag(name, v); },
          [=](const ExperimentConfig& c) { return std::string((c.*group).*field ? "true" : "false"); }};
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

const std::vector<KeySpec>& key_table() {
  using C = ExperimentConfig;
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    t.push_back({"modes",
                 [](C& c, std::string_view v) {
                   std::vector<PlatformMode> modes;
                   for (auto m : text::split(v, ','))
                     try {
                       modes.push_back(parse_platform_mode(text::trim(m)));
                     } catch (const Error&) {
                       throw Error(ErrorCode::kTypeError, "modes: unknown platform mode '" + std::string(m) + "'");
                     }
                   if (modes.empty()) range_error("modes", "at least one mode is required");
                   c.modes = std::move(modes);
                 },
                 [](const C& c) {
                   std::vector<std::string> names;
                   for (auto m : c.modes) names.emplace_back(to_string(m));
                   return join(names);
                 }});
    t.push_back({"dynamic_scheduling", [](C& c, std::string_view v) { c.dynamic_scheduling = parse_flag("dynamic_scheduling", v); },
                 [](const C& c) { return std::string(c.dynamic_scheduling ? "true" : "false"); }});

    t.push_back(int_key("n_nodes", &C::topology, &TopologyParams::n_nodes, 2));
    t.push_back(int_key("n_links", &C::topology, &TopologyParams::n_links, 0));
    t.push_back(int_key("n_service_types", &C::topology, &TopologyParams::n_service_types, 1));
    t.push_back(real_key("cpu_instances", &C::topology, &TopologyParams::cpu_instances, 0, true));
    t.push_back(real_key("nominal_rate", &C::topology, &TopologyParams::nominal_rate, 0, true));
    t.push_back(real_key("link_bw_min", &C::topology, &TopologyParams::link_bw_min, 0, true));
    t.push_back(real_key("link_bw_max", &C::topology, &TopologyParams::link_bw_max, 0, true));
    t.push_back(real_key("link_delay_min", &C::topology, &TopologyParams::link_delay_min, 0, false));
    t.push_back(real_key("link_delay_max", &C::topology, &TopologyParams::link_delay_max, 0, false));
    t.push_back(real_key("uplink_bw_min", &C::topology, &TopologyParams::uplink_bw_min, 0, true));
    t.push_back(real_key("uplink_bw_max", &C::topology, &TopologyParams::uplink_bw_max, 0, true));
    t.push_back(real_key("public_delay_min", &C::topology, &TopologyParams::public_delay_min, 0, false));
    t.push_back(real_key("public_delay_max", &C::topology, &TopologyParams::public_delay_max, 0, false));
    t.push_back(real_key("cpu_factor_min", &C::topology, &TopologyParams::cpu_factor_min, 0, false));
    t.push_back(real_key("cpu_factor_max", &C::topology, &TopologyParams::cpu_factor_max, 0, false));
    t.push_back({"directory_fraction",
                 [](C& c, std::string_view v) {
                   const double x = parse_real("directory_fraction", v);
                   if (!(x >= 0 && x <= 1)) range_error("directory_fraction", "must lie in [0, 1]");
                   c.directory_fraction = x;
                 },
                 [](const C& c) { return text::format_double(c.directory_fraction); }});

    t.push_back(int_key("n_tasks", &C::workload, &WorkloadParams::n_tasks, 0));
    t.push_back(real_key("arrival_rate", &C::workload, &WorkloadParams::arrival_rate, 0, true));
    t.push_back(int_key("chain_length", &C::workload, &WorkloadParams::chain_length, 1));
    t.push_back(real_key("target_rate", &C::workload, &WorkloadParams::target_rate, 0, true));
    t.push_back(real_key("mean_volume", &C::workload, &WorkloadParams::mean_volume, 0, true));
    t.push_back(real_key("window", &C::workload, &WorkloadParams::window, 0, true));
    t.push_back(real_key("price_min", &C::workload, &WorkloadParams::price_min, 0, false));
    t.push_back(real_key("price_max", &C::workload, &WorkloadParams::price_max, 0, false));
    t.push_back(real_key("shrinkage_min", &C::workload, &WorkloadParams::shrinkage_min, 0, true));
    t.push_back(real_key("shrinkage_max", &C::workload, &WorkloadParams::shrinkage_max, 0, true));
    t.push_back(bool_key("log_shrinkage", &C::workload, &WorkloadParams::log_shrinkage));

    t.push_back(real_key("transport_fraction", &C::mapping, &MappingParams::transport_fraction, 0, false, 1));
    t.push_back(real_key("hop_cost", &C::mapping, &MappingParams::hop_cost, 0, true));
    t.push_back(int_key("max_segment_links", &C::mapping, &MappingParams::max_segment_links, 0));
    t.push_back(real_key("tie_threshold", &C::mapping, &MappingParams::tie_threshold, 0, false));
    t.push_back(bool_key("least_cost_map", &C::mapping, &MappingParams::least_cost_map));
    t.push_back(bool_key("admit_equal_cost", &C::mapping, &MappingParams::admit_equal_cost));

    t.push_back(real_key("epoch", &C::engine, &EngineParams::epoch, 0, true));
    t.push_back(real_key("perturb_interval", &C::engine, &EngineParams::perturb_interval, 0, true));
    t.push_back(real_key("sigma", &C::engine, &EngineParams::sigma, 0, false));
    t.push_back(bool_key("clamp_deviation", &C::engine, &EngineParams::clamp_deviation));
    t.push_back(real_key("required_cap", &C::engine, &EngineParams::required_cap, 1, false));
    t.push_back(real_key("rate_floor", &C::engine, &EngineParams::rate_floor, 0, false));
    t.push_back(real_key("drain_limit", &C::engine, &EngineParams::drain_limit, 0, false));
    t.push_back(bool_key("audit", &C::engine, &EngineParams::audit));
    t.push_back(bool_key("plan_log", &C::engine, &EngineParams::plan_log));

    t.push_back({"sweep_axis",
                 [](C& c, std::string_view v) {
                   const std::string axis(text::trim(v));
                   if (axis == "sweep_axis" || axis == "sweep_values" || axis == "repetitions" || axis == "base_seed")
                     range_error("sweep_axis", "cannot sweep '" + axis + "'");
                   c.sweep_axis = axis == "none" ? "" : axis;
                 },
                 [](const C& c) { return c.sweep_axis.empty() ? std::string("none") : c.sweep_axis; }});
    t.push_back({"sweep_values",
                 [](C& c, std::string_view v) {
                   c.sweep_values.clear();
                   for (auto x : text::split(v, ','))
                     if (!text::trim(x).empty()) c.sweep_values.emplace_back(text::trim(x));
                 },
                 [](const C& c) { return join(c.sweep_values); }});
    t.push_back({"repetitions",
                 [](C& c, std::string_view v) {
                   const long long x = parse_integer("repetitions", v);
                   if (x < 1 || x > 1000000) range_error("repetitions", "must be at least 1");
                   c.repetitions = static_cast<int>(x);
                 },
                 [](const C& c) { return std::to_string(c.repetitions); }});
    t.push_back({"base_seed",
                 [](C& c, std::string_view v) {
                   const long long x = parse_integer("base_seed", v);
                   if (x < 0) range_error("base_seed", "must be non-negative");
                   c.base_seed = static_cast<std::uint64_t>(x);
                 },
                 [](const C& c) { return std::to_string(c.base_seed); }});
    t.push_back({"write_runlogs", [](C& c, std::string_view v) { c.write_runlogs = parse_flag("write_runlogs", v); },
                 [](const C& c) { return std::string(c.write_runlogs ? "true" : "false"); }});
    return t;
  }();
  return table;
}

const KeySpec& find_key(std::string_view key) {
  for (const auto& k : key_table())
    if (k.name == key) return k;
  throw Error(ErrorCode::kUnknownKey, "unknown key '" + std::string(key) + "'");
}

// Cross-field rules; `sparse_ok` admits link counts below a spanning tree.
void check(const ExperimentConfig& c, bool sparse_ok) {
  const auto& t = c.topology;
  auto ordered = [](std::string_view name, double lo, double hi) {
    if (lo > hi) range_error(name, "minimum exceeds maximum");
  };
  ordered("link_bw", t.link_bw_min, t.link_bw_max);
  ordered("link_delay", t.link_delay_min, t.link_delay_max);
  ordered("uplink_bw", t.uplink_bw_min, t.uplink_bw_max);
  ordered("public_delay", t.public_delay_min, t.public_delay_max);
  ordered("shrinkage", c.workload.shrinkage_min, c.workload.shrinkage_max);
  ordered("cpu_factor", t.cpu_factor_min, t.cpu_factor_max);
  ordered("price", c.workload.price_min, c.workload.price_max);
  const long long n = t.n_nodes;
  if (t.n_links > n * (n - 1) / 2) range_error("n_links", "exceeds the number of node pairs");
  if (!sparse_ok && t.n_links < n - 1)
    range_error("n_links", "below n_nodes - 1 (" + std::to_string(n - 1) + "); only link sweeps may go lower");
  if (!c.sweep_axis.empty()) {
    if (c.sweep_values.empty()) range_error("sweep_values", "a sweep axis needs values");
    find_key(c.sweep_axis);
  }
}

// Message without the leading error-code name.
std::string detail(const Error& e) {
  const std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  return msg.starts_with(prefix) ? msg.substr(prefix.size()) : msg;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& k : key_table()) keys.push_back(k.name);
  return keys;
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  find_key(key).set(cfg, text::trim(value));
}

std::string get_config_value(const ExperimentConfig& cfg, std::string_view key) { return find_key(key).get(cfg); }

void validate(const ExperimentConfig& cfg) { check(cfg, cfg.sweep_axis == "n_links"); }

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::map<std::string, int, std::less<>> lines;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string_view body = text::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::kConfigParse, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(text::trim(body.substr(0, eq)));
    try {
      set_config_value(cfg, key, body.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + detail(e));
    }
    lines[key] = line_no;
  }
  try {
    validate(cfg);
  } catch (const Error& e) {
    const std::string msg = detail(e);
    const auto colon = msg.find(':');
    const auto it = lines.find(msg.substr(0, colon));
    if (it != lines.end()) throw Error(e.code(), "line " + std::to_string(it->second) + ": " + msg);
    throw;
  }
  return cfg;
}

ExperimentConfig parse_config_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  return parse_config(is);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigParse, "cannot read " + path.string());
  return parse_config(in);
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfigParse, "override '" + o + "' is not key=value");
    set_config_value(cfg, text::trim(std::string_view(o).substr(0, eq)), std::string_view(o).substr(eq + 1));
  }
  validate(cfg);
}

std::string manifest_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# bimodal-manifest 1\n";
  for (const auto& k : key_table()) os << k.name << " = " << k.get(cfg) << '\n';
  for (int r = 0; r < cfg.repetitions; ++r) {
    const RunSeeds s = seeds_for(cfg.base_seed, r);
    os << "# repetition " << r << " seed " << s.run << " topology " << s.topology << " workload " << s.workload
       << " perturbation " << s.perturbation << '\n';
  }
  return os.str();
}

RunSeeds seeds_for(std::uint64_t base_seed, int repetition) {
  const std::uint64_t run = base_seed + static_cast<std::uint64_t>(repetition);
  return {run, derive_seed(run, "topology"), derive_seed(run, "workload"), derive_seed(run, "perturbation"),
          derive_seed(run, "directory")};
}

std::vector<ExperimentPoint> expand_points(const ExperimentConfig& cfg) {
  std::vector<ExperimentPoint> points;
  if (cfg.sweep_axis.empty()) {
    check(cfg, false);
    points.push_back({"default", cfg, false});
    return points;
  }
  for (const auto& v : cfg.sweep_values) {
    ExperimentPoint p{cfg.sweep_axis + "=" + v, cfg, false};
    set_config_value(p.config, cfg.sweep_axis, v);
    p.config.sweep_axis.clear();
    p.config.sweep_values.clear();
    const bool sweeps_links = cfg.sweep_axis == "n_links";
    check(p.config, sweeps_links);
    p.sparse = p.config.topology.n_links < p.config.topology.n_nodes - 1;
    p.config.topology.allow_sparse = p.sparse;
    points.push_back(std::move(p));
  }
  return points;
}

RunResult run_once(const ExperimentConfig& point, PlatformMode mode, int repetition, const std::string& label,
                   bool sparse) {
  RunResult r;
  r.point = label;
  r.mode = mode;
  r.repetition = repetition;
  r.seeds = seeds_for(point.base_seed, repetition);
  r.sparse = sparse;
  Network net = generate_network(point.topology, r.seeds.topology);
  const Trace trace = generate_trace(point.workload, net, r.seeds.workload);
  r.trace_hash = trace_hash(trace);
  if (point.directory_fraction < 1.0) net.set_directory_knowledge(point.directory_fraction, r.seeds.directory);
  EngineParams engine = point.engine;
  engine.mode = mode;
  engine.dynamic_scheduling = point.dynamic_scheduling;
  RunOutput out = simulate(std::move(net), trace, point.mapping, engine, r.seeds.perturbation);
  r.log = std::move(out.log);
  r.log.sparse = sparse;
  r.plan_csv = std::move(out.plan_csv);
  r.report = summarize(r.log);
  return r;
}

namespace {

std::string point_label(const std::string& point, PlatformMode mode, bool dynamic) {
  return point + ";mode=" + std::string(to_string(mode)) + ";dynamic=" + (dynamic ? "1" : "0");
}

}  // namespace

ExperimentOutput run_experiments(const ExperimentConfig& cfg, bool keep_logs) {
  ExperimentOutput out;
  out.manifest = manifest_text(cfg);
  std::ostringstream runs, metrics;
  runs << "point,mode,dynamic,repetition,seed,trace_hash,sparse";
  for (auto f : metric_fields()) runs << ',' << f;
  runs << '\n';
  write_metrics_header(metrics);
  for (const auto& p : expand_points(cfg)) {
    for (PlatformMode mode : cfg.modes) {
      std::vector<MetricsReport> reports;
      for (int r = 0; r < cfg.repetitions; ++r) {
        RunResult res = run_once(p.config, mode, r, p.label, p.sparse);
        runs << p.label << ',' << to_string(mode) << ',' << (cfg.dynamic_scheduling ? 1 : 0) << ',' << r << ','
             << res.seeds.run << ',' << res.trace_hash << ',' << (p.sparse ? 1 : 0);
        for (auto f : metric_fields()) runs << ',' << text::format_double(metric_value(res.report, f));
        runs << '\n';
        reports.push_back(res.report);
        if (!keep_logs && !cfg.write_runlogs) {
          res.log = RunLog{};
          res.plan_csv.clear();
        }
        out.runs.push_back(std::move(res));
      }
      const std::string label = point_label(p.label, mode, cfg.dynamic_scheduling);
      if (reports.size() >= 2) {
        write_metrics_rows(metrics, label, aggregate(reports));
      } else {
        std::vector<FieldSummary> single;
        for (auto f : metric_fields())
          single.push_back({std::string(f), metric_value(reports.front(), f), std::numeric_limits<double>::quiet_NaN()});
        write_metrics_rows(metrics, label, single);
      }
    }
  }
  out.runs_csv = runs.str();
  out.metrics_csv = metrics.str();
  return out;
}

void write_outputs(const ExperimentOutput& out, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [](const std::filesystem::path& p, const std::string& body) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorCode::kInvalidParameters, "cannot write " + p.string());
    f << body;
  };
  put(dir / "manifest.txt", out.manifest);
  put(dir / "runs.csv", out.runs_csv);
  put(dir / "metrics.csv", out.metrics_csv);
  if (!cfg.write_runlogs && !cfg.engine.plan_log) return;
  std::filesystem::create_directories(dir / "runlogs");
  for (const auto& r : out.runs) {
    std::string stem = r.point + "_" + std::string(to_string(r.mode)) + "_r" + std::to_string(r.repetition);
    for (char& ch : stem)
      if (ch == '=' || ch == ';' || ch == '/') ch = '-';
    if (cfg.write_runlogs) put(dir / "runlogs" / (stem + ".csv"), r.log.to_csv());
    if (cfg.engine.plan_log) put(dir / "runlogs" / (stem + "_plan.csv"), r.plan_csv);
  }
}

}  // namespace bimodal
