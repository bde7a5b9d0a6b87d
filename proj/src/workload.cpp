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

#include "bimodal/workload.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "bimodal/random.hpp"
#include "bimodal/text.hpp"

namespace bimodal {

double TaskSpec::delivered_volume_bytes() const {
  double gain = 1.0;
  for (double s : shrinkage) gain *= s;
  return data_volume * kBytesPerMB * gain;
}

double TaskSpec::ideal_duration() const {
  return delivered_volume_bytes() / (target_rate * kBytesPerMbps);
}

double BudgetVector::total() const {
  return std::accumulate(processing.begin(), processing.end(), 0.0) +
         std::accumulate(transport.begin(), transport.end(), 0.0);
}

Trace generate_trace(const WorkloadParams& p, const Network& net, std::uint64_t seed) {
  if (p.n_tasks < 0 || !(p.arrival_rate > 0) || p.chain_length < 1 || !(p.target_rate > 0) ||
      !(p.mean_volume > 0) || !(p.window > 0) || p.price_min > p.price_max || !(p.price_min > 0) ||
      !(p.shrinkage_min > 0) || p.shrinkage_min > p.shrinkage_max)
    throw Error(ErrorCode::kInvalidParameters, "bad workload parameters");
  if (net.node_count() == 0) throw Error(ErrorCode::kInvalidParameters, "empty network");

  std::vector<ServiceId> hosted;
  for (ServiceId s = 0; static_cast<std::size_t>(s) < net.service_count(); ++s)
    if (!net.service_providers(s).empty()) hosted.push_back(s);
  if (hosted.empty()) throw Error(ErrorCode::kInvalidParameters, "no service is hosted anywhere");

  Rng rng(seed);
  std::exponential_distribution<double> gap(p.arrival_rate / 3600.0);
  std::exponential_distribution<double> volume(1.0 / p.mean_volume);
  std::uniform_int_distribution<std::size_t> pick_service(0, hosted.size() - 1);
  std::uniform_int_distribution<NodeId> pick_node(0, static_cast<NodeId>(net.node_count()) - 1);
  std::uniform_real_distribution<double> price(p.price_min, p.price_max);
  std::uniform_real_distribution<double> shrink(p.shrinkage_min, p.shrinkage_max);
  std::uniform_real_distribution<double> log_shrink(std::log(p.shrinkage_min), std::log(p.shrinkage_max));

  Trace trace;
  trace.reserve(p.n_tasks);
  double t = 0;
  for (int i = 0; i < p.n_tasks; ++i) {
    t += gap(rng);
    TaskSpec spec;
    spec.id = i;
    for (int c = 0; c < p.chain_length; ++c) {
      ServiceId s = hosted[pick_service(rng)];
      spec.services.push_back(s);
      spec.cpu_factor.push_back(net.service(s).cpu_factor);
    }
    for (int c = 0; c < p.chain_length; ++c)
      spec.shrinkage.push_back(p.log_shrinkage ? std::exp(log_shrink(rng)) : shrink(rng));
    spec.source = pick_node(rng);
    spec.delivery = pick_node(rng);
    if (net.node_count() > 1)
      while (spec.delivery == spec.source) spec.delivery = pick_node(rng);
    spec.target_rate = p.target_rate;
    spec.data_volume = volume(rng);
    spec.price_per_byte = price(rng);
    spec.window = p.window;
    trace.push_back({t, std::move(spec)});
  }
  return trace;
}

RateChain rate_chain(const TaskSpec& task) {
  const std::size_t n = task.size();
  if (n == 0) throw Error(ErrorCode::kInvalidParameters, "empty service chain");
  RateChain rc;
  rc.input_rate.resize(n);
  rc.output_rate.resize(n);
  // Walk backwards from the delivery rate so the final output is exact.
  double out = task.target_rate;
  for (std::size_t i = n; i-- > 0;) {
    double s = task.shrinkage[i];
    if (!(s > 0)) throw Error(ErrorCode::kDegenerateShrinkage, "component " + std::to_string(i));
    rc.output_rate[i] = out;
    rc.input_rate[i] = out / s;
    out = rc.input_rate[i];
  }
  rc.source_rate = rc.input_rate[0];
  return rc;
}

BudgetVector apportion_budget(const TaskSpec& task, double transport_fraction) {
  const RateChain rc = rate_chain(task);
  const std::size_t n = task.size();
  const double revenue = task.price_per_byte * task.target_rate * kBytesPerMbps;
  BudgetVector b;
  b.transport.assign(n + 1, transport_fraction * revenue / static_cast<double>(n + 1));
  const double processing_total = (1.0 - transport_fraction) * revenue;
  double work_total = 0;
  for (std::size_t i = 0; i < n; ++i) work_total += task.cpu_factor[i] * rc.input_rate[i];
  b.processing.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    b.processing[i] = work_total > 0
                          ? processing_total * (task.cpu_factor[i] * rc.input_rate[i]) / work_total
                          : processing_total / static_cast<double>(n);
  }
  return b;
}

double budget_per_input_byte(const BudgetVector& budget, const RateChain& chain,
                             std::size_t component) {
  return budget.processing[component] / (chain.input_rate[component] * kBytesPerMbps);
}

void write_trace(std::ostream& os, const Trace& trace) {
  using text::format_double;
  os << "# time id source delivery target_rate data_volume price window services shrinkage cpu_factor\n";
  for (const auto& a : trace) {
    const auto& s = a.spec;
    os << "task " << format_double(a.time) << ' ' << s.id << ' ' << s.source << ' ' << s.delivery << ' '
       << format_double(s.target_rate) << ' ' << format_double(s.data_volume) << ' '
       << format_double(s.price_per_byte) << ' ' << format_double(s.window) << ' ';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s.services[i];
    os << ' ';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << format_double(s.shrinkage[i]);
    os << ' ';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << format_double(s.cpu_factor[i]);
    os << "\n";
  }
}

std::string trace_to_text(const Trace& trace) {
  std::ostringstream os;
  write_trace(os, trace);
  return os.str();
}

Trace read_trace(std::istream& is) {
  Trace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = text::split_ws(t);
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::kConfigParse, "trace line " + std::to_string(line_no) + ": " + what);
    };
    if (f.size() != 12 || f[0] != "task") fail("expected 12 fields starting with 'task'");
    try {
      TaskArrival a;
      a.time = text::parse_double(f[1]);
      a.spec.id = static_cast<TaskId>(text::parse_int(f[2]));
      a.spec.source = static_cast<NodeId>(text::parse_int(f[3]));
      a.spec.delivery = static_cast<NodeId>(text::parse_int(f[4]));
      a.spec.target_rate = text::parse_double(f[5]);
      a.spec.data_volume = text::parse_double(f[6]);
      a.spec.price_per_byte = text::parse_double(f[7]);
      a.spec.window = text::parse_double(f[8]);
      for (auto v : text::split(f[9], ',')) a.spec.services.push_back(static_cast<ServiceId>(text::parse_int(v)));
      for (auto v : text::split(f[10], ',')) a.spec.shrinkage.push_back(text::parse_double(v));
      for (auto v : text::split(f[11], ',')) a.spec.cpu_factor.push_back(text::parse_double(v));
      if (a.spec.services.size() != a.spec.shrinkage.size() ||
          a.spec.services.size() != a.spec.cpu_factor.size())
        fail("component list lengths differ");
      trace.push_back(std::move(a));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfigParse) throw;
      fail(e.what());
    }
  }
  return trace;
}

std::uint64_t trace_hash(const Trace& trace) { return fnv1a(trace_to_text(trace)); }

}  // namespace bimodal
