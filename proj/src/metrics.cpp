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

#include "bimodal/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "bimodal/text.hpp"

namespace bimodal {

namespace {

constexpr std::array<std::string_view, 11> kFields = {
    "acceptance_ratio",   "throughput",        "server_utilization",
    "dedicated_link_utilization", "uplink_utilization", "mean_sla_deviation",
    "mean_execution_elongation",  "submitted",          "accepted",
    "completed",          "residual_mb",
};

// Time average of a piecewise-constant series over [0, horizon].
template <typename Get>
double time_average(const std::vector<UtilSample>& samples, double horizon, Get get) {
  if (horizon <= 0 || samples.empty()) return 0;
  double area = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double from = std::max(0.0, samples[i].time);
    const double to = i + 1 < samples.size() ? std::min(samples[i + 1].time, horizon) : horizon;
    if (to > from) area += get(samples[i]) * (to - from);
    if (to >= horizon) break;
  }
  return area / horizon;
}

}  // namespace

MetricsReport summarize(const RunLog& log) {
  MetricsReport r;
  double deviation = 0, elongation = 0, delivered_mb = 0;
  for (std::size_t i = 1; i < log.util.size(); ++i)
    if (log.util[i].time < log.util[i - 1].time) throw Error(ErrorCode::kMalformedLog, "utilization samples out of order");
  for (const auto& t : log.tasks) {
    ++r.submitted;
    if (!t.accepted()) continue;
    ++r.accepted;
    deviation += t.deviation;
    if (t.outcome != "completed") {
      r.residual_mb += t.delivered_bytes / kBytesPerMB;
      continue;
    }
    if (t.start < 0 || t.completion < t.start || t.ideal <= 0)
      throw Error(ErrorCode::kMalformedLog, "task " + std::to_string(t.id) + " has inconsistent times");
    ++r.completed;
    elongation += (t.completion - t.start) / t.ideal;
    if (t.completion <= log.horizon) delivered_mb += t.delivered_bytes / kBytesPerMB;
    else r.residual_mb += t.delivered_bytes / kBytesPerMB;
  }
  if (r.submitted > 0) r.acceptance_ratio = r.accepted / r.submitted;
  if (r.accepted > 0) r.mean_sla_deviation = deviation / r.accepted;
  if (r.completed > 0) r.mean_execution_elongation = elongation / r.completed;
  if (log.horizon > 0) r.throughput = delivered_mb / (log.horizon / 3600.0);
  r.server_utilization = time_average(log.util, log.horizon, [](const UtilSample& s) { return s.cpu; });
  r.dedicated_link_utilization = time_average(log.util, log.horizon, [](const UtilSample& s) { return s.link; });
  r.uplink_utilization = time_average(log.util, log.horizon, [](const UtilSample& s) { return s.uplink; });
  return r;
}

std::span<const std::string_view> metric_fields() { return kFields; }

double metric_value(const MetricsReport& r, std::string_view field) {
  if (field == "acceptance_ratio") return r.acceptance_ratio;
  if (field == "throughput") return r.throughput;
  if (field == "server_utilization") return r.server_utilization;
  if (field == "dedicated_link_utilization") return r.dedicated_link_utilization;
  if (field == "uplink_utilization") return r.uplink_utilization;
  if (field == "mean_sla_deviation") return r.mean_sla_deviation;
  if (field == "mean_execution_elongation") return r.mean_execution_elongation;
  if (field == "submitted") return r.submitted;
  if (field == "accepted") return r.accepted;
  if (field == "completed") return r.completed;
  if (field == "residual_mb") return r.residual_mb;
  throw Error(ErrorCode::kUnknownKey, "unknown metric '" + std::string(field) + "'");
}

std::vector<FieldSummary> aggregate(std::span<const MetricsReport> reports) {
  if (reports.size() < 2)
    throw Error(ErrorCode::kInsufficientSamples, "aggregate needs at least two reports");
  const double n = static_cast<double>(reports.size());
  std::vector<FieldSummary> out;
  for (auto field : kFields) {
    // Two-pass over sorted values so the result ignores report order.
    std::vector<double> v;
    v.reserve(reports.size());
    for (const auto& r : reports) v.push_back(metric_value(r, field));
    std::sort(v.begin(), v.end());
    double sum = 0;
    for (double x : v) sum += x;
    const double mean = sum / n;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1));
    out.push_back({std::string(field), mean, 1.96 * sd / std::sqrt(n)});
  }
  return out;
}

std::string to_text(const MetricsReport& r) {
  std::ostringstream os;
  os << "# throughput: MB/hour delivered by tasks completed by the last arrival\n";
  for (auto field : kFields) os << field << " = " << text::format_double(metric_value(r, field)) << '\n';
  return os.str();
}

void write_metrics_header(std::ostream& os) { os << "point,field,mean,ci95\n"; }

void write_metrics_rows(std::ostream& os, std::string_view point, std::span<const FieldSummary> rows) {
  for (const auto& row : rows)
    os << point << ',' << row.field << ',' << text::format_double(row.mean) << ','
       << text::format_double(row.ci95) << '\n';
}

}  // namespace bimodal
