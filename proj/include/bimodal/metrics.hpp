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

#ifndef BIMODAL_METRICS_HPP_
#define BIMODAL_METRICS_HPP_

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bimodal/engine.hpp"

namespace bimodal {

// Evaluation quantities of one run. Throughput is MB per hour delivered by
// tasks that completed by the horizon (the last arrival).
struct MetricsReport {
  double acceptance_ratio = 0;
  double throughput = 0;
  double server_utilization = 0;
  double dedicated_link_utilization = 0;
  double uplink_utilization = 0;
  double mean_sla_deviation = 0;
  double mean_execution_elongation = 0;
  double submitted = 0;
  double accepted = 0;
  double completed = 0;
  double residual_mb = 0;  // delivered after the horizon or left unfinished
};

MetricsReport summarize(const RunLog& log);

// Field names in output order, and lookup by name.
std::span<const std::string_view> metric_fields();
double metric_value(const MetricsReport& r, std::string_view field);

struct FieldSummary {
  std::string field;
  double mean = 0;
  double ci95 = 0;  // normal-approximation half-width
};

// Throws Error(kInsufficientSamples) for fewer than two reports.
std::vector<FieldSummary> aggregate(std::span<const MetricsReport> reports);

std::string to_text(const MetricsReport& r);
void write_metrics_header(std::ostream& os);
void write_metrics_rows(std::ostream& os, std::string_view point, std::span<const FieldSummary> rows);

}  // namespace bimodal

#endif  // BIMODAL_METRICS_HPP_
