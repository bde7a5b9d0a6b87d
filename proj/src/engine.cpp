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

#include "bimodal/engine.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <unordered_map>
#include <sstream>

#include <boost/random/normal_distribution.hpp>

#include "bimodal/reservation.hpp"
#include "bimodal/text.hpp"

namespace bimodal {

double perturb_factor(Rng& rng, double sigma) {
  if (sigma == 0) return 1.0;
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  return std::exp2(sigma * normal(rng));
}

double FluidState::expected(double t) const { return std::clamp(target_bps * (t - start), 0.0, total_bytes); }

double advance_fluid(FluidState& s, double t, double dt) {
  double spent = 0;
  for (int phase = 0; phase < 8 && spent < dt && !s.done(); ++phase) {
    const double now = t + spent;
    const double left = dt - spent;
    const double remaining = s.total_bytes - s.delivered;
    const double e = s.expected(now);
    double rate, horizon;
    bool catches_up = false;
    if (s.phi <= 1 || s.delivered >= e) {
      rate = std::min(s.phi, 1.0) * s.target_bps;
      if (rate <= 0) return dt;
      horizon = remaining / rate;
    } else {
      rate = s.phi * s.target_bps;
      const double t_cap = s.start + s.total_bytes / s.target_bps;
      horizon = (e - s.delivered) / (rate - s.target_bps);
      catches_up = true;
      if (now + horizon > t_cap) {
        // Expected volume saturates first, so this phase runs to the end.
        const double at_cap = s.delivered + rate * (t_cap - now);
        horizon = at_cap >= s.total_bytes ? remaining / rate : (t_cap - now) + (s.total_bytes - at_cap) / rate;
        catches_up = false;
      }
    }
    const double step = std::min(left, horizon);
    s.delivered += rate * step;
    spent += step;
    if (step == horizon) {
      if (catches_up) s.delivered = std::min(s.delivered, s.expected(t + spent));
      else s.delivered = s.total_bytes;
    }
    if (s.total_bytes - s.delivered <= 1e-9 * s.total_bytes) s.delivered = s.total_bytes;
  }
  return s.done() ? spent : dt;
}

double time_to_complete(const FluidState& state, double t) {
  if (state.done()) return 0;
  FluidState copy = state;
  const double inf = std::numeric_limits<double>::infinity();
  const double spent = advance_fluid(copy, t, inf);
  return copy.done() ? spent : inf;
}

double window_increment(double target_mbps, double observed_mbps, bool clamp) {
  const double inc = (target_mbps - observed_mbps) / target_mbps;
  return clamp ? std::max(0.0, inc) : inc;
}

// RunLog text form ------------------------------------------------------

void RunLog::write(std::ostream& os) const {
  using text::format_double;
  os << "# bimodal-runlog 1\n";
  os << "meta,mode," << mode << '\n';
  os << "meta,dynamic_scheduling," << (dynamic_scheduling ? 1 : 0) << '\n';
  os << "meta,horizon," << format_double(horizon) << '\n';
  os << "meta,end_time," << format_double(end_time) << '\n';
  os << "meta,nodes," << nodes << '\n';
  os << "meta,links," << links << '\n';
  os << "meta,sparse," << (sparse ? 1 : 0) << '\n';
  os << "meta,audit_failures," << audit_failures << '\n';
  for (const auto& m : audit_messages) os << "audit," << m << '\n';
  os << "# task,id,arrival,outcome,start,completion,target,delivered_bytes,ideal,deviation,windows,"
        "feasible_maps,probes,map_messages,public_segments,dedicated_segments\n";
  for (const auto& t : tasks) {
    os << "task," << t.id << ',' << format_double(t.arrival) << ',' << t.outcome << ',' << format_double(t.start)
       << ',' << format_double(t.completion) << ',' << format_double(t.target) << ','
       << format_double(t.delivered_bytes) << ',' << format_double(t.ideal) << ',' << format_double(t.deviation)
       << ',' << t.windows << ',' << t.feasible_maps << ',' << t.probes << ',' << t.map_messages << ','
       << t.public_segments << ',' << t.dedicated_segments << '\n';
  }
  os << "# util,time,cpu,link,uplink\n";
  for (const auto& u : util)
    os << "util," << format_double(u.time) << ',' << format_double(u.cpu) << ',' << format_double(u.link) << ','
       << format_double(u.uplink) << '\n';
  os << "# event,time,kind,task,node,detail\n";
  for (const auto& e : events)
    os << "event," << format_double(e.time) << ',' << e.kind << ',' << e.task << ',' << e.node << ',' << e.detail
       << '\n';
}

std::string RunLog::to_csv() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

RunLog RunLog::parse(std::istream& is) {
  RunLog log;
  std::string line;
  int line_no = 0;
  bool header = false;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::kMalformedLog, "run log line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# bimodal-runlog", 0) == 0) header = true;
      continue;
    }
    if (!header) fail("missing header");
    const auto f = text::split(line, ',');
    try {
      if (f[0] == "meta") {
        if (f.size() != 3) fail("bad meta record");
        const auto key = f[1];
        if (key == "mode") log.mode = std::string(f[2]);
        else if (key == "dynamic_scheduling") log.dynamic_scheduling = text::parse_bool(f[2]);
        else if (key == "horizon") log.horizon = text::parse_double(f[2]);
        else if (key == "end_time") log.end_time = text::parse_double(f[2]);
        else if (key == "nodes") log.nodes = static_cast<std::size_t>(text::parse_int(f[2]));
        else if (key == "links") log.links = static_cast<std::size_t>(text::parse_int(f[2]));
        else if (key == "sparse") log.sparse = text::parse_bool(f[2]);
        else if (key == "audit_failures") log.audit_failures = static_cast<std::uint64_t>(text::parse_int(f[2]));
        else fail("unknown meta key");
      } else if (f[0] == "audit") {
        log.audit_messages.emplace_back(line.substr(6));
      } else if (f[0] == "task") {
        if (f.size() != 16) fail("task record needs 16 fields");
        TaskRecord t;
        t.id = static_cast<TaskId>(text::parse_int(f[1]));
        t.arrival = text::parse_double(f[2]);
        t.outcome = std::string(f[3]);
        t.start = text::parse_double(f[4]);
        t.completion = text::parse_double(f[5]);
        t.target = text::parse_double(f[6]);
        t.delivered_bytes = text::parse_double(f[7]);
        t.ideal = text::parse_double(f[8]);
        t.deviation = text::parse_double(f[9]);
        t.windows = static_cast<int>(text::parse_int(f[10]));
        t.feasible_maps = static_cast<int>(text::parse_int(f[11]));
        t.probes = static_cast<int>(text::parse_int(f[12]));
        t.map_messages = static_cast<std::uint64_t>(text::parse_int(f[13]));
        t.public_segments = static_cast<int>(text::parse_int(f[14]));
        t.dedicated_segments = static_cast<int>(text::parse_int(f[15]));
        log.tasks.push_back(std::move(t));
      } else if (f[0] == "util") {
        if (f.size() != 5) fail("util record needs 5 fields");
        log.util.push_back({text::parse_double(f[1]), text::parse_double(f[2]), text::parse_double(f[3]),
                            text::parse_double(f[4])});
      } else if (f[0] == "event") {
        if (f.size() < 6) fail("event record needs 6 fields");
        LogEvent e;
        e.time = text::parse_double(f[1]);
        e.kind = std::string(f[2]);
        e.task = static_cast<TaskId>(text::parse_int(f[3]));
        e.node = static_cast<NodeId>(text::parse_int(f[4]));
        std::size_t pos = 0;
        for (int i = 0; i < 5 && pos != std::string::npos; ++i) pos = line.find(',', pos + (i ? 1 : 0));
        e.detail = pos == std::string::npos ? "" : line.substr(pos + 1);
        log.events.push_back(std::move(e));
      } else {
        fail("unknown record type");
      }
    } catch (const Error& err) {
      if (err.code() == ErrorCode::kMalformedLog) throw;
      fail(err.what());
    }
  }
  if (!header) throw Error(ErrorCode::kMalformedLog, "run log is empty");
  return log;
}

RunLog RunLog::from_csv(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

// Simulation ------------------------------------------------------------

namespace {

enum class EventKind : std::uint8_t {
  kArrival,
  kMap,
  kMapSettle,
  kProbe,
  kRollback,
  kConfirm,
  kComplete,
  kWindow,
  kMultiHopConfirm,
  kEpoch,
  kPerturb,
};

struct Event {
  double time;
  std::uint64_t seq;
  EventKind kind;
  std::int32_t task;
  std::int64_t a;
  std::int64_t b;
};

struct Later {
  bool operator()(const Event& x, const Event& y) const {
    return x.time != y.time ? x.time > y.time : x.seq > y.seq;
  }
};

enum class Phase { kPending, kMapping, kProbing, kConfirming, kStreaming, kDone };

struct TaskState {
  const TaskSpec* spec = nullptr;
  std::optional<MappingContext> ctx;
  std::optional<MappingSession> session;
  std::optional<MapRanking> ranking;
  std::optional<ReservationProbe> probe;
  std::optional<ActiveTask> active;
  Phase phase = Phase::kPending;
  FluidState fluid;
  double last_update = 0;
  std::vector<double> factor;
  std::vector<std::int64_t> multi_hop_version;
  std::int64_t completion_version = 0;
  double window_start = 0;
  double window_bytes = 0;
  std::int64_t window_index = 0;
  bool has_public = false;
};

class Simulation {
 public:
  Simulation(Network net, const Trace& trace, const MappingParams& mapping, const EngineParams& params,
             std::uint64_t seed)
      : net_(std::move(net)), trace_(trace), mapping_(mapping), params_(params), rng_(seed), normal_(0.0, 1.0) {
    mapping_.mode = params_.mode;
    sched_.mode = params_.mode;
    sched_.epoch = params_.epoch;
    sched_.required_cap = params_.required_cap;
    sched_.rate_floor = params_.rate_floor;
  }

  RunOutput run();

 private:
  void push(double time, EventKind kind, TaskId task = -1, std::int64_t a = 0, std::int64_t b = 0) {
    queue_.push(Event{time, seq_++, kind, task, a, b});
  }
  std::size_t push_map(double time, PartialMap&& map) {
    std::size_t slot;
    if (!free_slots_.empty()) {
      slot = free_slots_.back();
      free_slots_.pop_back();
      slots_[slot] = std::move(map);
    } else {
      slot = slots_.size();
      slots_.push_back(std::move(map));
    }
    push(time, EventKind::kMap, slots_[slot].task, static_cast<std::int64_t>(slot));
    return slot;
  }
  void note(const std::string& kind, TaskId task, NodeId node, std::string detail = {}) {
    log_.events.push_back({now_, kind, task, node, std::move(detail)});
  }

  // Bytes delivered over one closed window and its length in seconds.
  void note_window(const TaskState& ts, double bytes, double seconds) {
    note("window", ts.spec->id, ts.spec->delivery, text::format_double(bytes) + " " + text::format_double(seconds));
  }

  void on_arrival(TaskId t);
  void on_map(std::size_t slot);
  void on_mapping_done(TaskState& ts);
  void next_probe(TaskState& ts);
  void on_probe(TaskState& ts);
  void on_rollback(TaskState& ts);
  void on_confirm(TaskState& ts);
  void on_window(TaskState& ts, std::int64_t index);
  void on_complete(TaskState& ts, std::int64_t version);
  void on_multi_hop_confirm(TaskState& ts, int segment, std::int64_t version);
  void on_epoch();
  void on_perturb();

  void reject(TaskState& ts, const std::string& outcome);
  bool advance(TaskState& ts);
  void finalize(TaskState& ts, double completed_at);
  void refresh_rates(TaskState& ts);
  void schedule_completion(TaskState& ts);
  void mutated();
  double draw_factor() { return params_.sigma == 0 ? 1.0 : std::exp2(params_.sigma * normal_(rng_)); }
  TaskRecord& record(const TaskState& ts) { return log_.tasks[index_of(ts)]; }
  std::size_t index_of(const TaskState& ts) const { return static_cast<std::size_t>(&ts - tasks_.data()); }

  Network net_;
  const Trace& trace_;
  MappingParams mapping_;
  EngineParams params_;
  SchedulerParams sched_;
  Rng rng_;
  boost::random::normal_distribution<double> normal_;  // ziggurat, one engine call per draw
  ClaimRegistry claims_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::vector<PartialMap> slots_;
  std::vector<std::size_t> free_slots_;
  std::vector<TaskState> tasks_;
  std::unordered_map<TaskId, std::size_t> index_by_id_;
  std::set<std::size_t> streaming_;
  std::size_t unfinished_ = 0;
  std::int64_t live_ = 0;  // commits minus releases
  double now_ = 0;
  double next_tick_ = std::numeric_limits<double>::infinity();
  RunLog log_;
  std::ostringstream plan_;
};

void Simulation::mutated() {
  const UtilSample s{now_, net_.mean_cpu_utilization(), net_.mean_link_utilization(),
                     net_.mean_uplink_utilization()};
  if (!log_.util.empty()) {
    UtilSample& last = log_.util.back();
    if (last.cpu == s.cpu && last.link == s.link && last.uplink == s.uplink) {
      // unchanged
    } else if (last.time == s.time) {
      last = s;
    } else {
      log_.util.push_back(s);
    }
  } else {
    log_.util.push_back(s);
  }
  if (!params_.audit) return;
  auto problems = claims_.audit(net_);
  std::int64_t holding = 0;
  for (const auto& ts : tasks_)
    if (ts.phase == Phase::kConfirming || ts.phase == Phase::kStreaming) ++holding;
  if (holding != live_) problems.push_back("live task count " + std::to_string(holding) + " != commits - releases");
  if (!problems.empty()) {
    ++log_.audit_failures;
    for (auto& p : problems)
      if (log_.audit_messages.size() < 10) log_.audit_messages.push_back(text::format_double(now_) + " " + p);
  }
}

void Simulation::on_arrival(TaskId t) {
  TaskState& ts = tasks_[static_cast<std::size_t>(t)];
  note("arrival", ts.spec->id, ts.spec->delivery);
  ts.ctx.emplace(*ts.spec, mapping_);
  ts.session.emplace(*ts.ctx, net_);
  ts.phase = Phase::kMapping;
  MapMessage m = ts.session->start();
  push_map(now_ + m.delay, std::move(m.map));
}

void Simulation::on_map(std::size_t slot) {
  PartialMap msg = std::move(slots_[slot]);
  free_slots_.push_back(slot);
  TaskState& ts = tasks_[index_by_id_.at(msg.task)];
  for (auto& out : ts.session->receive(msg, now_)) push_map(now_ + out.delay, std::move(out.map));
  record(ts).map_messages = ts.session->processed();
  if (!ts.session->quiescent()) return;
  // Settled messages are still on the wire until settle_time().
  if (ts.session->settle_time() > now_)
    push(ts.session->settle_time(), EventKind::kMapSettle, static_cast<TaskId>(index_of(ts)));
  else
    on_mapping_done(ts);
}

void Simulation::on_mapping_done(TaskState& ts) {
  auto feasible = ts.session->take_feasible();
  ts.session.reset();
  record(ts).feasible_maps = static_cast<int>(feasible.size());
  note("mapped", ts.spec->id, ts.spec->source, std::to_string(feasible.size()));
  if (feasible.empty()) {
    reject(ts, "no-feasible-map");
    return;
  }
  ts.ranking.emplace(std::move(feasible), mapping_.tie_threshold);
  next_probe(ts);
}

void Simulation::next_probe(TaskState& ts) {
  ts.probe.reset();
  if (ts.ranking->empty()) {
    reject(ts, "reservation-failed");
    return;
  }
  FeasibleMap fm = ts.ranking->pop();
  ts.probe = make_probe(fm.map, *ts.ctx, net_);
  ++record(ts).probes;
  ts.phase = Phase::kProbing;
  push(now_, EventKind::kProbe, static_cast<TaskId>(index_of(ts)));
}

void Simulation::reject(TaskState& ts, const std::string& outcome) {
  ts.ranking.reset();
  ts.probe.reset();
  ts.phase = Phase::kDone;
  --unfinished_;
  record(ts).outcome = outcome;
  note("reject", ts.spec->id, ts.spec->source, outcome);
}

void Simulation::on_probe(TaskState& ts) {
  ReservationProbe& probe = *ts.probe;
  const NodeId at = probe.stops[probe.position].node;
  const ReserveOutcome r = try_reserve(probe, net_, claims_);
  if (!r.reserved) {
    note("probe-reject", ts.spec->id, at, std::string(to_string(r.reason)));
    if (probe.position == 0) {
      next_probe(ts);
    } else {
      push(now_ + probe.stops[probe.position - 1].delay_to_next, EventKind::kRollback,
           static_cast<TaskId>(index_of(ts)));
    }
    return;
  }
  if (!probe.at_end()) {
    mutated();
    push(now_ + probe.stops[probe.position - 1].delay_to_next, EventKind::kProbe, static_cast<TaskId>(index_of(ts)));
    return;
  }
  double back = 0;
  for (const auto& stop : probe.stops) back += stop.delay_to_next;
  ts.active = commit(std::move(probe), *ts.ctx);
  ts.probe.reset();
  ts.ranking.reset();
  for (const auto& seg : ts.active->segments)
    if (seg.kind == LinkKind::kForwardingDedicated) claims_.retag(ts.spec->id, seg.segment, kMultiHopTagOffset + seg.segment);
  ++live_;
  ts.phase = Phase::kConfirming;
  note("commit", ts.spec->id, ts.spec->delivery);
  mutated();
  push(now_ + back, EventKind::kConfirm, static_cast<TaskId>(index_of(ts)));
}

void Simulation::on_rollback(TaskState& ts) {
  ReservationProbe& probe = *ts.probe;
  rollback_step(probe, net_, claims_);
  mutated();
  if (probe.position == 0) {
    note("rolled-back", ts.spec->id, ts.spec->source);
    next_probe(ts);
  } else {
    push(now_ + probe.stops[probe.position - 1].delay_to_next, EventKind::kRollback,
         static_cast<TaskId>(index_of(ts)));
  }
}

void Simulation::on_confirm(TaskState& ts) {
  ActiveTask& a = *ts.active;
  const TaskSpec& spec = *ts.spec;
  ts.phase = Phase::kStreaming;
  streaming_.insert(index_of(ts));
  ts.fluid = FluidState{spec.target_rate * kBytesPerMbps, spec.delivered_volume_bytes(), now_, 0, 1};
  ts.last_update = now_;
  ts.factor.assign(a.segments.size(), 1.0);
  ts.multi_hop_version.assign(a.segments.size(), 0);
  ts.window_start = now_;
  ts.window_bytes = 0;
  ts.window_index = 0;
  TaskRecord& rec = record(ts);
  rec.start = now_;
  for (const auto& seg : a.segments) {
    if (seg.kind == LinkKind::kPublic) {
      ++rec.public_segments;
      ts.factor[seg.segment] = draw_factor();
    } else if (seg.kind != LinkKind::kLocal) {
      ++rec.dedicated_segments;
    }
  }
  note("start", spec.id, spec.source);
  push(now_ + spec.window, EventKind::kWindow, static_cast<TaskId>(index_of(ts)), 1);
  refresh_rates(ts);
  schedule_completion(ts);
}

void Simulation::refresh_rates(TaskState& ts) {
  double phi = std::numeric_limits<double>::infinity();
  ts.has_public = false;
  for (const auto& seg : ts.active->segments) {
    if (seg.kind == LinkKind::kLocal) continue;
    double eff = seg.rate;
    if (seg.kind == LinkKind::kPublic) {
      ts.has_public = true;
      eff *= ts.factor[seg.segment];
    }
    if (eff < params_.rate_floor) eff = 0;
    phi = std::min(phi, eff / seg.target);
  }
  ts.fluid.phi = std::isfinite(phi) ? phi : 1.0;
}

void Simulation::schedule_completion(TaskState& ts) {
  ++ts.completion_version;
  const double left = time_to_complete(ts.fluid, now_);
  if (!std::isfinite(left)) return;
  const double at = now_ + left;
  // Public rates change at the next tick, which reschedules anyway.
  if (ts.has_public && at > next_tick_) return;
  push(at, EventKind::kComplete, static_cast<TaskId>(index_of(ts)), ts.completion_version);
}

bool Simulation::advance(TaskState& ts) {
  if (ts.phase != Phase::kStreaming) return false;
  const double dt = now_ - ts.last_update;
  if (dt > 0) {
    const double spent = advance_fluid(ts.fluid, ts.last_update, dt);
    if (ts.fluid.done()) {
      finalize(ts, ts.last_update + spent);
      return true;
    }
  }
  ts.last_update = now_;
  return false;
}

void Simulation::finalize(TaskState& ts, double completed_at) {
  TaskRecord& rec = record(ts);
  const double len = completed_at - ts.window_start;
  if (len > 1e-9 * ts.spec->window) {
    const double bytes = ts.fluid.delivered - ts.window_bytes;
    rec.deviation += window_increment(ts.spec->target_rate, bytes / len / kBytesPerMbps, params_.clamp_deviation);
    ++rec.windows;
    note_window(ts, bytes, len);
  }
  rec.completion = completed_at;
  rec.delivered_bytes = ts.fluid.delivered;
  rec.outcome = "completed";
  release(*ts.active, net_, claims_);
  --live_;
  ts.active.reset();
  ts.ctx.reset();
  ts.phase = Phase::kDone;
  streaming_.erase(index_of(ts));
  --unfinished_;
  note("complete", ts.spec->id, ts.spec->delivery);
  mutated();
}

void Simulation::on_window(TaskState& ts, std::int64_t index) {
  if (ts.phase != Phase::kStreaming || index != ts.window_index + 1) return;
  if (advance(ts)) return;
  TaskRecord& rec = record(ts);
  const double bytes = ts.fluid.delivered - ts.window_bytes;
  rec.deviation += window_increment(ts.spec->target_rate, bytes / ts.spec->window / kBytesPerMbps,
                                    params_.clamp_deviation);
  ++rec.windows;
  note_window(ts, bytes, ts.spec->window);
  ts.window_index = index;
  ts.window_start = now_;
  ts.window_bytes = ts.fluid.delivered;
  push(ts.fluid.start + static_cast<double>(index + 1) * ts.spec->window, EventKind::kWindow,
       static_cast<TaskId>(index_of(ts)), index + 1);
}

void Simulation::on_complete(TaskState& ts, std::int64_t version) {
  if (ts.phase != Phase::kStreaming || version != ts.completion_version) return;
  if (advance(ts)) return;
  // Rounding left a sliver; finish it here.
  if (ts.fluid.total_bytes - ts.fluid.delivered <= 1e-6 * ts.fluid.total_bytes) {
    ts.fluid.delivered = ts.fluid.total_bytes;
    finalize(ts, now_);
  } else {
    schedule_completion(ts);
  }
}

void Simulation::on_multi_hop_confirm(TaskState& ts, int segment, std::int64_t version) {
  if (ts.phase != Phase::kStreaming) return;
  SegmentAllocation& seg = ts.active->segments[segment];
  if (!seg.pending || ts.multi_hop_version[segment] != version) return;
  if (advance(ts)) return;
  claims_.release_tag(net_, ts.spec->id, segment);
  seg.kind = LinkKind::kForwardingDedicated;
  seg.rate = seg.pending_rate;
  seg.lanes.clear();
  for (LinkId l : seg.pending_path) seg.lanes.emplace_back(l, seg.pending_rate);
  seg.pending = false;
  seg.pending_path.clear();
  note("multi-hop-confirm", ts.spec->id, seg.upstream, std::to_string(segment));
  refresh_rates(ts);
  schedule_completion(ts);
  mutated();
}

void Simulation::on_epoch() {
  std::vector<std::size_t> live(streaming_.begin(), streaming_.end());
  for (std::size_t i : live) advance(tasks_[i]);
  struct Member {
    std::size_t task;
    int segment;
  };
  std::map<NodeId, std::vector<Member>> by_node;
  for (std::size_t i : streaming_)
    for (const auto& seg : tasks_[i].active->segments)
      if (seg.kind != LinkKind::kLocal) by_node[seg.upstream].push_back({i, seg.segment});

  for (auto& [u, members] : by_node) {
    std::vector<Flow> flows;
    flows.reserve(members.size());
    for (const auto& m : members) {
      TaskState& ts = tasks_[m.task];
      SegmentAllocation& seg = ts.active->segments[m.segment];
      const TaskId id = ts.spec->id;
      // Direct lanes and overlay bandwidth are re-planned from scratch.
      if (seg.kind == LinkKind::kDirectDedicated || seg.kind == LinkKind::kPublic) {
        claims_.release_tag(net_, id, seg.segment);
        seg.rate = 0;
      }
      Flow f;
      f.task = id;
      f.segment = seg.segment;
      f.upstream = seg.upstream;
      f.next = seg.downstream;
      f.target = seg.target;
      f.deficit_bytes = ts.fluid.deficit(now_) * seg.target / ts.spec->target_rate;
      f.budget_per_byte = seg.budget_per_byte;
      f.kind = seg.kind;
      f.max_hops = seg.link_limit;
      f.holds_path = seg.kind == LinkKind::kForwardingDedicated || seg.pending;
      flows.push_back(f);
    }
    const AllocationPlan plan = reschedule_node(u, now_, net_, flows, sched_);
    if (params_.plan_log) write_plan(plan_, plan);
    for (std::size_t k = 0; k < members.size(); ++k) {
      TaskState& ts = tasks_[members[k].task];
      SegmentAllocation& seg = ts.active->segments[members[k].segment];
      const FlowDecision& d = plan.decisions[k];
      const TaskId id = ts.spec->id;
      const int s = seg.segment;
      switch (d.kind) {
        case LinkKind::kDirectDedicated:
          for (const auto& [l, r] : d.lanes) claims_.claim(net_, id, s, ResourceRef::link(l), r);
          if (seg.kind == LinkKind::kForwardingDedicated || seg.pending) {
            claims_.release_tag(net_, id, kMultiHopTagOffset + s);
            seg.pending = false;
            seg.pending_path.clear();
            ++ts.multi_hop_version[s];
          }
          seg.kind = LinkKind::kDirectDedicated;
          seg.lanes = d.lanes;
          seg.rate = d.rate;
          break;
        case LinkKind::kForwardingDedicated:
          seg.rate = seg.target;
          break;
        default:
          if (d.rate > 0) claims_.claim(net_, id, s, ResourceRef::uplink(u), d.rate);
          seg.kind = LinkKind::kPublic;
          seg.lanes.clear();
          seg.rate = d.rate;
          if (!d.probe_path.empty()) {
            double rtt = 0;
            for (LinkId l : d.probe_path) {
              claims_.claim(net_, id, kMultiHopTagOffset + s, ResourceRef::link(l), seg.target);
              rtt += 2 * net_.link_delay_s(l);
            }
            seg.pending = true;
            seg.pending_path = d.probe_path;
            seg.pending_rate = seg.target;
            note("multi-hop-launch", id, u, std::to_string(s));
            push(now_ + rtt, EventKind::kMultiHopConfirm, static_cast<TaskId>(members[k].task), s,
                 ++ts.multi_hop_version[s]);
          }
          break;
      }
    }
  }
  for (std::size_t i : streaming_) {
    refresh_rates(tasks_[i]);
    schedule_completion(tasks_[i]);
  }
  mutated();
}

void Simulation::on_perturb() {
  // finalize() only erases the task being visited, so step past it first.
  for (auto it = streaming_.begin(); it != streaming_.end();) {
    TaskState& ts = tasks_[*it++];
    if (!ts.has_public) continue;
    if (advance(ts)) continue;
    for (const auto& seg : ts.active->segments)
      if (seg.kind == LinkKind::kPublic) ts.factor[seg.segment] = draw_factor();
    refresh_rates(ts);
    schedule_completion(ts);
  }
}

RunOutput Simulation::run() {
  log_.mode = std::string(to_string(params_.mode));
  log_.dynamic_scheduling = params_.dynamic_scheduling;
  log_.nodes = net_.node_count();
  log_.links = net_.link_count();
  log_.sparse = net_.node_count() > 0 && net_.link_count() + 1 < net_.node_count();
  if (params_.plan_log) write_plan_header(plan_);

  tasks_.resize(trace_.size());
  log_.tasks.resize(trace_.size());
  for (std::size_t i = 0; i < trace_.size(); ++i) {
    const auto& arrival = trace_[i];
    tasks_[i].spec = &arrival.spec;
    index_by_id_[arrival.spec.id] = i;
    TaskRecord& rec = log_.tasks[i];
    rec.id = arrival.spec.id;
    rec.arrival = arrival.time;
    rec.outcome = "pending";
    rec.target = arrival.spec.target_rate;
    rec.ideal = arrival.spec.ideal_duration();
    log_.horizon = std::max(log_.horizon, arrival.time);
    push(arrival.time, EventKind::kArrival, static_cast<TaskId>(i));
  }
  unfinished_ = trace_.size();
  mutated();
  const bool overlay = allows_public(params_.mode);
  if (!trace_.empty() && overlay) {
    next_tick_ = params_.perturb_interval;
    push(next_tick_, EventKind::kPerturb, -1, 1);
  }
  if (!trace_.empty() && params_.dynamic_scheduling) push(params_.epoch, EventKind::kEpoch, -1, 1);

  const double stop_at = log_.horizon + params_.drain_limit;
  while (!queue_.empty() && unfinished_ > 0) {
    const Event e = queue_.top();
    if (e.time > stop_at) break;
    queue_.pop();
    now_ = e.time;
    auto state = [&]() -> TaskState& { return tasks_[static_cast<std::size_t>(e.task)]; };
    switch (e.kind) {
      case EventKind::kArrival: on_arrival(e.task); break;
      case EventKind::kMap: on_map(static_cast<std::size_t>(e.a)); break;
      case EventKind::kMapSettle: on_mapping_done(state()); break;
      case EventKind::kProbe: on_probe(state()); break;
      case EventKind::kRollback: on_rollback(state()); break;
      case EventKind::kConfirm: on_confirm(state()); break;
      case EventKind::kComplete: on_complete(state(), e.a); break;
      case EventKind::kWindow: on_window(state(), e.a); break;
      case EventKind::kMultiHopConfirm: on_multi_hop_confirm(state(), static_cast<int>(e.a), e.b); break;
      case EventKind::kEpoch:
        on_epoch();
        push(static_cast<double>(e.a + 1) * params_.epoch, EventKind::kEpoch, -1, e.a + 1);
        break;
      case EventKind::kPerturb:
        next_tick_ = static_cast<double>(e.a + 1) * params_.perturb_interval;
        on_perturb();
        push(next_tick_, EventKind::kPerturb, -1, e.a + 1);
        break;
    }
  }
  log_.end_time = now_;
  for (std::size_t i : std::vector<std::size_t>(streaming_.begin(), streaming_.end())) {
    TaskState& ts = tasks_[i];
    advance(ts);
    if (ts.phase == Phase::kStreaming) {
      TaskRecord& rec = record(ts);
      rec.outcome = "incomplete";
      rec.delivered_bytes = ts.fluid.delivered;
    }
  }
  RunOutput out;
  out.log = std::move(log_);
  if (params_.plan_log) out.plan_csv = plan_.str();
  return out;
}

}  // namespace

RunOutput simulate(Network net, const Trace& trace, const MappingParams& mapping, const EngineParams& engine,
                   std::uint64_t perturb_seed) {
  if (engine.epoch <= 0 || engine.perturb_interval <= 0 || engine.sigma < 0 || engine.drain_limit < 0)
    throw Error(ErrorCode::kConfigInvalid, "engine timing parameters must be positive");
  net.reset_allocations();
  Simulation sim(std::move(net), trace, mapping, engine, perturb_seed);
  return sim.run();
}

}  // namespace bimodal
