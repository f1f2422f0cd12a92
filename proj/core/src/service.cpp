#include "fieldlog/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "fieldlog/attachment.hpp"
#include "fieldlog/error.hpp"
#include "fieldlog/event_log.hpp"
#include "fieldlog/geo.hpp"
#include "fieldlog/ingest.hpp"

namespace fieldlog::service {

Timestamp system_now() { return std::chrono::floor<Millis>(std::chrono::system_clock::now()); }

struct Service::Impl {
  Registry registry;
  Options options;
  EventLog log;

  mutable std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap = std::make_shared<Snapshot>();
  std::mutex recompute_mu;

  // debounce
  std::mutex pending_mu;
  std::condition_variable pending_cv;
  std::set<std::string> dirty;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  bool worker_busy = false;
  bool stopping = false;
  std::thread worker;

  Impl(Registry r, Options o) : registry(std::move(r)), options(std::move(o)), log(options.data_dir) {}

  std::shared_ptr<const Snapshot> current() const {
    std::lock_guard lock(snap_mu);
    return snap;
  }

  Snapshot::MachineState compute(const Machine& machine) const {
    auto reports = log.reports(machine.id);
    std::vector<Fix> fixes;
    fixes.reserve(reports.size());
    for (const auto& r : reports) fixes.push_back(r.fix);
    std::stable_sort(fixes.begin(), fixes.end(), [](const Fix& a, const Fix& b) { return a.t < b.t; });

    auto result = segmentation::process_machine(machine, std::move(reports), registry);
    Snapshot::MachineState state;
    state.records = std::move(result.records);
    state.attachments = std::move(result.attachments);
    state.fixes = ingest::validate_stream(fixes);
    state.stats = result.stats[machine.id];
    return state;
  }

  std::uint64_t recompute(const std::vector<std::string>& machine_ids) {
    std::lock_guard guard(recompute_mu);
    auto next = std::make_shared<Snapshot>(*current());
    for (const auto& id : machine_ids) {
      const Machine* m = registry.machine(id);
      if (m == nullptr) continue;
      auto state = compute(*m);
      if (state.stats.reports == 0) {
        next->machines.erase(id);
      } else {
        next->machines[id] = std::move(state);
      }
    }
    next->records.clear();
    for (const auto& [id, state] : next->machines) {
      next->records.insert(next->records.end(), state.records.begin(), state.records.end());
    }
    segmentation::sort_records(next->records);
    ++next->revision;

    std::lock_guard lock(snap_mu);
    snap = std::move(next);
    return snap->revision;
  }

  std::vector<std::string> all_machines() const {
    std::vector<std::string> ids;
    for (const auto& m : registry.machines()) ids.push_back(m.id);
    return ids;
  }

  void schedule(const std::set<std::string>& machines) {
    if (!options.debounce || machines.empty()) return;
    {
      std::lock_guard lock(pending_mu);
      dirty.insert(machines.begin(), machines.end());
      deadline = std::chrono::steady_clock::now() + *options.debounce;
    }
    pending_cv.notify_all();
  }

  // Runs the pending recompute on the calling thread; pending_mu is held on
  // entry and on exit.
  void run_pending(std::unique_lock<std::mutex>& lock) {
    std::vector<std::string> ids(dirty.begin(), dirty.end());
    dirty.clear();
    deadline.reset();
    worker_busy = true;
    lock.unlock();
    try {
      recompute(ids);
    } catch (...) {
      // The log stays authoritative; the next recompute retries.
    }
    lock.lock();
    worker_busy = false;
    pending_cv.notify_all();
  }

  void loop() {
    std::unique_lock lock(pending_mu);
    while (!stopping) {
      if (!deadline) {
        pending_cv.wait(lock, [&] { return stopping || deadline.has_value(); });
        continue;
      }
      const auto until = *deadline;
      pending_cv.wait_until(lock, until, [&] { return stopping || !deadline || *deadline != until; });
      if (stopping) break;
      if (deadline && *deadline == until && std::chrono::steady_clock::now() >= until) run_pending(lock);
    }
  }
};

Service::Service(Registry registry, Options options)
    : impl_(std::make_unique<Impl>(std::move(registry), std::move(options))) {
  impl_->log.load();
  impl_->recompute(impl_->all_machines());
  if (impl_->options.debounce) impl_->worker = std::thread([this] { impl_->loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(impl_->pending_mu);
    impl_->stopping = true;
  }
  impl_->pending_cv.notify_all();
  if (impl_->worker.joinable()) impl_->worker.join();
}

IngestResult Service::ingest(std::string_view body) {
  if (body.size() > kMaxBodyBytes) {
    throw Error(ErrorCode::payload_too_large,
                "body is " + std::to_string(body.size()) + " bytes, limit " + std::to_string(kMaxBodyBytes));
  }
  IngestResult result;
  auto batch = parse_batch(body, impl_->registry);
  result.rejected = batch.rejects.size();
  result.reasons = std::move(batch.rejects);
  std::map<std::string, std::vector<GatewayReport>> by_machine;
  for (auto& r : batch.reports) by_machine[r.fix.machine_id].push_back(std::move(r));

  std::set<std::string> touched;
  for (const auto& [machine, reports] : by_machine) {
    const auto appended = impl_->log.append(machine, reports);
    result.accepted += appended.appended;
    result.duplicates += appended.duplicates;
    if (appended.appended > 0) touched.insert(machine);
  }
  impl_->schedule(touched);
  return result;
}

std::uint64_t Service::recompute(const std::optional<std::string>& machine_id) {
  if (!machine_id) return impl_->recompute(impl_->all_machines());
  if (impl_->registry.machine(*machine_id) == nullptr) {
    throw Error(ErrorCode::not_found, "machine '" + *machine_id + "' is not registered");
  }
  return impl_->recompute({*machine_id});
}

std::vector<WorkRecord> Service::query_records(const RecordQuery& q) const {
  if (q.machine_id && impl_->registry.machine(*q.machine_id) == nullptr) {
    throw Error(ErrorCode::invalid_argument, "unknown machine '" + *q.machine_id + "'");
  }
  if (q.field_id && impl_->registry.field(*q.field_id) == nullptr) {
    throw Error(ErrorCode::invalid_argument, "unknown field '" + *q.field_id + "'");
  }
  const auto snap = impl_->current();
  std::vector<WorkRecord> out;
  for (const auto& r : snap->records) {
    if (q.machine_id && r.machine_id != *q.machine_id) continue;
    if (q.field_id && r.field_id != *q.field_id) continue;
    if (q.work_type && r.work_type != *q.work_type) continue;
    if (q.from && r.end <= *q.from) continue;
    if (q.to && r.start >= *q.to) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<LivePosition> Service::live_positions() const {
  const auto snap = impl_->current();
  const Timestamp now = impl_->options.clock();
  std::vector<LivePosition> out;
  for (const auto& id : impl_->log.machines()) {
    const auto reports = impl_->log.reports(id);
    if (reports.empty()) continue;
    const auto last = std::max_element(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
      return a.fix.t < b.fix.t;
    });
    LivePosition p;
    p.machine_id = id;
    p.fix = last->fix;
    if (const FieldPolygon* f = impl_->registry.field_at(p.fix.pos)) p.field_id = f->id;
    if (const auto it = snap->machines.find(id); it != snap->machines.end()) {
      p.implement_id = attachment::attachment_at(it->second.attachments, p.fix.t);
    }
    p.staleness_s = std::max(0.0, seconds_between(p.fix.t, now));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<segmentation::TransitLeg> Service::transit(const std::optional<std::string>& machine_id) const {
  if (machine_id && impl_->registry.machine(*machine_id) == nullptr) {
    throw Error(ErrorCode::invalid_argument, "unknown machine '" + *machine_id + "'");
  }
  const auto snap = impl_->current();
  std::vector<segmentation::TransitLeg> out;
  for (const auto& [id, state] : snap->machines) {
    if (machine_id && id != *machine_id) continue;
    auto legs = segmentation::transit_report(state.records, state.fixes);
    out.insert(out.end(), std::make_move_iterator(legs.begin()), std::make_move_iterator(legs.end()));
  }
  return out;
}

nlohmann::json Service::boundaries(const std::optional<std::string>& field_id) const {
  if (field_id && impl_->registry.field(*field_id) == nullptr) {
    throw Error(ErrorCode::invalid_argument, "unknown field '" + *field_id + "'");
  }
  const auto snap = impl_->current();
  nlohmann::json features = nlohmann::json::array();
  for (const auto& field : impl_->registry.fields()) {
    if (field_id && field.id != *field_id) continue;
    std::vector<Fix> fixes;
    for (const auto& r : snap->records) {
      if (r.field_id == field.id) fixes.insert(fixes.end(), r.trajectory.begin(), r.trajectory.end());
    }
    try {
      const auto estimate = geo::digitize_boundary(fixes, impl_->registry.params().swath_m, &field);
      features.push_back(geo::to_geojson(estimate, field.id));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::too_few_fixes) throw;
    }
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

segmentation::Summary Service::summary() const {
  return segmentation::summarize(impl_->current()->records, impl_->registry);
}

std::shared_ptr<const Snapshot> Service::snapshot() const { return impl_->current(); }

std::uint64_t Service::revision() const { return impl_->current()->revision; }

const Registry& Service::registry() const noexcept { return impl_->registry; }

std::size_t Service::logged_reports() const { return impl_->log.size(); }

void Service::flush() {
  std::unique_lock lock(impl_->pending_mu);
  if (impl_->deadline) impl_->run_pending(lock);
  impl_->pending_cv.wait(lock, [&] { return !impl_->worker_busy; });
}

ParsedBatch parse_batch(std::string_view body, const Registry& registry) {
  ParsedBatch out;
  std::size_t line_no = 0;
  while (!body.empty()) {
    const auto nl = body.find('\n');
    std::string_view line = body.substr(0, nl);
    body.remove_prefix(nl == std::string_view::npos ? body.size() : nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      auto report = ingest::parse_gateway_report(line);
      if (registry.machine(report.fix.machine_id) == nullptr) {
        throw Error(ErrorCode::unknown_machine, report.fix.machine_id);
      }
      out.reports.push_back(std::move(report));
    } catch (const Error& e) {
      out.rejects.push_back({line_no, std::string(to_string(e.code()))});
    }
  }
  return out;
}

std::vector<GatewayReport> dedup_first_wins(std::vector<GatewayReport> reports) {
  std::set<std::pair<std::string, std::int64_t>> seen;
  std::vector<GatewayReport> out;
  out.reserve(reports.size());
  for (auto& r : reports) {
    if (seen.emplace(r.fix.machine_id, to_unix_ms(r.fix.t)).second) out.push_back(std::move(r));
  }
  return out;
}

RecordQuery parse_record_query(const std::map<std::string, std::string>& params) {
  RecordQuery q;
  auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = params.find(key);
    if (it == params.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  q.machine_id = get("machine");
  q.field_id = get("field");
  if (const auto wt = get("work_type")) {
    q.work_type = parse_work_type(*wt);
    if (!q.work_type) throw Error(ErrorCode::invalid_argument, "unknown work_type '" + *wt + "'");
  }
  for (const auto* key : {"from", "to"}) {
    if (const auto v = get(key)) {
      const auto t = parse_rfc3339(*v);
      if (!t) throw Error(ErrorCode::invalid_argument, std::string("bad timestamp for '") + key + "'");
      (std::string_view(key) == "from" ? q.from : q.to) = t;
    }
  }
  return q;
}

nlohmann::json to_json(const IngestResult& r) {
  nlohmann::json reasons = nlohmann::json::array();
  for (const auto& x : r.reasons) reasons.push_back({{"line", x.line}, {"reason", x.reason}});
  return {{"accepted", r.accepted}, {"rejected", r.rejected}, {"duplicates", r.duplicates}, {"reasons", reasons}};
}

nlohmann::json to_json(const LivePosition& p, const Registry& registry) {
  auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::json(*s) : nlohmann::json(nullptr); };
  nlohmann::json j = {
      {"machine", p.machine_id},
      {"t", format_rfc3339(p.fix.t)},
      {"lat", p.fix.pos.lat},
      {"lon", p.fix.pos.lon},
      {"field", opt(p.field_id)},
      {"implement", opt(p.implement_id)},
      {"staleness_s", p.staleness_s},
  };
  if (p.fix.speed) j["spd"] = *p.fix.speed;
  if (p.fix.heading) j["hdg"] = *p.fix.heading;
  if (const Machine* m = registry.machine(p.machine_id)) {
    j["machine_class"] = to_string(m->cls);
    if (!m->name.empty()) j["machine_name"] = m->name;
  }
  return j;
}

}  // namespace fieldlog::service
