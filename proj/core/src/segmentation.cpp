#include "fieldlog/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "fieldlog/attachment.hpp"
#include "fieldlog/geo.hpp"

namespace fieldlog::segmentation {
namespace {

Millis to_millis(double seconds) { return Millis{static_cast<std::int64_t>(std::llround(seconds * 1000.0))}; }

double implied_speed(std::span<const Fix> fixes, std::size_t i) {
  const std::size_t lo = i > 0 ? i - 1 : i;
  const std::size_t hi = i + 1 < fixes.size() ? i + 1 : i;
  if (lo == hi) return 0.0;
  const double dt = seconds_between(fixes[lo].t, fixes[hi].t);
  if (dt <= 0) return 0.0;
  double dist = 0.0;
  for (std::size_t k = lo; k < hi; ++k) dist += geo::haversine_m(fixes[k].pos, fixes[k + 1].pos);
  return dist / dt;
}

Segment make_segment(std::string machine_id, std::string field_id, std::vector<AnnotatedFix> fixes,
                     RecordFlags flags = {}) {
  Segment s;
  s.machine_id = std::move(machine_id);
  s.field_id = std::move(field_id);
  s.fixes = std::move(fixes);
  s.start = s.fixes.front().fix.t;
  s.end = s.fixes.back().fix.t;
  s.active = s.end - s.start;
  s.flags = flags;
  return s;
}

bool same_implement(const std::optional<std::string>& a, const std::optional<std::string>& b) { return a == b; }

}  // namespace

std::vector<AnnotatedFix> annotate(std::span<const Fix> fixes, const Registry& registry,
                                   std::span<const AttachmentInterval> attachments, const Params& params) {
  std::vector<AnnotatedFix> out;
  out.reserve(fixes.size());
  for (std::size_t i = 0; i < fixes.size(); ++i) {
    AnnotatedFix a;
    a.fix = fixes[i];
    if (const auto* f = registry.field_at(fixes[i].pos)) a.field_id = f->id;
    a.implement_id = attachment::attachment_at(attachments, fixes[i].t);
    const double speed = fixes[i].speed ? *fixes[i].speed : implied_speed(fixes, i);
    a.moving = speed >= params.v_park;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<StopInterval> detect_stops(std::span<const AnnotatedFix> annotated, const Params& params) {
  std::vector<StopInterval> stops;
  const Millis min_duration = to_millis(params.t_park);
  std::size_t i = 0;
  while (i < annotated.size()) {
    if (annotated[i].moving) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < annotated.size() && !annotated[j + 1].moving) ++j;
    const Timestamp start = annotated[i].fix.t;
    const Timestamp end = annotated[j].fix.t;
    if (end - start >= min_duration) stops.push_back({start, end});
    i = j + 1;
  }
  return stops;
}

std::vector<Segment> split_by_field(std::span<const AnnotatedFix> annotated) {
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < annotated.size()) {
    if (!annotated[i].field_id) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < annotated.size() && annotated[j + 1].field_id == annotated[i].field_id) ++j;
    std::vector<AnnotatedFix> run(annotated.begin() + static_cast<std::ptrdiff_t>(i),
                                  annotated.begin() + static_cast<std::ptrdiff_t>(j + 1));
    out.push_back(make_segment(annotated[i].fix.machine_id, *annotated[i].field_id, std::move(run)));
    i = j + 1;
  }
  return out;
}

std::vector<Segment> subtract_stops(std::vector<Segment> segments, std::span<const StopInterval> stops,
                                    const Params& params, std::vector<Segment>* dropped) {
  const Millis min_duration = to_millis(params.t_min_segment);
  std::vector<Segment> out;
  for (auto& seg : segments) {
    auto in_stop = [&](Timestamp t) {
      return std::any_of(stops.begin(), stops.end(), [t](const StopInterval& s) { return s.start <= t && t <= s.end; });
    };
    const bool touched = std::any_of(seg.fixes.begin(), seg.fixes.end(),
                                     [&](const AnnotatedFix& a) { return in_stop(a.fix.t); });
    if (!touched) {
      out.push_back(std::move(seg));
      continue;
    }
    RecordFlags flags = seg.flags;
    flags.had_stop = true;
    std::vector<AnnotatedFix> piece;
    auto flush = [&] {
      if (piece.empty()) return;
      Segment s = make_segment(seg.machine_id, seg.field_id, std::move(piece), flags);
      piece.clear();
      if (s.end - s.start >= min_duration) {
        out.push_back(std::move(s));
      } else if (dropped != nullptr) {
        dropped->push_back(std::move(s));
      }
    };
    for (auto& a : seg.fixes) {
      if (in_stop(a.fix.t)) {
        flush();
      } else {
        piece.push_back(std::move(a));
      }
    }
    flush();
  }
  return out;
}

std::vector<Segment> filter_transitions(std::vector<Segment> segments, const Params& params,
                                        std::vector<Segment>* dropped) {
  const Millis min_duration = to_millis(params.t_min_segment);
  std::vector<Segment> kept;
  for (auto& s : segments) {
    if (s.end - s.start < min_duration || s.fixes.size() < params.min_fixes) {
      if (dropped != nullptr) dropped->push_back(std::move(s));
    } else {
      kept.push_back(std::move(s));
    }
  }
  return kept;
}

std::optional<std::string> majority_implement(std::span<const AnnotatedFix> fixes) {
  std::map<std::string, std::size_t> counts;
  for (const auto& a : fixes) {
    if (a.implement_id) ++counts[*a.implement_id];
  }
  // std::map iterates in key order, so ties resolve to the smallest id.
  const std::pair<const std::string, std::size_t>* best = nullptr;
  for (const auto& kv : counts) {
    if (best == nullptr || kv.second > best->second) best = &kv;
  }
  if (best == nullptr || 2 * best->second < fixes.size()) return std::nullopt;
  return best->first;
}

std::vector<Segment> merge_disruptions(std::vector<Segment> segments, const Params& params,
                                       std::span<const Segment> bridges) {
  const Millis max_gap = to_millis(params.t_gap_merge);

  // Walk kept segments and bridges together in time order.
  struct Item {
    Segment* kept;
    const Segment* bridge;
    Timestamp start;
  };
  std::vector<Item> items;
  for (auto& s : segments) items.push_back({&s, nullptr, s.start});
  for (const auto& b : bridges) items.push_back({nullptr, &b, b.start});
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.start < b.start; });

  std::vector<Segment> out;
  std::optional<std::string> last_implement;
  Timestamp reach{};  // end of the last piece chained to out.back()
  auto continues = [&](const Segment& s, const std::optional<std::string>& implement) {
    if (out.empty()) return false;
    const Segment& prev = out.back();
    return prev.machine_id == s.machine_id && prev.field_id == s.field_id && same_implement(last_implement, implement) &&
           s.start - reach < max_gap && utc_day(reach) == utc_day(s.start);
  };

  for (const auto& item : items) {
    if (item.bridge != nullptr) {
      if (continues(*item.bridge, majority_implement(item.bridge->fixes))) reach = std::max(reach, item.bridge->end);
      continue;
    }
    Segment& seg = *item.kept;
    auto implement = majority_implement(seg.fixes);
    if (continues(seg, implement)) {
      Segment& prev = out.back();
      prev.fixes.insert(prev.fixes.end(), std::make_move_iterator(seg.fixes.begin()),
                        std::make_move_iterator(seg.fixes.end()));
      prev.end = seg.end;
      prev.active += seg.active;
      prev.flags |= seg.flags;
      prev.flags.merged = true;
      last_implement = majority_implement(prev.fixes);
      reach = seg.end;
      continue;
    }
    reach = seg.end;
    out.push_back(std::move(seg));
    last_implement = std::move(implement);
  }
  return out;
}

std::vector<WorkRecord> build_work_records(const Machine& machine, std::span<const Segment> segments,
                                           const Registry& registry) {
  std::vector<WorkRecord> out;
  for (const auto& seg : segments) {
    if (seg.fixes.size() < 2 || !(seg.start < seg.end)) continue;
    WorkRecord r;
    r.machine_id = machine.id;
    r.field_id = seg.field_id;
    r.start = seg.start;
    r.end = seg.end;
    r.id = machine.id + "@" + format_rfc3339(seg.start);
    r.fix_count = seg.fixes.size();
    r.active = seg.active;
    r.flags = seg.flags;
    r.trajectory.reserve(seg.fixes.size());
    for (const auto& a : seg.fixes) r.trajectory.push_back(a.fix);
    r.distance_m = geo::trajectory_length_m(r.trajectory);

    if (machine.cls == MachineClass::spv) {
      r.work_type = machine.spv_work_type.value_or(WorkType::unknown);
    } else {
      const auto implement = majority_implement(seg.fixes);
      const Implement* imp = implement ? registry.implement(*implement) : nullptr;
      if (imp != nullptr) {
        r.work_type = imp->work_type;
        r.implement_id = imp->id;
      } else {
        r.work_type = WorkType::unknown;
        r.flags.worktype_unknown = true;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void sort_records(std::vector<WorkRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const WorkRecord& a, const WorkRecord& b) {
    return std::tie(a.start, a.machine_id, a.id) < std::tie(b.start, b.machine_id, b.id);
  });
}

PipelineResult process_machine(const Machine& machine, std::vector<GatewayReport> reports, const Registry& registry,
                               const Corrections& corrections) {
  PipelineResult result;
  MachineStats& stats = result.stats[machine.id];
  stats.reports = reports.size();

  // Order by time; identical instants resolve on the canonical encoding so the
  // outcome never depends on arrival order.
  std::sort(reports.begin(), reports.end(), [](const GatewayReport& a, const GatewayReport& b) {
    if (a.fix.t != b.fix.t) return a.fix.t < b.fix.t;
    return ingest::serialize_gateway_report(a) < ingest::serialize_gateway_report(b);
  });
  const auto dup_begin = std::unique(reports.begin(), reports.end(),
                                     [](const GatewayReport& a, const GatewayReport& b) { return a.fix.t == b.fix.t; });
  stats.duplicates = static_cast<std::size_t>(reports.end() - dup_begin);
  reports.erase(dup_begin, reports.end());

  ingest::StreamValidator validator;
  std::vector<Fix> fixes;
  std::vector<GatewayReport> kept;
  for (auto& r : reports) {
    if (!validator.accept(r.fix)) continue;
    fixes.push_back(r.fix);
    kept.push_back(std::move(r));
  }
  stats.drops = validator.drops();
  if (fixes.empty()) return result;

  const Params& params = registry.params();
  std::vector<AttachmentInterval> attachments;
  if (machine.cls == MachineClass::mpv) {
    auto timelines = attachment::build_timelines(machine.id, kept, registry);
    stats.unknown_beacon = timelines.unknown_beacon;
    auto thresholds = attachment::Thresholds::from(params);
    if (!corrections.stray_implements) {
      // Every sighting counts as attached.
      thresholds.attach = kMinRssi;
      thresholds.detach = kMinRssi - 1;
    }
    attachments = attachment::infer_attachments(timelines.timelines, registry, thresholds, fixes.back().t);
  }

  const auto annotated = annotate(fixes, registry, attachments, params);
  auto segments = split_by_field(annotated);
  std::vector<Segment> bridges;
  if (corrections.parked_machinery) {
    const auto stops = detect_stops(annotated, params);
    stats.stops = stops.size();
    segments = subtract_stops(std::move(segments), stops, params, &bridges);
  }
  if (corrections.field_transitions) segments = filter_transitions(std::move(segments), params, &bridges);
  if (corrections.disrupted_work) segments = merge_disruptions(std::move(segments), params, bridges);

  result.records = build_work_records(machine, segments, registry);
  result.attachments = std::move(attachments);
  return result;
}

PipelineResult run_pipeline(const Registry& registry, std::span<const GatewayReport> reports,
                            const Corrections& corrections) {
  std::map<std::string, std::vector<GatewayReport>> by_machine;
  PipelineResult result;
  for (const auto& r : reports) {
    if (registry.machine(r.fix.machine_id) == nullptr) {
      ++result.unknown_machine;
      continue;
    }
    by_machine[r.fix.machine_id].push_back(r);
  }
  for (auto& [id, list] : by_machine) {
    auto part = process_machine(*registry.machine(id), std::move(list), registry, corrections);
    result.records.insert(result.records.end(), std::make_move_iterator(part.records.begin()),
                          std::make_move_iterator(part.records.end()));
    result.attachments.insert(result.attachments.end(), part.attachments.begin(), part.attachments.end());
    result.stats.merge(part.stats);
  }
  sort_records(result.records);
  return result;
}

Summary summarize(std::span<const WorkRecord> records, const Registry& registry) {
  Summary s;
  s.per_class["SPV"] = 0;
  s.per_class["MPV"] = 0;
  for (const auto& r : records) {
    const Machine* m = registry.machine(r.machine_id);
    ++s.per_class[m != nullptr ? std::string(to_string(m->cls)) : std::string("unknown")];
    ++s.per_work_type[std::string(to_string(r.work_type))];
    ++s.per_field[r.field_id];
  }
  for (const auto& [cls, n] : s.per_class) s.total += n;
  return s;
}

std::vector<TransitLeg> transit_report(std::span<const WorkRecord> records, std::span<const Fix> fixes) {
  std::vector<TransitLeg> legs;
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const WorkRecord& from = records[i];
    const WorkRecord& to = records[i + 1];
    if (utc_day(from.end) != utc_day(to.start) || from.trajectory.empty() || to.trajectory.empty()) continue;

    TransitLeg leg;
    leg.machine_id = from.machine_id;
    leg.from_record_id = from.id;
    leg.to_record_id = to.id;
    leg.duration_s = std::max(0.0, seconds_between(from.end, to.start));
    leg.straight_line_m = geo::haversine_m(from.trajectory.back().pos, to.trajectory.front().pos);

    auto by_time = [](const Fix& f, Timestamp t) { return f.t < t; };
    const auto lo = std::lower_bound(fixes.begin(), fixes.end(), from.end, by_time);
    auto hi = std::lower_bound(fixes.begin(), fixes.end(), to.start, by_time);
    if (hi != fixes.end() && hi->t == to.start) ++hi;
    leg.path_m = lo < hi ? geo::trajectory_length_m(std::span<const Fix>(lo, hi)) : 0.0;
    legs.push_back(std::move(leg));
  }
  return legs;
}

std::string_view to_string(DiscrepancyKind k) noexcept {
  switch (k) {
    case DiscrepancyKind::date_mismatch: return "date_mismatch";
    case DiscrepancyKind::missing_manual: return "missing_manual";
    case DiscrepancyKind::missing_auto: return "missing_auto";
  }
  return "date_mismatch";
}

DiscrepancyReport compare_records(std::span<const WorkRecord> auto_records, std::span<const ManualEntry> manual) {
  using Key = std::pair<std::string, WorkType>;
  std::map<Key, std::pair<std::set<std::chrono::sys_days>, std::set<std::chrono::sys_days>>> keyed;
  for (const auto& r : auto_records) keyed[{r.field_id, r.work_type}].first.insert(utc_day(r.start));
  for (const auto& m : manual) keyed[{m.field_id, m.work_type}].second.insert(m.date);

  DiscrepancyReport report;
  for (const auto& [key, dates] : keyed) {
    std::vector<std::chrono::sys_days> autos;
    std::vector<std::chrono::sys_days> manuals;
    std::set_difference(dates.first.begin(), dates.first.end(), dates.second.begin(), dates.second.end(),
                        std::back_inserter(autos));
    std::set_difference(dates.second.begin(), dates.second.end(), dates.first.begin(), dates.first.end(),
                        std::back_inserter(manuals));
    const std::size_t paired = std::min(autos.size(), manuals.size());
    for (std::size_t i = 0; i < paired; ++i) {
      report.entries.push_back({key.first, key.second, DiscrepancyKind::date_mismatch, autos[i], manuals[i]});
    }
    for (std::size_t i = paired; i < autos.size(); ++i) {
      report.entries.push_back({key.first, key.second, DiscrepancyKind::missing_manual, autos[i], std::nullopt});
    }
    for (std::size_t i = paired; i < manuals.size(); ++i) {
      report.entries.push_back({key.first, key.second, DiscrepancyKind::missing_auto, std::nullopt, manuals[i]});
    }
  }
  return report;
}

}  // namespace fieldlog::segmentation
