#include "fieldlog/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <tuple>

#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"
#include "fieldlog/ingest.hpp"
#include "fieldlog/record_io.hpp"

namespace fieldlog::sim {

using geo::LocalFrame;
using geo::Vec2;
using nlohmann::json;

namespace {

Millis ms_from_s(double s) { return Millis{static_cast<std::int64_t>(std::llround(s * 1000.0))}; }

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

double dist(const Vec2& a, const Vec2& b) { return std::hypot(b.x - a.x, b.y - a.y); }

Vec2 lerp(const Vec2& a, const Vec2& b, double f) { return {a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f}; }

Vec2 unit(const Vec2& a, const Vec2& b) {
  const double d = dist(a, b);
  return {(b.x - a.x) / d, (b.y - a.y) / d};
}

double polyline_length(std::span<const Vec2> pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += dist(pts[i - 1], pts[i]);
  return total;
}

std::vector<Vec2> to_local(std::span<const GeoPoint> pts, const LocalFrame& frame) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(frame.to_local(p));
  return out;
}

// Boustrophedon in an arbitrary frame; throws field_not_rectangular.
std::vector<Vec2> boustrophedon_local(const FieldPolygon& field, double swath_m, const LocalFrame& frame) {
  if (!(swath_m > 0)) throw Error(ErrorCode::invalid_argument, "swath_m must be > 0");
  std::vector<GeoPoint> ring = field.ring;
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  if (ring.size() != 4) throw Error(ErrorCode::field_not_rectangular, field.id + ": needs 4 vertices");
  const auto v = to_local(ring, frame);
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2& prev = v[(i + 3) % 4];
    const Vec2& cur = v[i];
    const Vec2& next = v[(i + 1) % 4];
    const double ax = prev.x - cur.x, ay = prev.y - cur.y;
    const double bx = next.x - cur.x, by = next.y - cur.y;
    const double la = std::hypot(ax, ay), lb = std::hypot(bx, by);
    if (la == 0 || lb == 0 || std::abs(ax * bx + ay * by) > 1e-3 * la * lb) {
      throw Error(ErrorCode::field_not_rectangular, field.id + ": corners are not right angles");
    }
  }
  std::size_t longest = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (dist(v[i], v[(i + 1) % 4]) > dist(v[longest], v[(longest + 1) % 4]) + 1e-9) longest = i;
  }
  const Vec2 corner = v[longest];
  const Vec2 along{v[(longest + 1) % 4].x - corner.x, v[(longest + 1) % 4].y - corner.y};
  const Vec2 across_end = v[(longest + 3) % 4];
  const double width = dist(corner, across_end);
  const Vec2 across = unit(corner, across_end);

  const auto passes = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(width / swath_m - 1e-9)));
  std::vector<double> offsets;
  if (passes == 1) {
    offsets.push_back(width / 2.0);
  } else {
    for (std::size_t j = 0; j < passes; ++j) {
      offsets.push_back(std::min(swath_m / 2.0 + static_cast<double>(j) * swath_m, width - swath_m / 2.0));
    }
  }
  std::vector<Vec2> out;
  out.reserve(2 * passes);
  for (std::size_t j = 0; j < passes; ++j) {
    const Vec2 a{corner.x + across.x * offsets[j], corner.y + across.y * offsets[j]};
    const Vec2 b{a.x + along.x, a.y + along.y};
    if (j % 2 == 0) {
      out.push_back(a);
      out.push_back(b);
    } else {
      out.push_back(b);
      out.push_back(a);
    }
  }
  return out;
}

// One piece of a machine's motion: linear from a to b over [t0, t1).
struct Piece {
  Timestamp t0{};
  Timestamp t1{};
  Vec2 a;
  Vec2 b;
  double speed = 0.0;
  Phase phase = Phase::idle;
};

struct Outing {
  std::size_t entry = 0;
  std::string machine_id;
  std::vector<Piece> pieces;
  [[nodiscard]] Timestamp start() const { return pieces.front().t0; }
  [[nodiscard]] Timestamp end() const { return pieces.back().t1; }
};

// Appends pieces on a clock measured in seconds relative to `base`.
class OutingBuilder {
 public:
  OutingBuilder(Timestamp base, double rel, Vec2 pos) : base_(base), rel_(rel), pos_(pos) {}

  void move_to(const Vec2& p, double speed, Phase phase) {
    const double d = dist(pos_, p);
    if (d <= 0) return;
    add(p, d / speed, speed, phase);
  }

  void hold(double duration_s, Phase phase) {
    if (duration_s <= 0) return;
    add(pos_, duration_s, 0.0, phase);
  }

  [[nodiscard]] const Vec2& pos() const { return pos_; }
  [[nodiscard]] double rel() const { return rel_; }
  std::vector<Piece> take() { return std::move(pieces_); }

 private:
  void add(const Vec2& to, double duration_s, double speed, Phase phase) {
    const Timestamp t0 = base_ + ms_from_s(rel_);
    rel_ += duration_s;
    const Timestamp t1 = base_ + ms_from_s(rel_);
    if (t1 > t0) pieces_.push_back({t0, t1, pos_, to, speed, phase});
    pos_ = to;
  }

  Timestamp base_;
  double rel_;
  Vec2 pos_;
  std::vector<Piece> pieces_;
};

struct WorkEvent {
  double after_s = 0.0;
  bool disruption = false;
  double duration_s = 0.0;
  Vec2 exit;
};

class RssiSampler {
 public:
  explicit RssiSampler(std::uint64_t seed) : rng_(seed) {}

  std::optional<int> sample(double base_dbm, const RssiModel& model) {
    if (uniform_(rng_) < model.dropout) return std::nullopt;
    const double v = base_dbm + model.sigma_db * normal_(rng_);
    return std::clamp(static_cast<int>(std::lround(v)), kMinRssi, kMaxRssi);
  }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct MachineContext {
  const Machine* machine = nullptr;
  Vec2 home;
};

}  // namespace

Registry Scenario::registry() const { return Registry(machines, implements, fields, params); }

std::vector<GeoPoint> boustrophedon_waypoints(const FieldPolygon& field, double swath_m) {
  const LocalFrame frame(geo::centroid(field.ring));
  std::vector<GeoPoint> out;
  for (const auto& p : boustrophedon_local(field, swath_m, frame)) out.push_back(frame.to_geo(p));
  return out;
}

std::vector<Fix> boustrophedon_path(const FieldPolygon& field, double swath_m, double speed, double sample_s,
                                    Timestamp start, const std::string& machine_id) {
  if (!(speed > 0) || !(sample_s > 0)) throw Error(ErrorCode::invalid_argument, "speed and sample_s must be > 0");
  const LocalFrame frame(geo::centroid(field.ring));
  const auto pts = boustrophedon_local(field, swath_m, frame);
  const double total_s = polyline_length(pts) / speed;

  std::vector<Fix> out;
  std::size_t seg = 0;
  double seg_start_s = 0.0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * sample_s;
    if (t > total_s + 1e-9) break;
    while (seg + 2 < pts.size() && seg_start_s + dist(pts[seg], pts[seg + 1]) / speed < t) {
      seg_start_s += dist(pts[seg], pts[seg + 1]) / speed;
      ++seg;
    }
    const double seg_s = dist(pts[seg], pts[seg + 1]) / speed;
    const double f = seg_s > 0 ? std::clamp((t - seg_start_s) / seg_s, 0.0, 1.0) : 0.0;
    const Vec2 p = lerp(pts[seg], pts[seg + 1], f);
    Fix fix;
    fix.machine_id = machine_id;
    fix.t = start + ms_from_s(t);
    fix.pos = frame.to_geo(p);
    fix.speed = speed;
    out.push_back(std::move(fix));
  }
  return out;
}

std::vector<attachment::RssiSample> rssi_trace(bool attached, double duration_s, std::uint64_t seed,
                                               const RssiModel& model, Timestamp start) {
  RssiSampler sampler(seed);
  std::vector<attachment::RssiSample> out;
  const double base = attached ? model.attached_dbm : model.stray_dbm;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * model.cadence_s;
    if (t >= duration_s) break;
    if (auto v = sampler.sample(base, model)) out.push_back({start + ms_from_s(t), *v});
  }
  return out;
}

EmitResult emit_scenario(const Scenario& sc) {
  const Registry registry = sc.registry();
  const LocalFrame frame(sc.origin);
  const SimulationSettings& cfg = sc.settings;

  std::map<std::string, MachineContext> machines;
  for (const auto& m : registry.machines()) {
    const auto home = sc.homes.find(m.id);
    machines[m.id] = {&m, frame.to_local(home != sc.homes.end() ? home->second : sc.origin)};
  }

  EmitResult result;
  std::vector<Outing> outings;

  for (std::size_t idx = 0; idx < sc.schedule.size(); ++idx) {
    const ScheduleEntry& e = sc.schedule[idx];
    const auto mit = machines.find(e.machine_id);
    if (mit == machines.end()) throw Error(ErrorCode::unknown_reference, "schedule: unknown machine " + e.machine_id);
    const Machine& machine = *mit->second.machine;
    const FieldPolygon* field = e.field_id.empty() ? nullptr : registry.field(e.field_id);
    if (e.kind == EntryKind::work && field == nullptr) {
      throw Error(ErrorCode::unknown_reference, "schedule: unknown field " + e.field_id);
    }
    const Implement* implement = nullptr;
    if (e.implement_id) {
      implement = registry.implement(*e.implement_id);
      if (implement == nullptr) throw Error(ErrorCode::unknown_reference, "schedule: unknown implement " + *e.implement_id);
    }
    if (!(e.speed > 0)) throw Error(ErrorCode::invalid_argument, "schedule: speed must be > 0");

    // Work path (or the park spot) in scenario-frame meters.
    std::vector<Vec2> work;
    if (e.kind == EntryKind::work) {
      work = boustrophedon_local(*field, e.swath_m.value_or(sc.params.swath_m), frame);
    } else {
      work.push_back(frame.to_local(e.park_at));
    }

    // Approach: route_in, then a short stub lined up with the first pass.
    std::vector<Vec2> approach;
    approach.push_back(mit->second.home);
    for (const auto& p : e.route_in) approach.push_back(frame.to_local(p));
    if (!e.route_in.empty()) approach.erase(approach.begin());
    if (e.kind == EntryKind::work) {
      const Vec2 dir = unit(work[1], work[0]);
      approach.push_back({work[0].x + dir.x * 5.0, work[0].y + dir.y * 5.0});
    }
    approach.push_back(work[0]);

    const double approach_s = polyline_length(approach) / cfg.transit_speed;
    OutingBuilder b(e.start, -(cfg.warmup_s + approach_s), approach.front());
    b.hold(cfg.warmup_s, Phase::idle);
    for (std::size_t i = 1; i < approach.size(); ++i) b.move_to(approach[i], cfg.transit_speed, Phase::transit);

    TruthRecord truth;
    if (e.kind == EntryKind::work) {
      std::vector<WorkEvent> events;
      for (const auto& p : e.parks) events.push_back({p.after_s, false, p.duration_s, {}});
      for (const auto& d : e.disruptions) events.push_back({d.after_s, true, d.wait_s, frame.to_local(d.exit)});
      std::stable_sort(events.begin(), events.end(),
                       [](const WorkEvent& x, const WorkEvent& y) { return x.after_s < y.after_s; });

      double path_s = 0.0;
      std::size_t next_event = 0;
      auto run_event = [&](const WorkEvent& ev) {
        if (!ev.disruption) {
          b.hold(ev.duration_s, Phase::park);
          return;
        }
        const Vec2 resume = b.pos();
        b.move_to(ev.exit, cfg.transit_speed, Phase::disruption);
        b.hold(ev.duration_s, Phase::disruption);
        b.move_to(resume, cfg.transit_speed, Phase::disruption);
      };
      for (std::size_t i = 1; i < work.size(); ++i) {
        const double leg_s = dist(work[i - 1], work[i]) / e.speed;
        while (next_event < events.size() && events[next_event].after_s < path_s + leg_s) {
          const double into = std::max(0.0, events[next_event].after_s - path_s);
          const Vec2 split = lerp(work[i - 1], work[i], into / leg_s);
          b.move_to(split, e.speed, Phase::work);
          run_event(events[next_event++]);
        }
        b.move_to(work[i], e.speed, Phase::work);
        path_s += leg_s;
      }
      while (next_event < events.size()) run_event(events[next_event++]);

      truth.machine_id = machine.id;
      truth.field_id = field->id;
      truth.implement_id = implement != nullptr ? std::optional<std::string>(implement->id) : std::nullopt;
      truth.work_type = machine.cls == MachineClass::spv ? machine.spv_work_type.value_or(WorkType::unknown)
                                                         : (implement != nullptr ? implement->work_type : WorkType::unknown);
      truth.start = e.start;
      truth.end = e.start + ms_from_s(b.rel());
      truth.duration_s = path_s;
      truth.distance_m = polyline_length(work);
      result.truth.push_back(truth);

      b.hold(e.linger_s, Phase::linger);
    } else {
      b.hold(e.park_s, Phase::park);
    }

    // Leave: stub off the short edge, then route_out (default: route_in reversed).
    std::vector<Vec2> leave;
    if (e.kind == EntryKind::work) {
      const Vec2 dir = unit(work[work.size() - 2], work.back());
      leave.push_back({work.back().x + dir.x * 5.0, work.back().y + dir.y * 5.0});
    }
    if (!e.route_out.empty()) {
      for (const auto& p : e.route_out) leave.push_back(frame.to_local(p));
    } else if (!e.route_in.empty()) {
      for (auto it = e.route_in.rbegin(); it != e.route_in.rend(); ++it) leave.push_back(frame.to_local(*it));
    } else {
      leave.push_back(mit->second.home);
    }
    for (const auto& p : leave) b.move_to(p, cfg.transit_speed, Phase::transit);
    b.hold(cfg.cooldown_s, Phase::idle);

    outings.push_back({idx, machine.id, b.take()});
  }

  // One machine cannot be in two places at once.
  std::vector<const Outing*> order;
  for (const auto& o : outings) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(), [](const Outing* x, const Outing* y) {
    return std::tie(x->machine_id, x->pieces.front().t0) < std::tie(y->machine_id, y->pieces.front().t0);
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->machine_id == order[i - 1]->machine_id && order[i]->start() < order[i - 1]->end()) {
      throw Error(ErrorCode::schedule_overlap, "machine " + order[i]->machine_id + ": entry " +
                                                   std::to_string(order[i]->entry) + " starts before entry " +
                                                   std::to_string(order[i - 1]->entry) + " ends");
    }
  }

  // Transit time inside fields other than the outing's own field.
  for (const auto& o : outings) {
    const ScheduleEntry& e = sc.schedule[o.entry];
    std::map<std::string, double> inside;
    for (const auto& p : o.pieces) {
      if (p.phase != Phase::transit) continue;
      const double dur = seconds_between(p.t0, p.t1);
      const auto steps = static_cast<std::size_t>(std::ceil(dur / 0.1));
      for (std::size_t k = 0; k < steps; ++k) {
        const Vec2 pos = lerp(p.a, p.b, (static_cast<double>(k) + 0.5) / static_cast<double>(steps));
        const FieldPolygon* f = registry.field_at(frame.to_geo(pos));
        if (f != nullptr && f->id != e.field_id) inside[f->id] += dur / static_cast<double>(steps);
      }
    }
    for (const auto& [field_id, secs] : inside) result.crossings.push_back({o.machine_id, field_id, secs});
  }

  // Sample every outing at its machine's cadence.
  struct Emitted {
    GatewayReport report;
    SampleTag tag;
  };
  std::vector<Emitted> emitted;
  std::map<std::string, RssiSampler> samplers;
  std::stable_sort(outings.begin(), outings.end(), [](const Outing& x, const Outing& y) {
    return std::tie(x.machine_id, x.pieces.front().t0) < std::tie(y.machine_id, y.pieces.front().t0);
  });
  for (const auto& o : outings) {
    const ScheduleEntry& e = sc.schedule[o.entry];
    const Machine& machine = *machines.at(o.machine_id).machine;
    const bool mpv = machine.cls == MachineClass::mpv;
    const Millis cadence = ms_from_s(mpv ? cfg.mpv_cadence_s : cfg.spv_cadence_s);
    auto sampler_it = samplers.find(o.machine_id);
    if (sampler_it == samplers.end()) {
      sampler_it = samplers.emplace(o.machine_id, RssiSampler(sc.seed ^ fnv1a(o.machine_id))).first;
    }
    RssiSampler& sampler = sampler_it->second;

    const auto first_k = (o.start().time_since_epoch() + cadence - Millis{1}) / cadence;
    std::size_t piece = 0;
    for (Timestamp t = Timestamp{first_k * cadence}; t <= o.end(); t += cadence) {
      while (piece + 1 < o.pieces.size() && o.pieces[piece].t1 <= t) ++piece;
      const Piece& p = o.pieces[piece];
      const double span = std::chrono::duration<double>(p.t1 - p.t0).count();
      const double f = span > 0 ? std::clamp(std::chrono::duration<double>(t - p.t0).count() / span, 0.0, 1.0) : 0.0;
      const Vec2 pos = lerp(p.a, p.b, f);

      GatewayReport r;
      r.fix.machine_id = o.machine_id;
      r.fix.t = t;
      r.fix.pos = frame.to_geo(pos);
      r.fix.speed = p.speed;
      if (p.speed > 0) {
        double hdg = std::atan2(p.b.x - p.a.x, p.b.y - p.a.y) * 180.0 / std::numbers::pi;
        if (hdg < 0) hdg += 360.0;
        r.fix.heading = std::round(hdg * 10.0) / 10.0;
        if (r.fix.heading >= 360.0) r.fix.heading = 0.0;
      }
      r.fix.hdop = cfg.hdop;
      if (mpv) {
        if (e.implement_id) {
          const Implement* imp = registry.implement(*e.implement_id);
          if (auto v = sampler.sample(cfg.rssi.attached_dbm, cfg.rssi)) r.observations.push_back({imp->beacon_uid, *v});
        }
        for (const auto& s : sc.strays) {
          if (s.machine_id != o.machine_id || t < s.from || t > s.to) continue;
          const Implement* imp = registry.implement(s.implement_id);
          if (imp == nullptr) throw Error(ErrorCode::unknown_reference, "stray: unknown implement " + s.implement_id);
          if (std::any_of(r.observations.begin(), r.observations.end(),
                          [&](const BleObservation& ob) { return ob.beacon_uid == imp->beacon_uid; })) {
            continue;
          }
          if (auto v = sampler.sample(cfg.rssi.stray_dbm, cfg.rssi)) r.observations.push_back({imp->beacon_uid, *v});
        }
      }
      emitted.push_back({std::move(r), {p.phase, o.entry}});
    }
  }

  std::stable_sort(emitted.begin(), emitted.end(), [](const Emitted& x, const Emitted& y) {
    return std::tie(x.report.fix.t, x.report.fix.machine_id) < std::tie(y.report.fix.t, y.report.fix.machine_id);
  });
  result.lines.reserve(emitted.size());
  for (auto& em : emitted) {
    result.lines.push_back(ingest::serialize_gateway_report(em.report));
    result.reports.push_back(std::move(em.report));
    result.tags.push_back(em.tag);
  }
  std::stable_sort(result.truth.begin(), result.truth.end(), [](const TruthRecord& x, const TruthRecord& y) {
    return std::tie(x.start, x.machine_id) < std::tie(y.start, y.machine_id);
  });
  return result;
}

// --- JSON ----------------------------------------------------------------------

namespace {

GeoPoint point_from_json(const json& j, std::string_view ctx) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::schema_violation, std::string(ctx) + ": expected [lon, lat]");
  }
  return {j[1].get<double>(), j[0].get<double>()};
}

json point_to_json(const GeoPoint& p) { return json::array({p.lon, p.lat}); }

std::vector<GeoPoint> points_from_json(const json& j, const char* key, std::string_view ctx) {
  std::vector<GeoPoint> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) throw Error(ErrorCode::schema_violation, std::string(ctx) + ": '" + key + "' must be an array");
  for (const auto& p : j.at(key)) out.push_back(point_from_json(p, ctx));
  return out;
}

Timestamp time_from_json(const json& j, const char* key, std::string_view ctx) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw Error(ErrorCode::schema_violation, std::string(ctx) + ": missing '" + key + "'");
  }
  const auto t = parse_rfc3339(j.at(key).get<std::string>());
  if (!t) throw Error(ErrorCode::schema_violation, std::string(ctx) + ": bad timestamp '" + key + "'");
  return *t;
}

double number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_number()) throw Error(ErrorCode::schema_violation, std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::string string_or(const json& j, const char* key, std::string fallback = {}) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_string()) throw Error(ErrorCode::schema_violation, std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::schema_violation, "scenario must be a JSON object");
  const Registry reg = load_registry(doc);

  Scenario sc;
  sc.machines = reg.machines();
  sc.implements = reg.implements();
  sc.fields = reg.fields();
  sc.params = reg.params();
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) throw Error(ErrorCode::schema_violation, "'seed' must be unsigned");
    sc.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("origin")) {
    sc.origin = point_from_json(doc.at("origin"), "origin");
  } else if (!sc.fields.empty()) {
    sc.origin = sc.fields.front().ring.front();
  }
  if (doc.contains("machines")) {
    for (const auto& m : doc.at("machines")) {
      if (m.contains("home")) sc.homes[m.at("id").get<std::string>()] = point_from_json(m.at("home"), "machine home");
    }
  }
  if (doc.contains("simulation")) {
    const json& s = doc.at("simulation");
    auto& c = sc.settings;
    c.transit_speed = number_or(s, "transit_speed", c.transit_speed);
    c.spv_cadence_s = number_or(s, "spv_cadence_s", c.spv_cadence_s);
    c.mpv_cadence_s = number_or(s, "mpv_cadence_s", c.mpv_cadence_s);
    c.warmup_s = number_or(s, "warmup_s", c.warmup_s);
    c.cooldown_s = number_or(s, "cooldown_s", c.cooldown_s);
    c.hdop = number_or(s, "hdop", c.hdop);
    if (s.contains("rssi")) {
      const json& r = s.at("rssi");
      c.rssi.attached_dbm = number_or(r, "attached", c.rssi.attached_dbm);
      c.rssi.stray_dbm = number_or(r, "stray", c.rssi.stray_dbm);
      c.rssi.sigma_db = number_or(r, "sigma", c.rssi.sigma_db);
      c.rssi.dropout = number_or(r, "dropout", c.rssi.dropout);
    }
    c.rssi.cadence_s = c.mpv_cadence_s;
    if (!(c.transit_speed > 0) || !(c.spv_cadence_s > 0) || !(c.mpv_cadence_s > 0)) {
      throw Error(ErrorCode::schema_violation, "simulation speeds and cadences must be > 0");
    }
  }
  if (doc.contains("schedule")) {
    for (const auto& j : doc.at("schedule")) {
      ScheduleEntry e;
      const std::string kind = string_or(j, "kind", "work");
      if (kind == "park") e.kind = EntryKind::park;
      else if (kind != "work") throw Error(ErrorCode::schema_violation, "schedule: kind must be work or park");
      e.machine_id = string_or(j, "machine");
      e.field_id = string_or(j, "field");
      if (const auto imp = string_or(j, "implement"); !imp.empty()) e.implement_id = imp;
      e.start = time_from_json(j, "start", "schedule");
      e.speed = number_or(j, "speed", e.speed);
      if (j.contains("swath_m")) e.swath_m = number_or(j, "swath_m", sc.params.swath_m);
      if (j.contains("parks")) {
        for (const auto& p : j.at("parks")) e.parks.push_back({number_or(p, "after_s", 0), number_or(p, "duration_s", 0)});
      }
      if (j.contains("disruptions")) {
        for (const auto& d : j.at("disruptions")) {
          e.disruptions.push_back(
              {number_or(d, "after_s", 0), point_from_json(d.at("exit"), "disruption exit"), number_or(d, "wait_s", 0)});
        }
      }
      e.route_in = points_from_json(j, "route_in", "schedule");
      e.route_out = points_from_json(j, "route_out", "schedule");
      e.linger_s = number_or(j, "linger_s", 0.0);
      if (e.kind == EntryKind::park) {
        e.park_at = point_from_json(j.at("at"), "park at");
        e.park_s = number_or(j, "duration_s", 0.0);
      }
      sc.schedule.push_back(std::move(e));
    }
  }
  if (doc.contains("strays")) {
    for (const auto& j : doc.at("strays")) {
      sc.strays.push_back({string_or(j, "machine"), string_or(j, "implement"), time_from_json(j, "from", "stray"),
                           time_from_json(j, "to", "stray")});
    }
  }
  return sc;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  const std::string text = io::read_file(path.string());
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::schema_violation, path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

json to_json(const Scenario& sc) {
  json doc = fieldlog::to_json(sc.registry());
  for (auto& m : doc["machines"]) {
    const auto it = sc.homes.find(m["id"].get<std::string>());
    if (it != sc.homes.end()) m["home"] = point_to_json(it->second);
  }
  doc["seed"] = sc.seed;
  doc["origin"] = point_to_json(sc.origin);
  const auto& c = sc.settings;
  doc["simulation"] = {
      {"transit_speed", c.transit_speed},
      {"spv_cadence_s", c.spv_cadence_s},
      {"mpv_cadence_s", c.mpv_cadence_s},
      {"warmup_s", c.warmup_s},
      {"cooldown_s", c.cooldown_s},
      {"hdop", c.hdop},
      {"rssi",
       {{"attached", c.rssi.attached_dbm}, {"stray", c.rssi.stray_dbm}, {"sigma", c.rssi.sigma_db}, {"dropout", c.rssi.dropout}}},
  };
  json schedule = json::array();
  for (const auto& e : sc.schedule) {
    json j = {{"kind", e.kind == EntryKind::work ? "work" : "park"},
              {"machine", e.machine_id},
              {"start", format_rfc3339(e.start)}};
    if (!e.field_id.empty()) j["field"] = e.field_id;
    if (e.implement_id) j["implement"] = *e.implement_id;
    if (e.kind == EntryKind::work) {
      j["speed"] = e.speed;
      if (e.swath_m) j["swath_m"] = *e.swath_m;
    } else {
      j["at"] = point_to_json(e.park_at);
      j["duration_s"] = e.park_s;
    }
    if (!e.parks.empty()) {
      j["parks"] = json::array();
      for (const auto& p : e.parks) j["parks"].push_back({{"after_s", p.after_s}, {"duration_s", p.duration_s}});
    }
    if (!e.disruptions.empty()) {
      j["disruptions"] = json::array();
      for (const auto& d : e.disruptions) {
        j["disruptions"].push_back({{"after_s", d.after_s}, {"exit", point_to_json(d.exit)}, {"wait_s", d.wait_s}});
      }
    }
    auto points = [](const std::vector<GeoPoint>& pts) {
      json a = json::array();
      for (const auto& p : pts) a.push_back(point_to_json(p));
      return a;
    };
    if (!e.route_in.empty()) j["route_in"] = points(e.route_in);
    if (!e.route_out.empty()) j["route_out"] = points(e.route_out);
    if (e.linger_s > 0) j["linger_s"] = e.linger_s;
    schedule.push_back(std::move(j));
  }
  doc["schedule"] = schedule;
  json strays = json::array();
  for (const auto& s : sc.strays) {
    strays.push_back({{"machine", s.machine_id},
                      {"implement", s.implement_id},
                      {"from", format_rfc3339(s.from)},
                      {"to", format_rfc3339(s.to)}});
  }
  doc["strays"] = strays;
  return doc;
}

std::string truth_to_csv(std::span<const TruthRecord> truth) {
  std::vector<std::string> header(std::begin(io::kRecordColumns), std::end(io::kRecordColumns));
  std::string out = io::csv_line(header);
  for (const auto& t : truth) {
    char dur[64], distance[64];
    std::snprintf(dur, sizeof dur, "%.3f", t.duration_s);
    std::snprintf(distance, sizeof distance, "%.2f", t.distance_m);
    const std::vector<std::string> cells = {t.machine_id + "@" + format_rfc3339(t.start),
                                            t.machine_id,
                                            t.field_id,
                                            std::string(to_string(t.work_type)),
                                            t.implement_id.value_or(""),
                                            format_rfc3339(t.start),
                                            format_rfc3339(t.end),
                                            dur,
                                            distance,
                                            ""};
    out += io::csv_line(cells);
  }
  return out;
}

TruthComparison compare_to_truth(std::span<const WorkRecord> records, std::span<const TruthRecord> truth,
                                 double tolerance_s) {
  TruthComparison cmp;
  std::vector<bool> used(records.size(), false);
  for (const auto& t : truth) {
    std::optional<std::size_t> best;
    double best_err = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (used[i] || r.machine_id != t.machine_id || r.field_id != t.field_id || r.work_type != t.work_type) continue;
      const double ds = std::abs(seconds_between(t.start, r.start));
      const double de = std::abs(seconds_between(t.end, r.end));
      if (ds > tolerance_s || de > tolerance_s) continue;
      if (!best || ds + de < best_err) {
        best = i;
        best_err = ds + de;
      }
    }
    if (best) {
      used[*best] = true;
      ++cmp.matched;
    } else {
      cmp.problems.push_back("no record for truth " + t.machine_id + " " + t.field_id + " " +
                             std::string(to_string(t.work_type)) + " " + format_rfc3339(t.start) + ".." +
                             format_rfc3339(t.end));
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!used[i]) {
      const auto& r = records[i];
      cmp.problems.push_back("unexpected record " + r.id + " " + r.field_id + " " + std::string(to_string(r.work_type)) +
                             " .." + format_rfc3339(r.end));
    }
  }
  cmp.ok = cmp.problems.empty();
  return cmp;
}

// --- presets ---------------------------------------------------------------

namespace {

constexpr GeoPoint kPresetOrigin{34.9500, 136.8900};

struct PresetBuilder {
  LocalFrame frame{kPresetOrigin};
  Scenario sc;

  explicit PresetBuilder(std::uint64_t seed) {
    sc.seed = seed;
    sc.origin = kPresetOrigin;
  }

  GeoPoint at(double x, double y) const { return frame.to_geo({x, y}); }

  std::vector<GeoPoint> path(std::initializer_list<std::pair<double, double>> pts) const {
    std::vector<GeoPoint> out;
    for (const auto& [x, y] : pts) out.push_back(at(x, y));
    return out;
  }

  void field(const std::string& id, const std::string& name, double x0, double y0, double x1, double y1) {
    // Counter-clockwise from the south-west corner; the first edge is the long one.
    sc.fields.push_back({id, name, {at(x0, y0), at(x1, y0), at(x1, y1), at(x0, y1)}, 0.0});
  }

  void machine(const std::string& id, const std::string& name, MachineClass cls, std::optional<WorkType> w,
               double hx, double hy) {
    sc.machines.push_back({id, name, cls, w});
    sc.homes[id] = at(hx, hy);
  }

  static Timestamp time(const char* s) { return *parse_rfc3339(s); }
};

// Shared layout: three stacked paddies west of a lane, two east of it.
//   F1 [0,100]x[0,50], F2 [0,100]x[50,100], F3 [0,100]x[100,150]
//   F4 [130,250]x[0,50], F5 [130,250]x[70,130]
// Roads: x = -10 (west), y = -15 (south), x = 115 (lane).
void standard_layout(PresetBuilder& pb) {
  pb.field("F1", "paddy-01", 0, 0, 100, 50);
  pb.field("F2", "paddy-02", 0, 50, 100, 100);
  pb.field("F3", "paddy-03", 0, 100, 100, 150);
  pb.field("F4", "paddy-04", 130, 0, 250, 50);
  pb.field("F5", "paddy-05", 130, 70, 250, 130);

  struct Imp {
    const char* id;
    const char* name;
    WorkType type;
  };
  const Imp imps[] = {
      {"rt-01", "rotary tiller 1", WorkType::rotary_tilling}, {"rt-02", "rotary tiller 2", WorkType::rotary_tilling},
      {"rt-03", "rotary tiller 3", WorkType::rotary_tilling}, {"rt-04", "rotary tiller 4", WorkType::rotary_tilling},
      {"hr-01", "harrow 1", WorkType::harrowing},             {"hr-02", "harrow 2", WorkType::harrowing},
      {"hr-03", "harrow 3", WorkType::harrowing},             {"pw-01", "plow 1", WorkType::plowing},
      {"pw-02", "plow 2", WorkType::plowing},                 {"pw-03", "plow 3", WorkType::plowing},
      {"sd-01", "seeder 1", WorkType::seeding},               {"sd-02", "seeder 2", WorkType::seeding},
      {"sd-03", "seeder 3", WorkType::seeding},               {"gc-01", "grass cutter 1", WorkType::grass_cutting},
      {"gc-02", "grass cutter 2", WorkType::grass_cutting},   {"gc-03", "grass cutter 3", WorkType::grass_cutting},
      {"gc-04", "grass cutter 4", WorkType::grass_cutting},
  };
  int n = 1;
  for (const auto& i : imps) {
    char uid[8];
    std::snprintf(uid, sizeof uid, "B-%02d", n++);
    pb.sc.implements.push_back({i.id, i.name, uid, i.type});
  }
}

// Route from a yard near (-40, y) to the entry side of a field.
std::vector<GeoPoint> route_west(const PresetBuilder& pb, double home_y, double entry_y) {
  return pb.path({{-40, home_y}, {-10, -15}, {-10, entry_y}});
}

std::vector<GeoPoint> route_east(const PresetBuilder& pb, double home_y, double entry_y) {
  return pb.path({{-40, home_y}, {-10, -15}, {115, -15}, {115, entry_y}});
}

ScheduleEntry work(const std::string& machine, const std::string& field, std::optional<std::string> implement,
                   const char* start, double speed, std::vector<GeoPoint> route) {
  ScheduleEntry e;
  e.machine_id = machine;
  e.field_id = field;
  e.implement_id = std::move(implement);
  e.start = PresetBuilder::time(start);
  e.speed = speed;
  e.route_in = std::move(route);
  return e;
}

}  // namespace

Scenario acceptance_scenario(std::uint64_t seed) {
  PresetBuilder pb(seed);
  standard_layout(pb);
  pb.machine("pl-01", "rice transplanter", MachineClass::spv, WorkType::planting, -40, -30);
  pb.machine("tr-01", "tractor 1", MachineClass::mpv, std::nullopt, -40, -36);
  pb.machine("tr-02", "tractor 2", MachineClass::mpv, std::nullopt, -40, -42);
  auto& s = pb.sc.schedule;

  // tr-01
  {
    auto e = work("tr-01", "F1", "rt-01", "2024-04-01T00:30:00Z", 1.2, route_west(pb, -36, 2.5));
    e.parks.push_back({400, 300});
    s.push_back(e);
  }
  {
    auto e = work("tr-01", "F2", "rt-01", "2024-04-01T02:00:00Z", 1.2, route_west(pb, -36, 52.5));
    e.disruptions.push_back({500, pb.at(-10, 75), 240});
    s.push_back(e);
  }
  {
    // Cuts across the west edge of F2 on the way to F3.
    auto e = work("tr-01", "F3", "hr-01", "2024-04-01T04:00:00Z", 1.5,
                  pb.path({{-40, -36}, {-10, -15}, {-10, 60}, {6, 75}, {-10, 90}, {-10, 102.5}}));
    e.route_out = pb.path({{-10, 102.5}, {-10, -15}, {-40, -36}});
    s.push_back(e);
  }
  {
    auto e = work("tr-01", "F4", "pw-01", "2024-04-02T00:30:00Z", 1.0, route_east(pb, -36, 2.5));
    e.linger_s = 1200;
    s.push_back(e);
  }
  // tr-02
  {
    // Clips the north-west corner of F4 on the way to F5.
    auto e = work("tr-02", "F5", "pw-02", "2024-04-01T00:30:00Z", 1.0,
                  pb.path({{-40, -42}, {-10, -15}, {115, -15}, {115, 30}, {134, 48}, {115, 60}, {115, 72.5}}));
    e.route_out = pb.path({{115, 72.5}, {115, -15}, {-10, -15}, {-40, -42}});
    s.push_back(e);
  }
  {
    auto e = work("tr-02", "F4", "sd-01", "2024-04-01T02:30:00Z", 1.3, route_east(pb, -42, 2.5));
    e.parks.push_back({300, 200});
    e.disruptions.push_back({600, pb.at(115, 25), 180});
    s.push_back(e);
  }
  s.push_back(work("tr-02", "F1", "gc-02", "2024-04-02T01:00:00Z", 1.5, route_west(pb, -42, 2.5)));
  {
    auto e = work("tr-02", "F2", "hr-02", "2024-04-02T03:00:00Z", 1.4, route_west(pb, -42, 52.5));
    e.parks.push_back({200, 400});
    s.push_back(e);
  }
  // pl-01
  s.push_back(work("pl-01", "F3", std::nullopt, "2024-04-02T05:00:00Z", 1.0, route_west(pb, -30, 102.5)));
  {
    auto e = work("pl-01", "F1", std::nullopt, "2024-04-03T00:30:00Z", 1.0, route_west(pb, -30, 2.5));
    e.parks.push_back({600, 600});
    s.push_back(e);
  }
  s.push_back(work("pl-01", "F2", std::nullopt, "2024-04-03T02:00:00Z", 1.0, route_west(pb, -30, 52.5)));
  {
    auto e = work("pl-01", "F5", std::nullopt, "2024-04-03T04:00:00Z", 1.0, route_east(pb, -30, 72.5));
    e.disruptions.push_back({400, pb.at(115, 100), 300});
    s.push_back(e);
  }

  // Implements parked near the tractors' routes and fields.
  auto stray = [&](const char* machine, const char* implement, const char* from, const char* to) {
    pb.sc.strays.push_back({machine, implement, PresetBuilder::time(from), PresetBuilder::time(to)});
  };
  stray("tr-01", "gc-01", "2024-04-01T00:00:00Z", "2024-04-01T06:00:00Z");
  stray("tr-01", "sd-02", "2024-04-01T00:00:00Z", "2024-04-01T06:00:00Z");
  stray("tr-01", "pw-02", "2024-04-02T00:00:00Z", "2024-04-02T02:00:00Z");
  stray("tr-02", "rt-02", "2024-04-01T00:00:00Z", "2024-04-01T06:00:00Z");
  stray("tr-02", "hr-03", "2024-04-01T00:00:00Z", "2024-04-01T06:00:00Z");
  stray("tr-02", "pw-03", "2024-04-02T00:00:00Z", "2024-04-02T06:00:00Z");
  return pb.sc;
}

std::string_view to_string(Correction c) noexcept {
  switch (c) {
    case Correction::parked_machinery: return "parked_machinery";
    case Correction::disrupted_work: return "disrupted_work";
    case Correction::field_transitions: return "field_transitions";
    case Correction::stray_implements: return "stray_implements";
  }
  return "parked_machinery";
}

Scenario correction_scenario(Correction which, std::uint64_t seed) {
  PresetBuilder pb(seed);
  standard_layout(pb);
  pb.machine("pl-01", "rice transplanter", MachineClass::spv, WorkType::planting, -40, -30);
  pb.machine("tr-01", "tractor 1", MachineClass::mpv, std::nullopt, -40, -36);
  pb.machine("tr-02", "tractor 2", MachineClass::mpv, std::nullopt, -40, -42);
  auto& s = pb.sc.schedule;

  switch (which) {
    case Correction::parked_machinery: {
      s.push_back(work("pl-01", "F1", std::nullopt, "2024-04-01T00:30:00Z", 1.2, route_west(pb, -30, 2.5)));
      // Parked in F2 for an hour without working it.
      ScheduleEntry park;
      park.kind = EntryKind::park;
      park.machine_id = "pl-01";
      park.start = PresetBuilder::time("2024-04-01T02:00:00Z");
      park.route_in = pb.path({{-40, -30}, {-10, -15}, {-10, 75}});
      park.park_at = pb.at(50, 75);
      park.park_s = 3600;
      s.push_back(park);
      break;
    }
    case Correction::disrupted_work: {
      auto e = work("tr-01", "F1", "rt-01", "2024-04-01T00:30:00Z", 1.2, route_west(pb, -36, 2.5));
      e.disruptions.push_back({400, pb.at(-10, 25), 420});
      s.push_back(e);
      break;
    }
    case Correction::field_transitions: {
      s.push_back(work("pl-01", "F1", std::nullopt, "2024-04-01T00:30:00Z", 1.2, route_west(pb, -30, 2.5)));
      // Drives straight through F2 to reach F3.
      auto e = work("pl-01", "F3", std::nullopt, "2024-04-01T02:00:00Z", 1.2,
                    pb.path({{-40, -30}, {-10, -15}, {-10, 55}, {95, 60}, {5, 95}, {-10, 102.5}}));
      e.route_out = pb.path({{-10, 102.5}, {-10, -15}, {-40, -30}});
      s.push_back(e);
      break;
    }
    case Correction::stray_implements: {
      s.push_back(work("tr-02", "F4", "sd-01", "2024-04-01T00:30:00Z", 1.3, route_east(pb, -42, 2.5)));
      // A harrow parked beside F4 while the seeder is hitched.
      pb.sc.strays.push_back({"tr-02", "hr-03", PresetBuilder::time("2024-04-01T00:20:00Z"),
                              PresetBuilder::time("2024-04-01T01:00:00Z")});
      // Levelling F5 with an untagged blade while a plow sits at the field edge.
      s.push_back(work("tr-02", "F5", std::nullopt, "2024-04-01T02:30:00Z", 1.3, route_east(pb, -42, 72.5)));
      pb.sc.strays.push_back({"tr-02", "pw-03", PresetBuilder::time("2024-04-01T02:20:00Z"),
                              PresetBuilder::time("2024-04-01T03:30:00Z")});
      break;
    }
  }
  return pb.sc;
}

Scenario single_field_scenario(std::uint64_t seed) {
  PresetBuilder pb(seed);
  pb.field("F1", "paddy-01", 0, 0, 100, 50);
  pb.machine("pl-01", "rice transplanter", MachineClass::spv, WorkType::planting, -40, -30);
  pb.sc.schedule.push_back(
      work("pl-01", "F1", std::nullopt, "2024-04-01T00:30:00Z", 1.5, pb.path({{-40, -30}, {-10, -15}, {-10, 2.5}})));
  return pb.sc;
}

}  // namespace fieldlog::sim
