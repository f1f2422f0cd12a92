#include "fieldlog/model.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"
#include "fieldlog/geo.hpp"

namespace fieldlog {

using nlohmann::json;

bool is_valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 &&
         p.lon <= 180.0;
}

std::string_view to_string(WorkType w) noexcept {
  switch (w) {
    case WorkType::planting: return "planting";
    case WorkType::harvesting: return "harvesting";
    case WorkType::spraying: return "spraying";
    case WorkType::grass_cutting: return "grass_cutting";
    case WorkType::harrowing: return "harrowing";
    case WorkType::seeding: return "seeding";
    case WorkType::plowing: return "plowing";
    case WorkType::rotary_tilling: return "rotary_tilling";
    case WorkType::unknown: return "unknown";
  }
  return "unknown";
}

std::optional<WorkType> parse_work_type(std::string_view s) noexcept {
  for (WorkType w : kAllWorkTypes) {
    if (to_string(w) == s) return w;
  }
  return std::nullopt;
}

std::string_view to_string(MachineClass c) noexcept { return c == MachineClass::spv ? "SPV" : "MPV"; }

std::optional<MachineClass> parse_machine_class(std::string_view s) noexcept {
  if (s == "SPV") return MachineClass::spv;
  if (s == "MPV") return MachineClass::mpv;
  return std::nullopt;
}

std::string to_string(const RecordFlags& f) {
  std::string out;
  auto add = [&out](bool on, std::string_view name) {
    if (!on) return;
    if (!out.empty()) out += ';';
    out += name;
  };
  add(f.merged, "merged");
  add(f.had_stop, "had_stop");
  add(f.worktype_unknown, "worktype_unknown");
  return out;
}

RecordFlags parse_record_flags(std::string_view s) {
  RecordFlags f;
  while (!s.empty()) {
    const auto pos = s.find(';');
    const auto tok = s.substr(0, pos);
    if (tok == "merged") f.merged = true;
    else if (tok == "had_stop") f.had_stop = true;
    else if (tok == "worktype_unknown") f.worktype_unknown = true;
    else if (!tok.empty()) throw Error(ErrorCode::schema_violation, "unknown record flag '" + std::string(tok) + "'");
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return f;
}

void validate(const Params& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::invalid_params, what); };
  if (!(p.v_park >= 0)) fail("v_park must be >= 0");
  if (!(p.t_park > 0)) fail("t_park must be > 0");
  if (!(p.t_min_segment >= 0)) fail("t_min_segment must be >= 0");
  if (!(p.t_gap_merge > 0)) fail("t_gap_merge must be > 0");
  if (!(p.t_min_segment < p.t_gap_merge)) fail("t_min_segment must be < t_gap_merge");
  if (!(p.rssi_detach < p.rssi_attach)) fail("rssi_detach must be < rssi_attach");
  if (!(p.w_on > 0) || !(p.w_off > 0)) fail("w_on and w_off must be > 0");
  if (!(p.swath_m > 0)) fail("swath_m must be > 0");
}

namespace {

void validate_field(FieldPolygon& f) {
  auto fail = [&f](const std::string& what) { throw Error(ErrorCode::invalid_polygon, "field '" + f.id + "': " + what); };
  if (f.ring.size() >= 2 && f.ring.front() == f.ring.back()) f.ring.pop_back();
  if (f.ring.size() < 3) fail("ring needs at least 3 vertices");
  double min_lon = 180.0, max_lon = -180.0;
  for (std::size_t i = 0; i < f.ring.size(); ++i) {
    const auto& p = f.ring[i];
    if (!is_valid(p)) fail("vertex out of range");
    if (std::abs(p.lat) > 85.0) fail("polar fields are unsupported");
    if (p == f.ring[(i + 1) % f.ring.size()]) fail("consecutive vertices must be distinct");
    min_lon = std::min(min_lon, p.lon);
    max_lon = std::max(max_lon, p.lon);
  }
  if (max_lon - min_lon > 180.0) fail("fields crossing the antimeridian are unsupported");
  if (geo::ring_self_intersects(f.ring)) fail("ring self-intersects");
  f.area_ha = geo::area_m2(f.ring) / 10'000.0;
  if (!(f.area_ha > 0)) fail("zero area");
}

template <class T>
std::map<std::string, std::size_t, std::less<>> index_by_id(const std::vector<T>& items, std::string_view kind) {
  std::map<std::string, std::size_t, std::less<>> idx;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id.empty()) throw Error(ErrorCode::schema_violation, std::string(kind) + " with empty id");
    if (!idx.emplace(items[i].id, i).second) {
      throw Error(ErrorCode::duplicate_id, std::string(kind) + " '" + items[i].id + "'");
    }
  }
  return idx;
}

}  // namespace

Registry::Registry(std::vector<Machine> machines, std::vector<Implement> implements, std::vector<FieldPolygon> fields,
                   Params params)
    : machines_(std::move(machines)),
      implements_(std::move(implements)),
      fields_(std::move(fields)),
      params_(params) {
  validate(params_);
  machine_index_ = index_by_id(machines_, "machine");
  implement_index_ = index_by_id(implements_, "implement");
  field_index_ = index_by_id(fields_, "field");

  for (const auto& m : machines_) {
    if (m.cls == MachineClass::spv && !m.spv_work_type) {
      throw Error(ErrorCode::missing_work_type, "SPV '" + m.id + "' has no work_type");
    }
    if (m.cls == MachineClass::mpv && m.spv_work_type) {
      throw Error(ErrorCode::schema_violation, "MPV '" + m.id + "' must not carry a fixed work_type");
    }
  }
  for (std::size_t i = 0; i < implements_.size(); ++i) {
    const auto& imp = implements_[i];
    if (imp.beacon_uid.empty()) throw Error(ErrorCode::schema_violation, "implement '" + imp.id + "' has no beacon_uid");
    if (!beacon_index_.emplace(imp.beacon_uid, i).second) {
      throw Error(ErrorCode::duplicate_beacon, "beacon '" + imp.beacon_uid + "' bound to more than one implement");
    }
  }
  for (auto& f : fields_) validate_field(f);
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    for (std::size_t j = i + 1; j < fields_.size(); ++j) {
      if (geo::rings_overlap(fields_[i].ring, fields_[j].ring)) {
        throw Error(ErrorCode::overlapping_fields, "'" + fields_[i].id + "' overlaps '" + fields_[j].id + "'");
      }
    }
  }
}

namespace {

template <class T>
const T* lookup(const std::vector<T>& items, const std::map<std::string, std::size_t, std::less<>>& idx,
                std::string_view key) {
  const auto it = idx.find(key);
  return it == idx.end() ? nullptr : &items[it->second];
}

}  // namespace

const Machine* Registry::machine(std::string_view id) const { return lookup(machines_, machine_index_, id); }
const Implement* Registry::implement(std::string_view id) const { return lookup(implements_, implement_index_, id); }
const Implement* Registry::implement_by_beacon(std::string_view uid) const {
  return lookup(implements_, beacon_index_, uid);
}
const FieldPolygon* Registry::field(std::string_view id) const { return lookup(fields_, field_index_, id); }

const FieldPolygon* Registry::field_at(const GeoPoint& p) const {
  for (const auto& f : fields_) {
    if (geo::point_in_polygon(p, f.ring)) return &f;
  }
  return nullptr;
}

// --- JSON ------------------------------------------------------------------

namespace {

std::string require_string(const json& j, const char* key, std::string_view ctx) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw Error(ErrorCode::schema_violation, std::string(ctx) + ": missing string '" + key + "'");
  }
  return j.at(key).get<std::string>();
}

std::string optional_string(const json& j, const char* key) {
  return j.contains(key) && j.at(key).is_string() ? j.at(key).get<std::string>() : std::string{};
}

WorkType require_work_type(const json& j, std::string_view ctx) {
  const auto s = require_string(j, "work_type", ctx);
  const auto w = parse_work_type(s);
  if (!w) throw Error(ErrorCode::schema_violation, std::string(ctx) + ": unknown work_type '" + s + "'");
  return *w;
}

const json& array_or_empty(const json& doc, const char* key) {
  static const json empty = json::array();
  if (!doc.contains(key)) return empty;
  if (!doc.at(key).is_array()) throw Error(ErrorCode::schema_violation, std::string("'") + key + "' must be an array");
  return doc.at(key);
}

template <class T>
void read_number(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) throw Error(ErrorCode::invalid_params, std::string("'") + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    const double v = j.at(key).get<double>();
    if (v != std::floor(v)) throw Error(ErrorCode::invalid_params, std::string("'") + key + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v < 0) throw Error(ErrorCode::invalid_params, std::string("'") + key + "' must be >= 0");
    }
    out = static_cast<T>(v);
  } else {
    out = j.at(key).get<T>();
  }
}

}  // namespace

Params params_from_json(const json& j, Params p) {
  if (j.is_null()) return p;
  if (!j.is_object()) throw Error(ErrorCode::invalid_params, "'params' must be an object");
  read_number(j, "v_park", p.v_park);
  read_number(j, "t_park", p.t_park);
  read_number(j, "t_min_segment", p.t_min_segment);
  read_number(j, "min_fixes", p.min_fixes);
  read_number(j, "t_gap_merge", p.t_gap_merge);
  read_number(j, "rssi_attach", p.rssi_attach);
  read_number(j, "rssi_detach", p.rssi_detach);
  read_number(j, "w_on", p.w_on);
  read_number(j, "w_off", p.w_off);
  read_number(j, "swath_m", p.swath_m);
  return p;
}

json to_json(const Params& p) {
  return {
      {"v_park", p.v_park},           {"t_park", p.t_park},           {"t_min_segment", p.t_min_segment},
      {"min_fixes", p.min_fixes},     {"t_gap_merge", p.t_gap_merge}, {"rssi_attach", p.rssi_attach},
      {"rssi_detach", p.rssi_detach}, {"w_on", p.w_on},               {"w_off", p.w_off},
      {"swath_m", p.swath_m},
  };
}

Registry load_registry(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::schema_violation, "registry document must be a JSON object");

  std::vector<Machine> machines;
  for (const auto& m : array_or_empty(doc, "machines")) {
    Machine out;
    out.id = require_string(m, "id", "machine");
    out.name = optional_string(m, "name");
    const auto cls = parse_machine_class(require_string(m, "class", "machine " + out.id));
    if (!cls) throw Error(ErrorCode::schema_violation, "machine '" + out.id + "': class must be SPV or MPV");
    out.cls = *cls;
    if (m.contains("work_type") && !m.at("work_type").is_null()) {
      out.spv_work_type = require_work_type(m, "machine " + out.id);
    }
    machines.push_back(std::move(out));
  }

  std::vector<Implement> implements;
  for (const auto& i : array_or_empty(doc, "implements")) {
    Implement out;
    out.id = require_string(i, "id", "implement");
    out.name = optional_string(i, "name");
    out.beacon_uid = require_string(i, "beacon_uid", "implement " + out.id);
    out.work_type = require_work_type(i, "implement " + out.id);
    implements.push_back(std::move(out));
  }

  std::vector<FieldPolygon> fields;
  for (const auto& f : array_or_empty(doc, "fields")) {
    FieldPolygon out;
    out.id = require_string(f, "id", "field");
    out.name = optional_string(f, "name");
    if (!f.contains("ring") || !f.at("ring").is_array()) {
      throw Error(ErrorCode::schema_violation, "field '" + out.id + "': missing 'ring'");
    }
    for (const auto& v : f.at("ring")) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw Error(ErrorCode::schema_violation, "field '" + out.id + "': ring entries must be [lon, lat]");
      }
      out.ring.push_back({v[1].get<double>(), v[0].get<double>()});
    }
    fields.push_back(std::move(out));
  }

  const Params params = params_from_json(doc.contains("params") ? doc.at("params") : json(nullptr));
  return Registry(std::move(machines), std::move(implements), std::move(fields), params);
}

Registry load_registry_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::schema_violation, path.string() + ": " + e.what());
  }
  return load_registry(doc);
}

json to_json(const Registry& r) {
  json machines = json::array();
  for (const auto& m : r.machines()) {
    json j = {{"id", m.id}, {"name", m.name}, {"class", to_string(m.cls)}};
    if (m.spv_work_type) j["work_type"] = to_string(*m.spv_work_type);
    machines.push_back(std::move(j));
  }
  json implements = json::array();
  for (const auto& i : r.implements()) {
    implements.push_back(
        {{"id", i.id}, {"name", i.name}, {"beacon_uid", i.beacon_uid}, {"work_type", to_string(i.work_type)}});
  }
  json fields = json::array();
  for (const auto& f : r.fields()) {
    json ring = json::array();
    for (const auto& p : f.ring) ring.push_back({p.lon, p.lat});
    fields.push_back({{"id", f.id}, {"name", f.name}, {"ring", ring}, {"area_ha", f.area_ha}});
  }
  return {{"machines", machines}, {"implements", implements}, {"fields", fields}, {"params", to_json(r.params())}};
}

}  // namespace fieldlog
