#include "fieldlog/record_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fieldlog/error.hpp"

namespace fieldlog::io {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

double duration_s(const WorkRecord& r) { return std::chrono::duration<double>(r.active).count(); }

std::vector<std::string> record_cells(const WorkRecord& r) {
  return {r.id,
          r.machine_id,
          r.field_id,
          std::string(to_string(r.work_type)),
          r.implement_id.value_or(""),
          format_rfc3339(r.start),
          format_rfc3339(r.end),
          fixed(duration_s(r), 3),
          fixed(r.distance_m, 2),
          to_string(r.flags)};
}

nlohmann::json record_properties(const WorkRecord& r, const Registry* registry) {
  nlohmann::json j = {
      {"id", r.id},
      {"machine", r.machine_id},
      {"field", r.field_id},
      {"work_type", to_string(r.work_type)},
      {"implement", r.implement_id ? nlohmann::json(*r.implement_id) : nlohmann::json(nullptr)},
      {"start", format_rfc3339(r.start)},
      {"end", format_rfc3339(r.end)},
      {"duration_s", std::stod(fixed(duration_s(r), 3))},
      {"distance_m", std::stod(fixed(r.distance_m, 2))},
      {"flags", to_string(r.flags)},
      {"fix_count", r.fix_count},
  };
  if (registry != nullptr) {
    const Machine* m = registry->machine(r.machine_id);
    j["machine_class"] = m != nullptr ? nlohmann::json(to_string(m->cls)) : nlohmann::json(nullptr);
    if (m != nullptr && !m->name.empty()) j["machine_name"] = m->name;
    const FieldPolygon* f = registry->field(r.field_id);
    if (f != nullptr && !f->name.empty()) j["field_name"] = f->name;
  }
  return j;
}

std::size_t column_index(const std::vector<std::string>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::schema_violation, "missing CSV column '" + std::string(name) + "'");
}

}  // namespace

std::string csv_escape(std::string_view cell) {
  if (cell.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (const char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_line(std::span<const std::string> cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_escape(cells[i]);
  }
  out += '\n';
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(cell));
        cell.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !cell.empty()) {
          row.push_back(std::move(cell));
          rows.push_back(std::move(row));
        }
        row.clear();
        cell.clear();
        row_has_content = false;
        break;
      default:
        cell += c;
        row_has_content = true;
    }
  }
  if (quoted) throw Error(ErrorCode::schema_violation, "unterminated quoted CSV cell");
  if (row_has_content || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string records_to_csv(std::span<const WorkRecord> records) {
  std::vector<std::string> header(std::begin(kRecordColumns), std::end(kRecordColumns));
  std::string out = csv_line(header);
  for (const auto& r : records) out += csv_line(record_cells(r));
  return out;
}

std::vector<WorkRecord> records_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  std::vector<WorkRecord> out;
  if (rows.empty()) return out;
  const auto& h = rows.front();
  const std::size_t c_id = column_index(h, "id"), c_machine = column_index(h, "machine"),
                    c_field = column_index(h, "field"), c_type = column_index(h, "work_type"),
                    c_impl = column_index(h, "implement"), c_start = column_index(h, "start"),
                    c_end = column_index(h, "end"), c_dur = column_index(h, "duration_s"),
                    c_dist = column_index(h, "distance_m"), c_flags = column_index(h, "flags");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != h.size()) {
      throw Error(ErrorCode::schema_violation, "CSV row " + std::to_string(i + 1) + " has wrong column count");
    }
    WorkRecord r;
    r.id = row[c_id];
    r.machine_id = row[c_machine];
    r.field_id = row[c_field];
    const auto wt = parse_work_type(row[c_type]);
    if (!wt) throw Error(ErrorCode::schema_violation, "unknown work_type '" + row[c_type] + "'");
    r.work_type = *wt;
    if (!row[c_impl].empty()) r.implement_id = row[c_impl];
    const auto start = parse_rfc3339(row[c_start]);
    const auto end = parse_rfc3339(row[c_end]);
    if (!start || !end) throw Error(ErrorCode::schema_violation, "bad timestamp in CSV row " + std::to_string(i + 1));
    r.start = *start;
    r.end = *end;
    try {
      r.active = Millis{static_cast<std::int64_t>(std::llround(std::stod(row[c_dur]) * 1000.0))};
      r.distance_m = row[c_dist].empty() ? 0.0 : std::stod(row[c_dist]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::schema_violation, "bad number in CSV row " + std::to_string(i + 1));
    }
    r.flags = parse_record_flags(row[c_flags]);
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json records_to_geojson(std::span<const WorkRecord> records, const Registry* registry) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& f : r.trajectory) coords.push_back({f.pos.lon, f.pos.lat});
    features.push_back({
        {"type", "Feature"},
        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
        {"properties", record_properties(r, registry)},
    });
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

nlohmann::json records_to_json(std::span<const WorkRecord> records, const Registry* registry) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : records) out.push_back(record_properties(r, registry));
  return out;
}

std::vector<segmentation::ManualEntry> manual_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  std::vector<segmentation::ManualEntry> out;
  if (rows.empty()) return out;
  const auto& h = rows.front();
  const std::size_t c_field = column_index(h, "field_id"), c_type = column_index(h, "work_type"),
                    c_date = column_index(h, "date");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != h.size()) {
      throw Error(ErrorCode::schema_violation, "CSV row " + std::to_string(i + 1) + " has wrong column count");
    }
    const auto wt = parse_work_type(row[c_type]);
    const auto date = parse_date(row[c_date]);
    if (!wt) throw Error(ErrorCode::schema_violation, "unknown work_type '" + row[c_type] + "'");
    if (!date) throw Error(ErrorCode::schema_violation, "bad date '" + row[c_date] + "'");
    out.push_back({row[c_field], *wt, *date});
  }
  return out;
}

std::string discrepancies_to_csv(const segmentation::DiscrepancyReport& report) {
  std::string out = "field_id,work_type,kind,auto_date,manual_date\n";
  for (const auto& e : report.entries) {
    const std::vector<std::string> cells = {e.field_id, std::string(to_string(e.work_type)),
                                            std::string(segmentation::to_string(e.kind)),
                                            e.auto_date ? format_date(*e.auto_date) : "",
                                            e.manual_date ? format_date(*e.manual_date) : ""};
    out += csv_line(cells);
  }
  return out;
}

nlohmann::json to_json(const segmentation::DiscrepancyReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({
        {"field_id", e.field_id},
        {"work_type", to_string(e.work_type)},
        {"kind", segmentation::to_string(e.kind)},
        {"auto_date", e.auto_date ? nlohmann::json(format_date(*e.auto_date)) : nlohmann::json(nullptr)},
        {"manual_date", e.manual_date ? nlohmann::json(format_date(*e.manual_date)) : nlohmann::json(nullptr)},
    });
  }
  return {{"entries", entries}};
}

nlohmann::json to_json(const segmentation::Summary& s) {
  return {{"per_class", s.per_class}, {"per_work_type", s.per_work_type}, {"per_field", s.per_field}, {"total", s.total}};
}

nlohmann::json to_json(std::span<const segmentation::TransitLeg> legs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& l : legs) {
    out.push_back({
        {"machine_id", l.machine_id},
        {"from_record_id", l.from_record_id},
        {"to_record_id", l.to_record_id},
        {"duration_s", l.duration_s},
        {"straight_line_m", l.straight_line_m},
        {"path_m", l.path_m},
    });
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path);
}

}  // namespace fieldlog::io
